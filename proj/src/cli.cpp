#include "probekit/cli.hpp"

#include <openssl/crypto.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "probekit/digest.hpp"
#include "probekit/error.hpp"
#include "probekit/io.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/report.hpp"
#include "probekit/synthetic.hpp"

#ifndef PROBEKIT_VERSION
#define PROBEKIT_VERSION "0.0.0"
#endif

namespace probekit {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr std::string_view kDefaultSyntheticModel = "synthetic/planted";

// Options shared by prepare-data, embed and run.
struct CommonOptions {
  std::string provider = "synthetic";
  std::string model;
  std::optional<std::size_t> dim;
  std::string endpoint;
  std::size_t batch_size = 96;
  std::size_t max_in_flight = 4;
  std::string embeddings_file;
  std::string templates = "0";
  std::string modes = "single";
  std::string ks = "1,10,50,300";
  std::uint64_t seed = 0;
  std::string split = "test";
  std::string cache_dir;
  std::string data_dir;
  std::size_t n_train = 2000;
  std::size_t n_eval = 1000;
  std::string out;
  std::string manifest;
  SyntheticConfig synthetic;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t derived_seed(std::uint64_t seed, std::string_view purpose, Split split) {
  return seed ^ digest64(std::string(purpose) + "/" + std::string(to_string(split)));
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto item = std::string(text.substr(start, end - start));
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

std::vector<std::size_t> parse_ks(std::string_view text) {
  std::vector<std::size_t> ks;
  for (const auto& item : split_list(text)) {
    std::size_t k = 0;
    const auto* end = item.data() + item.size();
    auto [ptr, ec] = std::from_chars(item.data(), end, k);
    if (ec != std::errc() || ptr != end || k == 0) throw UsageError("invalid k '" + item + "'");
    ks.push_back(k);
  }
  if (ks.empty()) throw UsageError("empty k list");
  return ks;
}

std::vector<Mode> parse_modes(std::string_view text) {
  if (text == "both") return {Mode::Single, Mode::Paired};
  std::vector<Mode> modes;
  for (const auto& item : split_list(text)) modes.push_back(parse_mode(item));
  if (modes.empty()) throw UsageError("empty mode list");
  return modes;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// "all", a comma list of builtin indices, or a template file.
std::vector<PromptTemplate> resolve_templates(const std::string& spec, const fs::path& base = {}) {
  const auto& builtin = builtin_templates();
  if (spec == "all") return builtin;
  const auto items = split_list(spec);
  if (!items.empty() && std::all_of(items.begin(), items.end(), [](const auto& s) { return all_digits(s); })) {
    std::vector<PromptTemplate> out;
    for (const auto& item : items) {
      const auto idx = std::stoul(item);
      if (idx >= builtin.size()) {
        throw UsageError("template index " + item + " out of range (0-" + std::to_string(builtin.size() - 1) + ")");
      }
      out.push_back(builtin[idx]);
    }
    return out;
  }
  fs::path path(spec);
  if (path.is_relative() && !base.empty()) path = base / path;
  return load_templates(path);
}

ProviderSpec build_provider(const CommonOptions& o) {
  const ProviderKind kind = parse_provider_kind(o.provider);
  if (kind == ProviderKind::Synthetic) {
    SyntheticConfig cfg = o.synthetic;
    if (o.dim) cfg.dim = *o.dim;
    return make_synthetic_provider(o.model.empty() ? std::string(kDefaultSyntheticModel) : o.model, cfg);
  }
  if (o.model.empty()) throw UsageError("--model is required for provider " + o.provider);
  ProviderSpec p = make_provider(kind, o.model, o.dim);
  if (kind == ProviderKind::RemoteApi) {
    if (o.endpoint.empty()) throw UsageError("--endpoint is required for the remote provider");
    p.remote.endpoint = o.endpoint;
    p.remote.batch_size = o.batch_size;
    p.remote.max_in_flight = o.max_in_flight;
  }
  return p;
}

Datasets load_data(const std::string& data_dir, std::size_t n_train, std::size_t n_eval,
                   std::uint64_t seed, Split eval_split) {
  Datasets d;
  if (!data_dir.empty()) {
    const fs::path dir(data_dir);
    d.train = make_labeled_pairs(load_util_csv(dir / util_file_name(Split::Train), Split::Train),
                                 derived_seed(seed, "labels", Split::Train), Split::Train);
    d.eval = make_labeled_pairs(load_util_csv(dir / util_file_name(eval_split), eval_split),
                                derived_seed(seed, "labels", eval_split), eval_split);
    return d;
  }
  const auto raw_train = make_synthetic_pairs(n_train, derived_seed(seed, "synthetic", Split::Train), "train");
  const auto raw_eval = make_synthetic_pairs(n_eval, derived_seed(seed, "synthetic", eval_split),
                                             to_string(eval_split));
  d.train = make_labeled_pairs(raw_train, derived_seed(seed, "labels", Split::Train), Split::Train);
  d.eval = make_labeled_pairs(raw_eval, derived_seed(seed, "labels", eval_split), eval_split);
  return d;
}

EmbeddingCache open_cache(const std::string& cache_dir, const std::string& embeddings_file) {
  EmbeddingCache cache = cache_dir.empty() ? EmbeddingCache() : EmbeddingCache::open(cache_dir);
  if (!embeddings_file.empty()) cache.load_jsonl(embeddings_file);
  return cache;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json versions() {
  return {{"probekit", PROBEKIT_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"openssl", OpenSSL_version(OPENSSL_VERSION)},
          {"spdlog", std::to_string(SPDLOG_VER_MAJOR) + "." + std::to_string(SPDLOG_VER_MINOR) + "." +
                         std::to_string(SPDLOG_VER_PATCH)},
          {"compiler", __VERSION__}};
}

/// Appends one JSON line per invocation.
struct Manifest {
  fs::path path;
  json entry;

  void append(int exit_code) {
    entry["exit_code"] = exit_code;
    entry["timestamp"] = utc_timestamp();
    entry["versions"] = versions();
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::app | std::ios::binary);
    if (!f) throw Error(ErrorKind::IoError, "cannot append to manifest " + path.string());
    f << entry.dump() << '\n';
  }
};

fs::path manifest_path(const std::string& explicit_path, const std::string& out, bool out_is_dir) {
  if (!explicit_path.empty()) return explicit_path;
  if (out.empty()) return "probekit-manifest.jsonl";
  const fs::path o(out);
  return (out_is_dir ? o : o.parent_path()) / "manifest.jsonl";
}

void add_provider_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--provider", o.provider, "synthetic | remote | file")->capture_default_str();
  cmd->add_option("--model", o.model, "Model id (defaults to synthetic/planted for synthetic)");
  cmd->add_option("--dim", o.dim, "Embedding width; taken from the model registry when omitted");
  cmd->add_option("--endpoint", o.endpoint, "Embeddings URL for the remote provider");
  cmd->add_option("--batch-size", o.batch_size, "Texts per remote request")->capture_default_str();
  cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent remote requests")->capture_default_str();
  cmd->add_option("--embeddings", o.embeddings_file, "Embedding JSONL file to import into the cache");
  cmd->add_option("--cache-dir", o.cache_dir, "Persistent embedding cache directory");
  cmd->add_option("--noise", o.synthetic.noise_sigma, "Synthetic isotropic noise sigma")->capture_default_str();
  cmd->add_option("--utility-seed", o.synthetic.utility_direction_seed, "Synthetic utility direction seed")
      ->capture_default_str();
  cmd->add_option("--utility-scale", o.synthetic.utility_scale, "Synthetic utility amplitude")->capture_default_str();
  cmd->add_option("--nuisance", o.synthetic.nuisance_scale, "Synthetic distractor amplitude")->capture_default_str();
}

void add_data_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--data-dir", o.data_dir, "Directory holding util_train.csv and the eval split file");
  cmd->add_option("--n-train", o.n_train, "Synthetic training pairs when no --data-dir")->capture_default_str();
  cmd->add_option("--n-eval", o.n_eval, "Synthetic eval pairs when no --data-dir")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Label and data seed")->capture_default_str();
  cmd->add_option("--split", o.split, "Eval split: test | test_hard")->capture_default_str();
}

// --- subcommands --------------------------------------------------------------

int cmd_prepare_data(const CommonOptions& o, bool synthetic, Manifest& manifest, std::ostream& out) {
  if (o.out.empty()) throw UsageError("prepare-data needs --out <dir>");
  const fs::path dir(o.out);
  fs::create_directories(dir);
  json written = json::array();
  for (Split split : {Split::Train, Split::Test, Split::TestHard}) {
    std::vector<RawPair> raw;
    if (synthetic) {
      raw = make_synthetic_pairs(split == Split::Train ? o.n_train : o.n_eval,
                                 derived_seed(o.seed, "synthetic", split), to_string(split));
      write_util_csv(dir / util_file_name(split), raw);
      written.push_back((dir / util_file_name(split)).string());
    } else {
      if (o.data_dir.empty()) throw UsageError("prepare-data needs --data-dir or --synthetic");
      const fs::path src = fs::path(o.data_dir) / util_file_name(split);
      if (split != Split::Train && !fs::exists(src)) continue;
      raw = load_util_csv(src, split);
    }
    const Dataset d = make_labeled_pairs(raw, derived_seed(o.seed, "labels", split), split);
    const fs::path labeled = dir / (std::string(to_string(split)) + "_labeled.csv");
    write_labeled_csv(labeled, d);
    written.push_back(labeled.string());
    const SplitStats st = split_stats(d);
    out << to_string(split) << " pairs=" << st.count << " swapped_fraction=" << format_double(st.swapped_fraction)
        << '\n';
  }
  manifest.entry["seed"] = o.seed;
  manifest.entry["outputs"] = written;
  return kExitOk;
}

int cmd_embed(const CommonOptions& o, const std::string& export_path, Manifest& manifest, std::ostream& out) {
  const ProviderSpec provider = build_provider(o);
  const Split eval_split = parse_split(o.split);
  const Datasets data = load_data(o.data_dir, o.n_train, o.n_eval, o.seed, eval_split);
  const auto templates = resolve_templates(o.templates);
  EmbeddingCache cache = open_cache(o.cache_dir, o.embeddings_file);
  const Dataset* both[] = {&data.train, &data.eval};
  std::size_t total = 0;
  for (const auto& tpl : templates) {
    const ScenarioEmbeddings h = embed_datasets(provider, tpl, both, cache);
    if (provider.kind == ProviderKind::Synthetic) {
      // Synthetic rows are not cached by the provider; store them here so the
      // export can be replayed through the file provider.
      std::vector<std::string> prompts;
      for (const Dataset* d : both) {
        for (const auto& p : d->pairs) {
          prompts.push_back(apply_template(tpl, p.first));
          prompts.push_back(apply_template(tpl, p.second));
        }
      }
      const EmbeddingMatrix m = embed_batch(provider, prompts, cache);
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto row = m.rows.row(static_cast<Eigen::Index>(i));
        cache.insert(m.row_keys[i], provider.model_id, std::vector<double>(row.begin(), row.end()));
      }
      cache.flush();
    }
    total += h.access_log().size();
    out << "template " << tpl.id << ": embedded " << data.train.size() + data.eval.size() << " pairs with "
        << provider.model_id << '\n';
  }
  if (!export_path.empty()) {
    cache.export_jsonl(export_path);
    out << "exported " << cache.size() << " records to " << export_path << '\n';
    manifest.entry["outputs"] = {export_path};
  }
  manifest.entry["seed"] = o.seed;
  manifest.entry["model"] = provider.model_id;
  return kExitOk;
}

int cmd_run(const CommonOptions& o, const std::string& artifacts_path, Manifest& manifest, std::ostream& out) {
  SweepGrid grid;
  grid.providers = {build_provider(o)};
  grid.templates = resolve_templates(o.templates);
  grid.modes = parse_modes(o.modes);
  grid.ks = parse_ks(o.ks);
  grid.seed = o.seed;
  grid.eval_split = parse_split(o.split);
  if (grid.eval_split == Split::Train) throw UsageError("--split must be test or test_hard");
  const Datasets data = load_data(o.data_dir, o.n_train, o.n_eval, o.seed, grid.eval_split);
  EmbeddingCache cache = open_cache(o.cache_dir, o.embeddings_file);

  const ResultTable table = run_sweep(grid, data, cache);
  const std::string records = format_results(table);
  out << records;
  manifest.entry["config_digest"] = table.config_digest;
  manifest.entry["seed"] = o.seed;
  json outputs = json::array();
  if (!o.out.empty()) {
    write_results(o.out, table);
    outputs.push_back(o.out);
  }
  if (!artifacts_path.empty()) {
    if (grid.templates.size() != 1 || grid.modes.size() != 1 || grid.ks.size() != 1) {
      throw UsageError("--artifacts needs a single template, mode and k");
    }
    ExperimentSpec spec{grid.providers.front(), grid.templates.front(), grid.modes.front(), grid.ks.front(),
                        o.seed, Split::Train, grid.eval_split, grid.probe};
    ExperimentArtifacts artifacts;
    run_experiment(spec, data, cache, &artifacts);
    write_file_atomic(artifacts_path, serialize_artifacts(artifacts));
    outputs.push_back(artifacts_path);
  }
  manifest.entry["outputs"] = outputs;
  const bool failed = std::any_of(table.rows.begin(), table.rows.end(), [](const auto& r) { return !r.ok(); });
  return failed ? kExitFailure : kExitOk;
}

ProviderSpec provider_from_config(const json& j) {
  CommonOptions o;
  o.provider = j.value("kind", std::string("synthetic"));
  o.model = j.value("model", std::string());
  if (j.contains("dim")) o.dim = j["dim"].get<std::size_t>();
  o.endpoint = j.value("endpoint", std::string());
  o.batch_size = j.value("batch_size", o.batch_size);
  o.max_in_flight = j.value("max_in_flight", o.max_in_flight);
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    o.synthetic.utility_direction_seed = s.value("utility_direction_seed", o.synthetic.utility_direction_seed);
    o.synthetic.noise_sigma = s.value("noise_sigma", o.synthetic.noise_sigma);
    o.synthetic.utility_scale = s.value("utility_scale", o.synthetic.utility_scale);
    o.synthetic.nuisance_scale = s.value("nuisance_scale", o.synthetic.nuisance_scale);
    if (s.contains("dim")) o.dim = s["dim"].get<std::size_t>();
  }
  return build_provider(o);
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, const std::string& cache_override,
              std::optional<std::size_t> parallel_override, Manifest& manifest, std::ostream& out) {
  if (config_path.empty()) throw UsageError("sweep needs --config <file>");
  if (out_dir.empty()) throw UsageError("sweep needs --out <dir>");
  const fs::path cfg_path(config_path);
  const fs::path base = cfg_path.parent_path();
  json cfg;
  try {
    cfg = json::parse(read_file(cfg_path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "sweep config: " + std::string(e.what()));
  }

  try {
    SweepGrid grid;
    for (const auto& p : cfg.at("providers")) grid.providers.push_back(provider_from_config(p));
    const auto& t = cfg.value("templates", json("all"));
    if (t.is_string()) {
      grid.templates = resolve_templates(t.get<std::string>(), base);
    } else {
      for (const auto& item : t) {
        if (item.is_number_unsigned()) {
          grid.templates.push_back(resolve_templates(std::to_string(item.get<std::size_t>())).front());
        } else {
          grid.templates.push_back(PromptTemplate{item.at("id").get<std::string>(), item.at("pattern").get<std::string>()});
          validate_template(grid.templates.back());
        }
      }
    }
    if (cfg.contains("modes")) {
      grid.modes.clear();
      for (const auto& m : cfg["modes"]) grid.modes.push_back(parse_mode(m.get<std::string>()));
    }
    if (cfg.contains("k")) grid.ks = cfg["k"].get<std::vector<std::size_t>>();
    grid.seed = cfg.value("seed", std::uint64_t{0});
    grid.eval_split = parse_split(cfg.value("eval_split", std::string("test")));
    if (cfg.contains("probe")) {
      const auto& p = cfg["probe"];
      grid.probe.lambda = p.value("lambda", grid.probe.lambda);
      grid.probe.tol = p.value("tol", grid.probe.tol);
      grid.probe.max_iter = p.value("max_iter", grid.probe.max_iter);
    }

    const json data_cfg = cfg.value("data", json::object());
    std::string data_dir = data_cfg.value("dir", std::string());
    if (!data_dir.empty() && fs::path(data_dir).is_relative()) data_dir = (base / data_dir).string();
    const Datasets data = load_data(data_dir, data_cfg.value("n_train", std::size_t{2000}),
                                    data_cfg.value("n_eval", std::size_t{1000}), grid.seed, grid.eval_split);

    std::string cache_dir = cache_override.empty() ? cfg.value("cache_dir", std::string()) : cache_override;
    if (!cache_override.empty() || cache_dir.empty()) {
      // taken as given
    } else if (fs::path(cache_dir).is_relative()) {
      cache_dir = (base / cache_dir).string();
    }
    std::string embeddings = cfg.value("embeddings", std::string());
    if (!embeddings.empty() && fs::path(embeddings).is_relative()) embeddings = (base / embeddings).string();
    EmbeddingCache cache = open_cache(cache_dir, embeddings);

    SweepOptions opts;
    opts.max_parallel = parallel_override.value_or(cfg.value("max_parallel", std::size_t{1}));

    const ResultTable table = run_sweep(grid, data, cache, opts);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    write_results(dir / "results.jsonl", table);
    write_timings(dir / "timings.jsonl", table);

    const auto failed =
        std::count_if(table.rows.begin(), table.rows.end(), [](const auto& r) { return !r.ok(); });
    out << "sweep: " << table.rows.size() << " cells, " << failed << " failed, config_digest "
        << table.config_digest << '\n';
    manifest.entry["config_digest"] = table.config_digest;
    manifest.entry["seed"] = grid.seed;
    manifest.entry["config"] = cfg_path.string();
    manifest.entry["outputs"] = {(dir / "results.jsonl").string(), (dir / "timings.jsonl").string()};
    return failed > 0 ? kExitFailure : kExitOk;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, "sweep config: " + std::string(e.what()));
  }
}

int cmd_report(const std::string& results_path, const std::string& out_dir, const std::string& group_by,
               const std::vector<std::string>& figs, Manifest& manifest, std::ostream& out) {
  if (results_path.empty()) throw UsageError("report needs --results <file>");
  const ResultTable table = read_results(results_path);
  std::vector<GroupKey> keys;
  for (const auto& k : split_list(group_by)) keys.push_back(parse_group_key(k));
  const Table summary = summary_table(table, keys);
  out << format_table(summary);

  json outputs = json::array();
  if (!out_dir.empty()) {
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    save_table(dir / "summary.csv", summary);
    outputs.push_back((dir / "summary.csv").string());
    std::vector<FigKind> kinds;
    const bool all = figs.size() == 1 && figs.front() == "all";
    if (all) {
      kinds = {FigKind::ModeViolin, FigKind::ScalingByK, FigKind::VarianceVsK, FigKind::AccuracyByPrompt};
    } else {
      for (const auto& f : figs) kinds.push_back(parse_fig_kind(f));
    }
    for (FigKind kind : kinds) {
      Table t;
      try {
        t = emit_fig_data(table, kind);
      } catch (const Error& e) {
        // With "all", figures the table cannot support are skipped.
        if (!all || e.kind() != ErrorKind::MissingAxis) throw;
        spdlog::warn("skipping {}: {}", to_string(kind), e.what());
        continue;
      }
      const fs::path p = dir / ("fig_" + std::string(to_string(kind)) + ".csv");
      save_table(p, t);
      outputs.push_back(p.string());
    }
  }
  manifest.entry["config_digest"] = table.config_digest;
  manifest.entry["outputs"] = outputs;
  return kExitOk;
}

void configure_logging(bool verbose) {
  auto logger = spdlog::get("probekit");
  if (!logger) logger = spdlog::stderr_logger_mt("probekit");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

}  // namespace

std::string version_string() { return std::string("probekit ") + PROBEKIT_VERSION; }

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear probes over sentence embeddings for pairwise pleasantness judgments", "probekit"};
  app.require_subcommand(1);
  bool verbose = false;
  bool show_version = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging on stderr");
  app.add_flag("--version", show_version, "Print the version and exit");
  app.set_version_flag();  // handled above so it goes to `out`

  CommonOptions o;
  std::string manifest_file;

  auto* prep = app.add_subcommand("prepare-data", "Label ETHICS util files (or generate synthetic ones)");
  bool synthetic_data = false;
  prep->add_flag("--synthetic", synthetic_data, "Generate synthetic util_*.csv files");
  add_data_options(prep, o);
  prep->add_option("--out", o.out, "Output directory")->required();
  prep->add_option("--manifest", manifest_file, "Manifest file (default <out>/manifest.jsonl)");

  auto* embed = app.add_subcommand("embed", "Embed the scenarios of a dataset into the cache");
  std::string export_path;
  add_provider_options(embed, o);
  add_data_options(embed, o);
  embed->add_option("--template", o.templates, "Builtin index list, 'all', or a template file")->capture_default_str();
  embed->add_option("--export", export_path, "Write the cache contents to a JSONL file");
  embed->add_option("--manifest", manifest_file, "Manifest file");

  auto* run = app.add_subcommand("run", "Run experiments for one provider and print result records");
  std::string artifacts_path;
  add_provider_options(run, o);
  add_data_options(run, o);
  run->add_option("--template", o.templates, "Builtin index list, 'all', or a template file")->capture_default_str();
  run->add_option("--mode", o.modes, "single | paired | both")->capture_default_str();
  run->add_option("--k", o.ks, "Comma-separated component counts")->capture_default_str();
  run->add_option("--out", o.out, "Also write the records to this file");
  run->add_option("--artifacts", artifacts_path, "Write the fitted reducer and probe (single cell only)");
  run->add_option("--manifest", manifest_file, "Manifest file");

  auto* sweep = app.add_subcommand("sweep", "Run a configured grid of experiments");
  std::string config_path;
  std::string sweep_out;
  std::string sweep_cache;
  std::optional<std::size_t> max_parallel;
  sweep->add_option("--config", config_path, "Sweep configuration (JSON)")->required();
  sweep->add_option("--out", sweep_out, "Output directory for results.jsonl and timings.jsonl")->required();
  sweep->add_option("--cache-dir", sweep_cache, "Overrides the configured cache directory");
  sweep->add_option("--max-parallel", max_parallel, "Concurrent (provider, template, mode) jobs");
  sweep->add_option("--manifest", manifest_file, "Manifest file");

  auto* report = app.add_subcommand("report", "Summaries and plot-ready tables from a results file");
  std::string results_path;
  std::string report_out;
  std::string group_by = "provider_family,mode,k";
  std::vector<std::string> figs{"all"};
  report->add_option("--results", results_path, "results.jsonl from run or sweep")->required();
  report->add_option("--out", report_out, "Output directory for summary.csv and fig_*.csv");
  report->add_option("--group-by", group_by, "Comma list of provider_family, model, template, mode, k")
      ->capture_default_str();
  report->add_option("--fig", figs, "mode_violin, scaling_by_k, variance_vs_k, accuracy_by_prompt or all");
  report->add_option("--manifest", manifest_file, "Manifest file");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    if (show_version) {
      out << version_string() << '\n';
      return kExitOk;
    }
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }
  configure_logging(verbose);

  Manifest manifest;
  int code = kExitFailure;
  try {
    std::vector<std::string> argv_copy(args.begin(), args.end());
    manifest.entry["command"] = app.get_subcommands().front()->get_name();
    manifest.entry["args"] = argv_copy;
    if (*prep) {
      manifest.path = manifest_path(manifest_file, o.out, true);
      code = cmd_prepare_data(o, synthetic_data, manifest, out);
    } else if (*embed) {
      manifest.path = manifest_path(manifest_file, export_path, false);
      code = cmd_embed(o, export_path, manifest, out);
    } else if (*run) {
      manifest.path = manifest_path(manifest_file, o.out, false);
      code = cmd_run(o, artifacts_path, manifest, out);
    } else if (*sweep) {
      manifest.path = manifest_path(manifest_file, sweep_out, true);
      code = cmd_sweep(config_path, sweep_out, sweep_cache, max_parallel, manifest, out);
    } else if (*report) {
      manifest.path = manifest_path(manifest_file, report_out, true);
      code = cmd_report(results_path, report_out, group_by, figs, manifest, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    code = kExitUsage;
  } catch (const Error& e) {
    err << "error: " << (e.stage().empty() ? "" : e.stage() + ": ") << to_string(e.kind()) << ": " << e.what()
        << '\n';
    code = is_environment_failure(e.kind()) ? kExitFailure : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    code = kExitFailure;
  }
  if (!manifest.path.empty()) {
    try {
      manifest.append(code);
    } catch (const std::exception& e) {
      err << "error: manifest: " << e.what() << '\n';
      if (code == kExitOk) code = kExitFailure;
    }
  }
  return code;
}

}  // namespace probekit
