#include "probekit/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_set>

#include "json.hpp"
#include "probekit/digest.hpp"
#include "probekit/error.hpp"
#include "probekit/io.hpp"
#include "probekit/kernels.hpp"

namespace probekit {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(name);
  }
}

Matrix stack_rows(const Dataset& d, const ScenarioEmbeddings& h, bool first) {
  Matrix out(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(h.dim()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& p = d.pairs[i];
    out.row(static_cast<Eigen::Index>(i)) = h.row(first ? p.first : p.second).transpose();
  }
  return out;
}

std::string dataset_digest(const Dataset& d) {
  Sha256 h;
  h.update(to_string(d.split));
  for (const auto& p : d.pairs) {
    h.update_u64(p.first.text.size());
    h.update(p.first.text);
    h.update_u64(p.second.text.size());
    h.update(p.second.text);
    h.update_u64(static_cast<std::uint64_t>(p.label));
    h.update_u64(p.pair_id);
  }
  return h.hex_digest();
}

json provider_json(const ProviderSpec& p) {
  json j;
  j["kind"] = std::string(to_string(p.kind));
  j["model"] = p.model_id;
  j["dim"] = p.dim;
  if (p.kind == ProviderKind::Synthetic) {
    j["synthetic"] = {{"dim", p.synthetic.dim},
                      {"utility_direction_seed", p.synthetic.utility_direction_seed},
                      {"noise_sigma", p.synthetic.noise_sigma},
                      {"utility_scale", p.synthetic.utility_scale},
                      {"nuisance_scale", p.synthetic.nuisance_scale}};
  }
  if (p.kind == ProviderKind::RemoteApi) j["endpoint"] = p.remote.endpoint;
  return j;
}

ProviderSpec provider_from_json(const json& j) {
  ProviderSpec p;
  p.kind = parse_provider_kind(j.at("kind").get<std::string>());
  p.model_id = j.at("model").get<std::string>();
  p.dim = j.at("dim").get<std::size_t>();
  if (j.contains("synthetic")) {
    const auto& s = j["synthetic"];
    p.synthetic.dim = s.at("dim").get<std::size_t>();
    p.synthetic.utility_direction_seed = s.at("utility_direction_seed").get<std::uint64_t>();
    p.synthetic.noise_sigma = s.at("noise_sigma").get<double>();
    p.synthetic.utility_scale = s.at("utility_scale").get<double>();
    p.synthetic.nuisance_scale = s.at("nuisance_scale").get<double>();
  }
  if (j.contains("endpoint")) p.remote.endpoint = j["endpoint"].get<std::string>();
  return p;
}

std::string describe(const Error& e) {
  std::string s;
  if (!e.stage().empty()) s += e.stage() + ": ";
  s += std::string(to_string(e.kind())) + ": " + e.what();
  return s;
}

double elapsed_s(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::Single ? "single" : "paired"; }

Mode parse_mode(std::string_view name) {
  if (name == "single") return Mode::Single;
  if (name == "paired") return Mode::Paired;
  throw Error(ErrorKind::InvalidArgument, "unknown mode '" + std::string(name) + "'");
}

FitBasis fit_basis_for(Mode mode) noexcept {
  return mode == Mode::Single ? FitBasis::Singles : FitBasis::Differences;
}

// --- ScenarioEmbeddings -------------------------------------------------------

ScenarioEmbeddings::ScenarioEmbeddings(PromptTemplate tpl, const EmbeddingMatrix& m,
                                       std::span<const std::string> prompt_texts)
    : tpl_(std::move(tpl)), rows_(m.rows) {
  if (static_cast<std::size_t>(m.rows.rows()) != prompt_texts.size()) {
    throw Error(ErrorKind::DimensionMismatch, "embedding rows and prompt texts differ in count");
  }
  for (std::size_t i = 0; i < prompt_texts.size(); ++i) index_.emplace(prompt_texts[i], i);
}

Eigen::Map<const Vector> ScenarioEmbeddings::row(const Scenario& s) const {
  const std::string prompt = apply_template(tpl_, s);
  auto it = index_.find(prompt);
  {
    std::lock_guard lock(log_mu_);
    log_.push_back(s.text);
  }
  if (it == index_.end()) {
    throw Error(ErrorKind::MissingEmbedding, "no embedding for scenario \"" + s.text + "\"");
  }
  return Eigen::Map<const Vector>(rows_.row(static_cast<Eigen::Index>(it->second)).data(), rows_.cols());
}

bool ScenarioEmbeddings::contains(const Scenario& s) const {
  return index_.count(apply_template(tpl_, s)) != 0;
}

std::vector<std::string> ScenarioEmbeddings::access_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

void ScenarioEmbeddings::clear_access_log() const {
  std::lock_guard lock(log_mu_);
  log_.clear();
}

ScenarioEmbeddings embed_datasets(const ProviderSpec& provider, const PromptTemplate& tpl,
                                  std::span<const Dataset* const> datasets, EmbeddingCache& cache) {
  validate_template(tpl);
  std::vector<std::string> prompts;
  std::unordered_set<std::string> seen;
  for (const Dataset* d : datasets) {
    for (const auto& p : d->pairs) {
      for (const Scenario* s : {&p.first, &p.second}) {
        std::string prompt = apply_template(tpl, *s);
        if (seen.insert(prompt).second) prompts.push_back(std::move(prompt));
      }
    }
  }
  const EmbeddingMatrix m = embed_batch(provider, prompts, cache);
  return ScenarioEmbeddings(tpl, m, prompts);
}

// --- reducer and features -----------------------------------------------------

Matrix reducer_fit_rows(Mode mode, const Dataset& train, const ScenarioEmbeddings& h) {
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto d = static_cast<Eigen::Index>(h.dim());
  if (mode == Mode::Paired) {
    Matrix diffs(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = train.pairs[static_cast<std::size_t>(i)];
      diffs.row(i) = (h.row(p.first) - h.row(p.second)).transpose();
    }
    return diffs;
  }
  // Both scenarios of every pair; within a pair the rows are ordered by text
  // so the fit matrix does not depend on pair orientation.
  Matrix singles(2 * n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = train.pairs[static_cast<std::size_t>(i)];
    const bool keep = p.first.text <= p.second.text;
    const Scenario& a = keep ? p.first : p.second;
    const Scenario& b = keep ? p.second : p.first;
    singles.row(2 * i) = h.row(a).transpose();
    singles.row(2 * i + 1) = h.row(b).transpose();
  }
  return singles;
}

Reducer fit_reducer_for_mode(Mode mode, const Dataset& train, const ScenarioEmbeddings& h,
                             std::size_t k) {
  if (train.pairs.empty()) throw Error(ErrorKind::EmptyDataset, "no training pairs");
  return fit_reducer(reducer_fit_rows(mode, train, h), k, fit_basis_for(mode));
}

FeatureSet build_features(Mode mode, const Reducer& r, const Dataset& pairs,
                          const ScenarioEmbeddings& h) {
  if (r.fitted_on != fit_basis_for(mode)) {
    throw Error(ErrorKind::ModeMismatch, "reducer fitted on " + std::string(to_string(r.fitted_on)) +
                                             " cannot build " + std::string(to_string(mode)) +
                                             "-mode features");
  }
  FeatureSet fs;
  const Matrix hs = stack_rows(pairs, h, true);
  const Matrix ht = stack_rows(pairs, h, false);
  if (mode == Mode::Single) {
    fs.phi = project(r, hs) - project(r, ht);
  } else {
    fs.phi = project(r, hs - ht);
  }
  fs.labels.reserve(pairs.size());
  for (const auto& p : pairs.pairs) fs.labels.push_back(p.label);
  return fs;
}

// --- experiments --------------------------------------------------------------

const std::vector<std::size_t>& default_k_grid() {
  static const std::vector<std::size_t> kGrid{1, 10, 50, 300};
  return kGrid;
}

namespace {

std::vector<ExperimentResult> run_group(const ExperimentSpec& base, std::span<const std::size_t> ks,
                                        const Datasets& data, EmbeddingCache& cache,
                                        ExperimentArtifacts* artifacts) {
  if (ks.empty()) throw Error(ErrorKind::InvalidArgument, "no k values requested");
  if (data.train.pairs.empty()) throw Error(ErrorKind::EmptyDataset, "no training pairs");
  if (data.eval.pairs.empty()) throw Error(ErrorKind::EmptyDataset, "no evaluation pairs");
  const auto t0 = Clock::now();

  const Dataset* both[] = {&data.train, &data.eval};
  const ScenarioEmbeddings h =
      stage("embed", [&] { return embed_datasets(base.provider, base.prompt, both, cache); });
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  const Reducer full =
      stage("fit_reducer", [&] { return fit_reducer_for_mode(base.mode, data.train, h, kmax); });
  const FeatureSet train_full =
      stage("train_features", [&] { return build_features(base.mode, full, data.train, h); });
  const FeatureSet eval_full =
      stage("eval_features", [&] { return build_features(base.mode, full, data.eval, h); });
  const double shared_s = elapsed_s(t0);

  std::vector<ExperimentResult> out;
  for (std::size_t k : ks) {
    const auto tk = Clock::now();
    ExperimentResult res;
    res.spec = base;
    res.spec.k = k;
    const Reducer r = full.truncated(k);
    const auto keff = static_cast<Eigen::Index>(r.k());
    FeatureSet train{train_full.phi.leftCols(keff), train_full.labels};
    const Matrix eval_phi = eval_full.phi.leftCols(keff);

    const ProbeModel probe = stage("fit_probe", [&] { return fit_logreg(train, base.probe); });
    stage("evaluate", [&] {
      res.train_accuracy = accuracy(predict(probe, train.phi).labels, train.labels);
      res.eval_accuracy = accuracy(predict(probe, eval_phi).labels, eval_full.labels);
      res.train_loss = loss_and_grad(probe, train).loss;
      return 0;
    });
    res.k_effective = r.k();
    res.n_train = data.train.size();
    res.n_eval = data.eval.size();
    res.wall_time_s = shared_s + elapsed_s(tk);
    if (artifacts != nullptr) *artifacts = ExperimentArtifacts{r, probe};
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const Datasets& data,
                                EmbeddingCache& cache, ExperimentArtifacts* artifacts) {
  const std::size_t ks[] = {spec.k};
  return run_group(spec, ks, data, cache, artifacts).front();
}

std::vector<ExperimentResult> run_experiment_ks(const ExperimentSpec& base,
                                                std::span<const std::size_t> ks,
                                                const Datasets& data, EmbeddingCache& cache) {
  return run_group(base, ks, data, cache, nullptr);
}

std::uint64_t cell_seed(std::uint64_t seed, const ProviderSpec& p, const PromptTemplate& t,
                        Mode mode, std::size_t k) {
  const std::string coords = p.model_id + '\x1f' + t.id + '\x1f' + std::string(to_string(mode)) +
                             '\x1f' + std::to_string(k);
  return seed ^ digest64(coords);
}

namespace {

std::string grid_digest(const SweepGrid& grid, const Datasets& data) {
  json j;
  j["providers"] = json::array();
  for (const auto& p : grid.providers) j["providers"].push_back(provider_json(p));
  j["templates"] = json::array();
  for (const auto& t : grid.templates) j["templates"].push_back({t.id, t.pattern});
  j["modes"] = json::array();
  for (auto m : grid.modes) j["modes"].push_back(std::string(to_string(m)));
  j["k"] = grid.ks;
  j["seed"] = grid.seed;
  j["eval_split"] = std::string(to_string(grid.eval_split));
  j["probe"] = {grid.probe.lambda, grid.probe.tol, grid.probe.max_iter};
  j["train_data"] = dataset_digest(data.train);
  j["eval_data"] = dataset_digest(data.eval);
  return sha256_hex(j.dump());
}

}  // namespace

ResultTable run_sweep(const SweepGrid& grid, const Datasets& data, EmbeddingCache& cache,
                      const SweepOptions& opts) {
  if (grid.providers.empty() || grid.templates.empty() || grid.modes.empty() || grid.ks.empty()) {
    throw Error(ErrorKind::EmptyGrid, "sweep grid has an empty axis");
  }
  const std::size_t nt = grid.templates.size();
  const std::size_t nm = grid.modes.size();
  const std::size_t nk = grid.ks.size();
  const std::size_t njobs = grid.providers.size() * nt * nm;

  ResultTable table;
  table.config_digest = grid_digest(grid, data);
  table.rows.resize(njobs * nk);

  std::vector<std::size_t> order(njobs);
  std::iota(order.begin(), order.end(), 0);
  if (opts.job_order_seed) {
    std::mt19937_64 rng(*opts.job_order_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }

  auto run_job = [&](std::size_t job) {
    const std::size_t pi = job / (nt * nm);
    const std::size_t ti = (job / nm) % nt;
    const std::size_t mi = job % nm;
    ExperimentSpec base;
    base.provider = grid.providers[pi];
    base.prompt = grid.templates[ti];
    base.mode = grid.modes[mi];
    base.seed = grid.seed;
    base.train_split = data.train.split;
    base.eval_split = grid.eval_split;
    base.probe = grid.probe;
    base.provider.remote.jitter_seed =
        grid.seed ^ digest64(base.provider.model_id + '\x1f' + base.prompt.id + '\x1f' +
                             std::string(to_string(base.mode)));

    std::vector<ExperimentResult> results;
    std::optional<std::string> failure;
    const auto t0 = Clock::now();
    try {
      results = run_experiment_ks(base, grid.ks, data, cache);
    } catch (const Error& e) {
      failure = describe(e);
    } catch (const std::exception& e) {
      failure = std::string("internal: ") + e.what();
    }
    if (failure) {
      spdlog::warn("sweep cell {} / {} / {} failed: {}", base.provider.model_id, base.prompt.id,
                   to_string(base.mode), *failure);
    }
    for (std::size_t ki = 0; ki < nk; ++ki) {
      ExperimentResult res;
      if (failure) {
        res.spec = base;
        res.spec.k = grid.ks[ki];
        res.error = failure;
        res.wall_time_s = elapsed_s(t0);
      } else {
        res = std::move(results[ki]);
      }
      res.spec.provider = grid.providers[pi];
      res.spec.seed = cell_seed(grid.seed, base.provider, base.prompt, base.mode, grid.ks[ki]);
      table.rows[job * nk + ki] = std::move(res);
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(opts.max_parallel, 1, njobs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < njobs; i = next.fetch_add(1)) run_job(order[i]);
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return table;
}

// --- persistence --------------------------------------------------------------

std::string format_results(const ResultTable& table) {
  std::string out;
  for (const auto& r : table.rows) {
    json j;
    j["config_digest"] = table.config_digest;
    j["provider"] = provider_json(r.spec.provider);
    j["family"] = model_family(r.spec.provider.model_id);
    j["size_rank"] = model_size_rank(r.spec.provider.model_id);
    j["template_id"] = r.spec.prompt.id;
    j["template"] = r.spec.prompt.pattern;
    j["mode"] = std::string(to_string(r.spec.mode));
    j["k"] = r.spec.k;
    j["seed"] = r.spec.seed;
    j["train_split"] = std::string(to_string(r.spec.train_split));
    j["eval_split"] = std::string(to_string(r.spec.eval_split));
    j["probe"] = {{"lambda", r.spec.probe.lambda}, {"tol", r.spec.probe.tol}, {"max_iter", r.spec.probe.max_iter}};
    if (r.ok()) {
      j["train_accuracy"] = r.train_accuracy;
      j["eval_accuracy"] = r.eval_accuracy;
      j["train_loss"] = r.train_loss;
      j["k_effective"] = r.k_effective;
      j["n_train"] = r.n_train;
      j["n_eval"] = r.n_eval;
      j["error"] = nullptr;
    } else {
      for (const char* key : {"train_accuracy", "eval_accuracy", "train_loss", "k_effective", "n_train", "n_eval"}) {
        j[key] = nullptr;
      }
      j["error"] = *r.error;
    }
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

ResultTable parse_results(std::string_view text) {
  ResultTable table;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json j = json::parse(line);
      ExperimentResult r;
      table.config_digest = j.at("config_digest").get<std::string>();
      r.spec.provider = provider_from_json(j.at("provider"));
      r.spec.prompt = PromptTemplate{j.at("template_id").get<std::string>(), j.at("template").get<std::string>()};
      r.spec.mode = parse_mode(j.at("mode").get<std::string>());
      r.spec.k = j.at("k").get<std::size_t>();
      r.spec.seed = j.at("seed").get<std::uint64_t>();
      r.spec.train_split = parse_split(j.at("train_split").get<std::string>());
      r.spec.eval_split = parse_split(j.at("eval_split").get<std::string>());
      const auto& pr = j.at("probe");
      r.spec.probe = ProbeOptions{pr.at("lambda").get<double>(), pr.at("tol").get<double>(),
                                  pr.at("max_iter").get<int>()};
      if (j.at("error").is_null()) {
        r.train_accuracy = j.at("train_accuracy").get<double>();
        r.eval_accuracy = j.at("eval_accuracy").get<double>();
        r.train_loss = j.at("train_loss").get<double>();
        r.k_effective = j.at("k_effective").get<std::size_t>();
        r.n_train = j.at("n_train").get<std::size_t>();
        r.n_eval = j.at("n_eval").get<std::size_t>();
      } else {
        r.error = j.at("error").get<std::string>();
      }
      table.rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, std::string("result record: ") + e.what(), line_no);
    }
  }
  return table;
}

void write_results(const std::filesystem::path& path, const ResultTable& table) {
  write_file_atomic(path, format_results(table));
}

ResultTable read_results(const std::filesystem::path& path) { return parse_results(read_file(path)); }

void write_timings(const std::filesystem::path& path, const ResultTable& table) {
  std::string out;
  for (const auto& r : table.rows) {
    json j;
    j["model"] = r.spec.provider.model_id;
    j["template_id"] = r.spec.prompt.id;
    j["mode"] = std::string(to_string(r.spec.mode));
    j["k"] = r.spec.k;
    j["wall_time_s"] = r.wall_time_s;
    out += j.dump();
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

std::string serialize_artifacts(const ExperimentArtifacts& a) {
  json j;
  j["format"] = "probekit.artifacts/1";
  j["reducer"] = json::parse(serialize_reducer(a.reducer));
  j["probe"] = json::parse(serialize_probe(a.probe));
  return j.dump();
}

ExperimentArtifacts parse_artifacts(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "probekit.artifacts/1") throw Error(ErrorKind::ParseError, "not an artifact bundle");
    return ExperimentArtifacts{parse_reducer(j.at("reducer").dump()), parse_probe(j.at("probe").dump())};
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("artifact bundle: ") + e.what());
  }
}

}  // namespace probekit
