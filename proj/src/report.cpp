#include "probekit/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "probekit/error.hpp"
#include "probekit/io.hpp"

namespace probekit {
namespace {

std::string key_value(const ExperimentResult& r, GroupKey key) {
  switch (key) {
    case GroupKey::ProviderFamily: return model_family(r.spec.provider.model_id);
    case GroupKey::Model: return r.spec.provider.model_id;
    case GroupKey::Template: return r.spec.prompt.id;
    case GroupKey::Mode: return std::string(to_string(r.spec.mode));
    case GroupKey::K: return std::to_string(r.spec.k);
  }
  return {};
}

// Zero-padded so k sorts numerically.
std::string sort_value(const ExperimentResult& r, GroupKey key) {
  if (key != GroupKey::K) return key_value(r, key);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%020zu", r.spec.k);
  return buf;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Values are sorted first so the result does not depend on row order.
Moments moments(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  Moments m;
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.variance = ss / static_cast<double>(v.size());
  m.min = v.front();
  m.max = v.back();
  return m;
}

std::size_t count_ok(const ResultTable& rt) {
  return static_cast<std::size_t>(
      std::count_if(rt.rows.begin(), rt.rows.end(), [](const auto& r) { return r.ok(); }));
}

Table new_table(const ResultTable& rt, FigKind kind, std::vector<std::string> columns) {
  return Table{rt.config_digest, std::string(to_string(kind)), std::move(columns), {}};
}

}  // namespace

std::string_view to_string(GroupKey key) {
  switch (key) {
    case GroupKey::ProviderFamily: return "provider_family";
    case GroupKey::Model: return "model";
    case GroupKey::Template: return "template";
    case GroupKey::Mode: return "mode";
    case GroupKey::K: return "k";
  }
  return "?";
}

GroupKey parse_group_key(std::string_view name) {
  if (name == "provider_family" || name == "family") return GroupKey::ProviderFamily;
  if (name == "model") return GroupKey::Model;
  if (name == "template") return GroupKey::Template;
  if (name == "mode") return GroupKey::Mode;
  if (name == "k") return GroupKey::K;
  throw Error(ErrorKind::InvalidArgument, "unknown group key '" + std::string(name) + "'");
}

std::vector<SummaryRow> aggregate(const ResultTable& rt, std::span<const GroupKey> group_by) {
  if (count_ok(rt) == 0) throw Error(ErrorKind::EmptyTable, "no successful cells to aggregate");
  struct Group {
    std::vector<std::string> key;
    std::vector<double> values;
    std::size_t errors = 0;
  };
  std::map<std::vector<std::string>, Group> groups;
  for (const auto& r : rt.rows) {
    std::vector<std::string> sort_key;
    std::vector<std::string> key;
    for (GroupKey g : group_by) {
      sort_key.push_back(sort_value(r, g));
      key.push_back(key_value(r, g));
    }
    auto& grp = groups[sort_key];
    grp.key = std::move(key);
    if (r.ok()) {
      grp.values.push_back(r.eval_accuracy);
    } else {
      ++grp.errors;
    }
  }
  std::vector<SummaryRow> out;
  for (auto& [_, grp] : groups) {
    if (grp.values.empty()) continue;
    const Moments m = moments(grp.values);
    out.push_back(SummaryRow{grp.key, m.mean, m.variance, grp.values.size(), m.min, m.max, grp.errors});
  }
  return out;
}

std::string format_table(const Table& t) {
  std::string out = "# config_digest=" + t.config_digest + " kind=" + t.kind + "\n";
  out += format_csv_record(t.columns);
  out.push_back('\n');
  for (const auto& row : t.rows) {
    out += format_csv_record(row);
    out.push_back('\n');
  }
  return out;
}

Table parse_table(std::string_view text) {
  const auto nl = text.find('\n');
  const std::string_view header = text.substr(0, nl);
  if (!header.starts_with("# ")) throw Error(ErrorKind::ParseError, "table lacks a header comment", 1);
  Table t;
  std::size_t pos = 2;
  while (pos < header.size()) {
    auto end = header.find(' ', pos);
    if (end == std::string_view::npos) end = header.size();
    const auto field = header.substr(pos, end - pos);
    pos = end + 1;
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) continue;
    const auto name = field.substr(0, eq);
    const auto value = std::string(field.substr(eq + 1));
    if (name == "config_digest") t.config_digest = value;
    if (name == "kind") t.kind = value;
  }
  if (nl == std::string_view::npos) throw Error(ErrorKind::ParseError, "table lacks a column row", 2);
  auto records = parse_csv(text.substr(nl + 1));
  if (records.empty()) throw Error(ErrorKind::ParseError, "table lacks a column row", 2);
  t.columns = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.columns.size()) {
      throw Error(ErrorKind::ParseError, "row width differs from the column row", i + 2);
    }
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

void save_table(const std::filesystem::path& path, const Table& t) {
  write_file_atomic(path, format_table(t));
}

Table summary_table(const ResultTable& rt, std::span<const GroupKey> group_by) {
  Table t{rt.config_digest, "summary", {}, {}};
  for (GroupKey g : group_by) t.columns.emplace_back(to_string(g));
  for (const char* c : {"mean_accuracy", "accuracy_variance", "count", "min_accuracy", "max_accuracy", "errors"}) {
    t.columns.emplace_back(c);
  }
  for (const auto& s : aggregate(rt, group_by)) {
    std::vector<std::string> row = s.key;
    row.push_back(format_double(s.mean_accuracy));
    row.push_back(format_double(s.accuracy_variance));
    row.push_back(std::to_string(s.count));
    row.push_back(format_double(s.min_accuracy));
    row.push_back(format_double(s.max_accuracy));
    row.push_back(std::to_string(s.errors));
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string_view to_string(FigKind kind) {
  switch (kind) {
    case FigKind::ModeViolin: return "mode_violin";
    case FigKind::ScalingByK: return "scaling_by_k";
    case FigKind::VarianceVsK: return "variance_vs_k";
    case FigKind::AccuracyByPrompt: return "accuracy_by_prompt";
  }
  return "?";
}

FigKind parse_fig_kind(std::string_view name) {
  for (auto k : {FigKind::ModeViolin, FigKind::ScalingByK, FigKind::VarianceVsK, FigKind::AccuracyByPrompt}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown figure kind '" + std::string(name) + "'");
}

Table emit_fig_data(const ResultTable& rt, FigKind kind) {
  if (count_ok(rt) == 0) throw Error(ErrorKind::EmptyTable, "no successful cells");
  std::vector<const ExperimentResult*> ok;
  for (const auto& r : rt.rows) {
    if (r.ok()) ok.push_back(&r);
  }

  switch (kind) {
    case FigKind::ModeViolin: {
      Table t = new_table(rt, kind, {"family", "mode", "k", "model", "template", "eval_accuracy"});
      std::vector<std::tuple<std::string, std::string, std::size_t, std::string, std::string, double>> cells;
      for (const auto* r : ok) {
        if (r->spec.k != 1 && r->spec.k != 300) continue;
        cells.emplace_back(model_family(r->spec.provider.model_id), std::string(to_string(r->spec.mode)),
                           r->spec.k, r->spec.provider.model_id, r->spec.prompt.id, r->eval_accuracy);
      }
      if (cells.empty()) throw Error(ErrorKind::MissingAxis, "mode_violin needs cells at k = 1 or k = 300");
      std::sort(cells.begin(), cells.end());
      for (const auto& [family, mode, k, model, tpl, acc] : cells) {
        t.rows.push_back({family, mode, std::to_string(k), model, tpl, format_double(acc)});
      }
      return t;
    }
    case FigKind::ScalingByK: {
      Table t = new_table(rt, kind, {"family", "model", "size_rank", "k", "mean_accuracy", "count"});
      std::map<std::tuple<std::string, int, std::string, std::size_t>, std::vector<double>> groups;
      for (const auto* r : ok) {
        const auto& id = r->spec.provider.model_id;
        groups[{model_family(id), model_size_rank(id), id, r->spec.k}].push_back(r->eval_accuracy);
      }
      for (const auto& [key, values] : groups) {
        const auto& [family, rank, model, k] = key;
        t.rows.push_back({family, model, std::to_string(rank), std::to_string(k),
                          format_double(moments(values).mean), std::to_string(values.size())});
      }
      return t;
    }
    case FigKind::VarianceVsK: {
      std::set<std::size_t> ks;
      for (const auto* r : ok) ks.insert(r->spec.k);
      if (ks.size() < 2) throw Error(ErrorKind::MissingAxis, "variance_vs_k needs at least two k values");
      Table t = new_table(rt, kind, {"family", "k", "accuracy_variance", "mean_accuracy", "count"});
      std::map<std::pair<std::string, std::size_t>, std::vector<double>> groups;
      for (const auto* r : ok) {
        groups[{model_family(r->spec.provider.model_id), r->spec.k}].push_back(r->eval_accuracy);
      }
      for (const auto& [key, values] : groups) {
        const Moments m = moments(values);
        t.rows.push_back({key.first, std::to_string(key.second), format_double(m.variance),
                          format_double(m.mean), std::to_string(values.size())});
      }
      return t;
    }
    case FigKind::AccuracyByPrompt: {
      Table t = new_table(rt, kind, {"template", "family", "model", "mode", "k", "eval_accuracy"});
      std::vector<std::tuple<std::string, std::string, std::string, std::string, std::size_t, double>> cells;
      for (const auto* r : ok) {
        cells.emplace_back(r->spec.prompt.id, model_family(r->spec.provider.model_id), r->spec.provider.model_id,
                           std::string(to_string(r->spec.mode)), r->spec.k, r->eval_accuracy);
      }
      std::sort(cells.begin(), cells.end());
      for (const auto& [tpl, family, model, mode, k, acc] : cells) {
        t.rows.push_back({tpl, family, model, mode, std::to_string(k), format_double(acc)});
      }
      return t;
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown figure kind");
}

}  // namespace probekit
