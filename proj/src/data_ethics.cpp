#include "probekit/data_ethics.hpp"

#include <algorithm>
#include <random>

#include "probekit/error.hpp"
#include "probekit/io.hpp"

namespace probekit {
namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                                                  c == '\f' || c == '\v'; });
}

bool is_header(const std::vector<std::string>& rec) {
  return rec.size() == 2 && ((rec[0] == "baseline" && rec[1] == "less_pleasant") ||
                             (rec[0] == "better" && rec[1] == "worse"));
}

struct LineRecord {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<LineRecord> parse_csv_with_lines(std::string_view text) {
  std::vector<LineRecord> out;
  std::size_t i = 0;
  std::size_t line = 1;
  const std::size_t n = text.size();
  // Skip a UTF-8 byte-order mark.
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  while (i < n) {
    LineRecord rec{line, {}};
    std::string field;
    bool record_done = false;
    while (!record_done) {
      field.clear();
      if (i < n && text[i] == '"') {
        ++i;
        bool closed = false;
        while (i < n) {
          const char c = text[i];
          if (c == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            closed = true;
            break;
          }
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        if (!closed) throw Error(ErrorKind::ParseError, "unterminated quoted field", rec.line);
        if (i < n && text[i] == '\r') ++i;
        if (i < n && text[i] != ',' && text[i] != '\n') {
          throw Error(ErrorKind::ParseError, "unexpected character after closing quote", line);
        }
      } else {
        while (i < n && text[i] != ',' && text[i] != '\n') {
          if (text[i] == '"') {
            throw Error(ErrorKind::ParseError, "quote inside unquoted field", line);
          }
          field.push_back(text[i]);
          ++i;
        }
        if (!field.empty() && field.back() == '\r') field.pop_back();
      }
      rec.fields.push_back(field);
      if (i >= n) {
        record_done = true;
      } else if (text[i] == ',') {
        ++i;
      } else {  // '\n'
        ++i;
        ++line;
        record_done = true;
      }
    }
    // A line with nothing on it is not a record.
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::TestHard: return "test_hard";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  if (name == "test_hard") return Split::TestHard;
  throw Error(ErrorKind::InvalidArgument, "unknown split '" + std::string(name) + "'");
}

std::string util_file_name(Split split) {
  return "util_" + std::string(to_string(split)) + ".csv";
}

LabeledPair LabeledPair::swapped() const {
  return LabeledPair{second, first, 1 - label, pair_id};
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (auto& rec : parse_csv_with_lines(text)) out.push_back(std::move(rec.fields));
  return out;
}

std::string format_csv_record(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) out.push_back(',');
    out.push_back('"');
    for (char c : fields[i]) {
      if (c == '"') out.push_back('"');
      out.push_back(c);
    }
    out.push_back('"');
  }
  return out;
}

std::vector<RawPair> parse_util_csv(std::string_view text) {
  auto records = parse_csv_with_lines(text);
  std::vector<RawPair> out;
  out.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (r == 0 && is_header(rec.fields)) continue;
    if (rec.fields.size() != 2) {
      throw Error(ErrorKind::ParseError,
                  "expected 2 fields, found " + std::to_string(rec.fields.size()), rec.line);
    }
    if (is_blank(rec.fields[0]) || is_blank(rec.fields[1])) {
      throw Error(ErrorKind::ParseError, "empty scenario text", rec.line);
    }
    out.push_back(RawPair{Scenario{rec.fields[0]}, Scenario{rec.fields[1]}});
  }
  if (out.empty()) throw Error(ErrorKind::EmptyDataset, "no scenario pairs found");
  return out;
}

std::vector<RawPair> load_util_csv(const std::filesystem::path& path, Split split) {
  (void)split;  // the split is carried by the Dataset built from these pairs
  const std::string text = read_file(path);
  try {
    return parse_util_csv(text);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what(), e.line());
  }
}

void write_util_csv(const std::filesystem::path& path, const std::vector<RawPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += format_csv_record({p.better.text, p.worse.text});
    out.push_back('\n');
  }
  write_file_atomic(path, out);
}

Dataset make_labeled_pairs(const std::vector<RawPair>& raw, std::uint64_t seed, Split split) {
  if (raw.empty()) throw Error(ErrorKind::EmptyDataset, "cannot label an empty pair list");
  std::mt19937_64 rng(seed);
  Dataset d;
  d.split = split;
  d.pairs.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    // Top bit of each draw is the coin; mt19937_64 output is fully specified.
    const bool swap = (rng() >> 63) != 0;
    LabeledPair lp{raw[i].better, raw[i].worse, 1, i + 1};
    d.pairs.push_back(swap ? lp.swapped() : lp);
  }
  return d;
}

SplitStats split_stats(const Dataset& d) {
  SplitStats s;
  s.count = d.pairs.size();
  if (s.count == 0) return s;
  const auto swapped = std::count_if(d.pairs.begin(), d.pairs.end(),
                                     [](const LabeledPair& p) { return p.label == 0; });
  s.swapped_fraction = static_cast<double>(swapped) / static_cast<double>(s.count);
  return s;
}

void write_labeled_csv(const std::filesystem::path& path, const Dataset& d) {
  std::string out = "first,second,label,pair_id\n";
  for (const auto& p : d.pairs) {
    out += format_csv_record({p.first.text, p.second.text});
    out += "," + std::to_string(p.label) + "," + std::to_string(p.pair_id) + "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace probekit
