#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

enum class Split { Train, Test, TestHard };

std::string_view to_string(Split split);
/// Accepts "train", "test", "test_hard".
Split parse_split(std::string_view name);
/// File name used by the ETHICS distribution, e.g. "util_test_hard.csv".
std::string util_file_name(Split split);

struct Scenario {
  std::string text;
  bool operator==(const Scenario&) const = default;
};

/// One ETHICS utilitarianism row: the first column is the more pleasant one.
struct RawPair {
  Scenario better;
  Scenario worse;
  bool operator==(const RawPair&) const = default;
};

/// label == 1 iff `first` is the more pleasant scenario.
struct LabeledPair {
  Scenario first;
  Scenario second;
  int label = 1;
  std::size_t pair_id = 0;

  /// The same comparison with the scenarios exchanged and the label flipped.
  LabeledPair swapped() const;
  bool operator==(const LabeledPair&) const = default;
};

struct Dataset {
  Split split = Split::Train;
  std::vector<LabeledPair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool operator==(const Dataset&) const = default;
};

struct SplitStats {
  std::size_t count = 0;
  /// Fraction of pairs whose scenarios were exchanged (label 0).
  double swapped_fraction = 0.0;
};

/// Parses RFC-4180 CSV text into records. Line numbers in errors are 1-based
/// and refer to the line where the offending record starts.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
/// Formats one RFC-4180 record (quoted fields, CRLF not used).
std::string format_csv_record(const std::vector<std::string>& fields);

/// Loads a util_*.csv file. A leading header row whose columns are exactly
/// (baseline, less_pleasant) or (better, worse) is skipped.
std::vector<RawPair> load_util_csv(const std::filesystem::path& path, Split split);
std::vector<RawPair> parse_util_csv(std::string_view text);
void write_util_csv(const std::filesystem::path& path, const std::vector<RawPair>& pairs);

/// Swaps each pair independently with probability 1/2 using a generator
/// seeded by `seed`. Pair ids are 1..N in input order.
Dataset make_labeled_pairs(const std::vector<RawPair>& raw, std::uint64_t seed,
                           Split split = Split::Train);

SplitStats split_stats(const Dataset& d);

/// Writes `first,second,label,pair_id` records.
void write_labeled_csv(const std::filesystem::path& path, const Dataset& d);

}  // namespace probekit
