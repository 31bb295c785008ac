#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/pipeline.hpp"

namespace probekit {

enum class GroupKey { ProviderFamily, Model, Template, Mode, K };

std::string_view to_string(GroupKey key);
/// Accepts provider_family (or family), model, template, mode, k.
GroupKey parse_group_key(std::string_view name);

struct SummaryRow {
  std::vector<std::string> key;  // one value per group key
  double mean_accuracy = 0.0;
  double accuracy_variance = 0.0;  // population
  std::size_t count = 0;
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
  /// Failed cells in the group, excluded from the statistics.
  std::size_t errors = 0;
};

/// Eval-accuracy mean/variance per group, ordered by key. Groups containing
/// only failed cells are omitted. Throws EmptyTable when no cell succeeded.
std::vector<SummaryRow> aggregate(const ResultTable& rt, std::span<const GroupKey> group_by);

/// A static comma-separated table. Cells are kept as text so emitting and
/// parsing round-trips exactly; the first line of the file is a
/// `# config_digest=<hex> kind=<kind>` comment.
struct Table {
  std::string config_digest;
  std::string kind;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  bool operator==(const Table&) const = default;
};

std::string format_table(const Table& t);
Table parse_table(std::string_view text);
void save_table(const std::filesystem::path& path, const Table& t);

Table summary_table(const ResultTable& rt, std::span<const GroupKey> group_by);

enum class FigKind { ModeViolin, ScalingByK, VarianceVsK, AccuracyByPrompt };

std::string_view to_string(FigKind kind);
FigKind parse_fig_kind(std::string_view name);

/// Plot-ready data:
///   mode_violin        family,mode,k,model,template,eval_accuracy  (k in {1, 300})
///   scaling_by_k       family,model,size_rank,k,mean_accuracy,count
///   variance_vs_k      family,k,accuracy_variance,mean_accuracy,count
///   accuracy_by_prompt template,family,model,mode,k,eval_accuracy
/// Throws MissingAxis when the table lacks what the kind needs.
Table emit_fig_data(const ResultTable& rt, FigKind kind);

}  // namespace probekit
