#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "probekit/data_ethics.hpp"
#include "probekit/embed_provider.hpp"
#include "probekit/probe.hpp"
#include "probekit/prompting.hpp"
#include "probekit/reduce.hpp"

namespace probekit {

/// single: phi = P(H(f(S))) - P(H(f(T))), P fit on individual activations.
/// paired: phi = P(H(f(S)) - H(f(T))), P fit on activation differences.
enum class Mode { Single, Paired };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);
FitBasis fit_basis_for(Mode mode) noexcept;

/// Embeddings of scenarios under one (provider, template), looked up by
/// scenario. Every lookup is appended to an access log.
class ScenarioEmbeddings {
 public:
  ScenarioEmbeddings(PromptTemplate tpl, const EmbeddingMatrix& m,
                     std::span<const std::string> prompt_texts);

  /// Throws MissingEmbedding when the scenario was not embedded.
  Eigen::Map<const Vector> row(const Scenario& s) const;
  bool contains(const Scenario& s) const;
  std::size_t dim() const noexcept { return static_cast<std::size_t>(rows_.cols()); }
  const PromptTemplate& prompt_template() const noexcept { return tpl_; }

  /// Scenario texts in lookup order.
  std::vector<std::string> access_log() const;
  void clear_access_log() const;

 private:
  PromptTemplate tpl_;
  Matrix rows_;
  std::unordered_map<std::string, std::size_t> index_;  // prompt text -> row
  mutable std::mutex log_mu_;
  mutable std::vector<std::string> log_;
};

/// Embeds every scenario appearing in `datasets` through `tpl`.
ScenarioEmbeddings embed_datasets(const ProviderSpec& provider, const PromptTemplate& tpl,
                                  std::span<const Dataset* const> datasets,
                                  EmbeddingCache& cache);

/// The matrix the reducer is fit on: 2N activations (single, each pair's two
/// rows in text order) or N differences first - second (paired).
Matrix reducer_fit_rows(Mode mode, const Dataset& train, const ScenarioEmbeddings& h);

Reducer fit_reducer_for_mode(Mode mode, const Dataset& train, const ScenarioEmbeddings& h,
                             std::size_t k);

/// Throws ModeMismatch when the reducer was fit on the other basis.
FeatureSet build_features(Mode mode, const Reducer& r, const Dataset& pairs,
                          const ScenarioEmbeddings& h);

struct ExperimentSpec {
  ProviderSpec provider;
  PromptTemplate prompt;
  Mode mode = Mode::Single;
  std::size_t k = 1;
  std::uint64_t seed = 0;
  Split train_split = Split::Train;
  Split eval_split = Split::Test;
  ProbeOptions probe;
};

struct ExperimentResult {
  ExperimentSpec spec;
  double train_accuracy = 0.0;
  double eval_accuracy = 0.0;
  std::size_t k_effective = 0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  /// Penalized training objective at the fitted probe.
  double train_loss = 0.0;
  double wall_time_s = 0.0;
  /// "<stage>: <kind>: <message>" for failed cells.
  std::optional<std::string> error;

  bool ok() const noexcept { return !error.has_value(); }
};

struct Datasets {
  Dataset train;
  Dataset eval;
};

struct ExperimentArtifacts {
  Reducer reducer;
  ProbeModel probe;
};

/// embed -> fit reducer (train) -> train features -> probe -> eval features.
/// Failures are thrown as Error tagged with the stage.
ExperimentResult run_experiment(const ExperimentSpec& spec, const Datasets& data,
                                EmbeddingCache& cache, ExperimentArtifacts* artifacts = nullptr);

/// Evaluates one reducer/probe fit for several k using nested PCA bases.
/// Results are ordered as `ks`.
std::vector<ExperimentResult> run_experiment_ks(const ExperimentSpec& base,
                                                std::span<const std::size_t> ks,
                                                const Datasets& data, EmbeddingCache& cache);

const std::vector<std::size_t>& default_k_grid();

struct SweepGrid {
  std::vector<ProviderSpec> providers;
  std::vector<PromptTemplate> templates;
  std::vector<Mode> modes{Mode::Single, Mode::Paired};
  std::vector<std::size_t> ks = default_k_grid();
  std::uint64_t seed = 0;
  Split eval_split = Split::Test;
  ProbeOptions probe;
};

struct SweepOptions {
  std::size_t max_parallel = 1;
  /// Permutes the order in which (provider, template, mode) jobs start.
  std::optional<std::uint64_t> job_order_seed;
};

struct ResultTable {
  std::string config_digest;
  /// Ordered by (provider, template, mode, k) as listed in the grid.
  std::vector<ExperimentResult> rows;
};

/// seed XOR digest64(model, template id, mode, k).
std::uint64_t cell_seed(std::uint64_t seed, const ProviderSpec& p, const PromptTemplate& t,
                        Mode mode, std::size_t k);

/// Runs the Cartesian product. Cells that fail carry an error record; the
/// sweep continues. Throws EmptyGrid if any axis is empty.
ResultTable run_sweep(const SweepGrid& grid, const Datasets& data, EmbeddingCache& cache,
                      const SweepOptions& opts = {});

/// One JSON object per line per cell. Wall time is excluded so identical
/// sweeps produce identical files; see write_timings().
std::string format_results(const ResultTable& table);
ResultTable parse_results(std::string_view text);
void write_results(const std::filesystem::path& path, const ResultTable& table);
ResultTable read_results(const std::filesystem::path& path);
void write_timings(const std::filesystem::path& path, const ResultTable& table);

/// Reducer and probe in one JSON document.
std::string serialize_artifacts(const ExperimentArtifacts& a);
ExperimentArtifacts parse_artifacts(std::string_view text);

}  // namespace probekit
