#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/linalg.hpp"
#include "probekit/synthetic.hpp"

namespace probekit {

enum class ProviderKind { RemoteApi, FileImport, Synthetic };

std::string_view to_string(ProviderKind kind);
/// Accepts "remote", "remote_api", "file", "file_import", "synthetic".
ProviderKind parse_provider_kind(std::string_view name);

/// Settings for an OpenAI-compatible embeddings endpoint.
struct RemoteConfig {
  std::string endpoint;  // http(s)://host[:port]/path
  std::string api_key_env = "PROBEKIT_API_KEY";
  std::size_t batch_size = 96;
  std::size_t max_in_flight = 4;
  int max_retries = 5;
  double backoff_initial_s = 0.5;
  double backoff_max_s = 30.0;
  double timeout_s = 60.0;
  /// Seeds the backoff jitter; sweeps set it per cell.
  std::uint64_t jitter_seed = 0;

  bool operator==(const RemoteConfig&) const = default;
};

struct ProviderSpec {
  ProviderKind kind = ProviderKind::Synthetic;
  std::string model_id;
  std::size_t dim = 0;
  RemoteConfig remote;
  SyntheticConfig synthetic;

  bool operator==(const ProviderSpec&) const = default;
};

struct ModelInfo {
  std::string model_id;
  std::string family;
  std::size_t dim;
  /// Position within the family ordered by model size, starting at 1.
  int size_rank;
  ProviderKind default_kind;
};

/// Models with known embedding widths.
const std::vector<ModelInfo>& model_registry();
std::optional<ModelInfo> find_model(std::string_view model_id);
/// Registry family, else the text before the first '/', else the id itself.
std::string model_family(std::string_view model_id);
/// Registry size rank, else 0.
int model_size_rank(std::string_view model_id);

/// Builds a spec, taking the width from the registry when `dim` is empty.
/// Throws InvalidArgument for unknown models without an explicit width.
ProviderSpec make_provider(ProviderKind kind, std::string model_id,
                           std::optional<std::size_t> dim = std::nullopt);
ProviderSpec make_synthetic_provider(std::string model_id, const SyntheticConfig& cfg);

/// SHA-256 over (model_id, prompt text).
std::string cache_key(std::string_view model_id, std::string_view prompt_text);

struct EmbeddingMatrix {
  std::string model_id;
  Matrix rows;
  std::vector<std::string> row_keys;
};

/// Content-addressed store of embedding vectors keyed by cache_key().
///
/// A cache opened on a directory persists into segment files
/// `<dir>/embeddings-<digest>.jsonl`; each flush writes one new segment via
/// a temporary file and a rename. Record format, one JSON object per line:
///   {"key_digest": hex, "model_id": str, "dim": int, "vector": base64 LE f64}
class EmbeddingCache {
 public:
  struct Record {
    std::string model_id;
    std::vector<double> vector;
  };

  EmbeddingCache() = default;
  EmbeddingCache(EmbeddingCache&& other) noexcept;
  EmbeddingCache& operator=(EmbeddingCache&& other) noexcept;

  static EmbeddingCache open(const std::filesystem::path& dir);

  std::optional<Record> find(const std::string& key) const;
  bool contains(const std::string& key) const;
  /// Identical re-inserts are ignored; a conflicting vector throws DuplicateKey.
  void insert(const std::string& key, const std::string& model_id, std::vector<double> vector);
  /// Persists records inserted since the last flush. No-op for in-memory caches.
  void flush();

  std::size_t size() const;
  std::optional<std::filesystem::path> directory() const { return dir_; }

  /// Writes every record, ordered by key, to `path` atomically.
  void export_jsonl(const std::filesystem::path& path) const;
  /// Loads records from a JSONL file into this cache.
  std::size_t load_jsonl(const std::filesystem::path& path);

 private:
  void insert_locked(const std::string& key, const std::string& model_id,
                     std::vector<double> vector, bool mark_pending);

  mutable std::mutex mu_;
  std::map<std::string, Record> records_;
  std::vector<std::string> pending_;
  std::optional<std::filesystem::path> dir_;
};

using CacheHandle = EmbeddingCache;

/// Reads a cache/import file into a fresh in-memory cache.
CacheHandle import_embeddings(const std::filesystem::path& path);

/// One row per text, in input order. Cached rows are returned without
/// contacting the provider; newly fetched rows are inserted and flushed
/// before returning. Synthetic rows are computed on demand and not cached.
EmbeddingMatrix embed_batch(const ProviderSpec& p, std::span<const std::string> texts,
                            EmbeddingCache& cache);

/// Request/response format of the remote provider. Exposed for tests.
std::string make_remote_request(const std::string& model_id, std::span<const std::string> texts);
/// Parses {"data": [{"index": i, "embedding": [...] | "<base64 f32>"}]}.
std::vector<std::vector<double>> parse_remote_response(std::string_view body,
                                                       std::size_t expected_count);

}  // namespace probekit
