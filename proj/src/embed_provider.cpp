#include "probekit/embed_provider.hpp"

#include <httplib.h>
#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <random>
#include <thread>
#include <unordered_map>

#include "json.hpp"
#include "probekit/digest.hpp"
#include "probekit/error.hpp"
#include "probekit/io.hpp"

namespace probekit {
namespace {

using nlohmann::json;

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

std::string record_line(const std::string& key, const EmbeddingCache::Record& r) {
  json j;
  j["key_digest"] = key;
  j["model_id"] = r.model_id;
  j["dim"] = r.vector.size();
  j["vector"] = encode_f64_base64(r.vector);
  return j.dump();
}

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::InvalidArgument, "endpoint must be an http(s) URL: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_transient_status(int status) {
  return status == 408 || status == 409 || status == 429 || (status >= 500 && status <= 599);
}

/// POSTs one batch, retrying transient failures with capped exponential
/// backoff plus uniform jitter.
std::vector<std::vector<double>> fetch_batch(const ProviderSpec& p, const Endpoint& ep,
                                             std::span<const std::string> texts,
                                             std::uint64_t jitter_seed) {
  const RemoteConfig& rc = p.remote;
  httplib::Client client(ep.scheme_host_port);
  const auto timeout = std::chrono::duration<double>(rc.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  httplib::Headers headers;
  if (const char* key = std::getenv(rc.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = make_remote_request(p.model_id, texts);

  std::mt19937_64 jitter_rng(jitter_seed);
  std::string last_failure;
  int last_status = 0;
  for (int attempt = 0; attempt <= rc.max_retries; ++attempt) {
    if (attempt > 0) {
      const double base = std::min(rc.backoff_max_s, rc.backoff_initial_s * std::ldexp(1.0, attempt - 1));
      std::uniform_real_distribution<double> jitter(0.0, base);
      std::this_thread::sleep_for(std::chrono::duration<double>(base + jitter(jitter_rng)));
    }
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
      last_status = 0;
      last_failure = "connection failed: " + httplib::to_string(res.error());
      spdlog::warn("embedding request to {} failed ({}), attempt {}/{}", ep.scheme_host_port,
                   last_failure, attempt + 1, rc.max_retries + 1);
      continue;
    }
    if (res->status == 200) return parse_remote_response(res->body, texts.size());
    last_status = res->status;
    last_failure = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (!is_transient_status(res->status)) break;
    spdlog::warn("embedding request returned HTTP {}, attempt {}/{}", res->status, attempt + 1,
                 rc.max_retries + 1);
  }
  throw Error(ErrorKind::ProviderError,
              "provider '" + p.model_id + "' failed (status " + std::to_string(last_status) +
                  ", retries exhausted): " + last_failure);
}

void check_width(const ProviderSpec& p, std::size_t got) {
  if (got != p.dim) {
    throw Error(ErrorKind::DimensionMismatch, "model '" + p.model_id + "' returned width " +
                                                  std::to_string(got) + ", expected " +
                                                  std::to_string(p.dim));
  }
}

void fetch_remote(const ProviderSpec& p, const std::vector<std::string>& texts,
                  const std::vector<std::string>& keys, EmbeddingCache& cache) {
  const RemoteConfig& rc = p.remote;
  if (rc.endpoint.empty()) {
    throw Error(ErrorKind::InvalidArgument, "remote provider '" + p.model_id + "' has no endpoint");
  }
  const Endpoint ep = split_endpoint(rc.endpoint);
  const std::size_t batch = std::max<std::size_t>(1, rc.batch_size);
  const std::size_t nbatches = (texts.size() + batch - 1) / batch;
  const std::size_t workers = std::clamp<std::size_t>(rc.max_in_flight, 1, std::max<std::size_t>(1, nbatches));

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::optional<Error> first_error;

  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= nbatches) return;
      {
        std::lock_guard lock(err_mu);
        if (first_error) return;
      }
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(texts.size(), lo + batch);
      try {
        auto vectors = fetch_batch(p, ep, std::span(texts).subspan(lo, hi - lo), rc.jitter_seed ^ b);
        for (std::size_t i = 0; i < vectors.size(); ++i) {
          check_width(p, vectors[i].size());
          cache.insert(keys[lo + i], p.model_id, std::move(vectors[i]));
        }
      } catch (const Error& e) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = e;
      }
    }
  };

  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  cache.flush();
  if (first_error) throw *first_error;
}

}  // namespace

std::string_view to_string(ProviderKind kind) {
  switch (kind) {
    case ProviderKind::RemoteApi: return "remote_api";
    case ProviderKind::FileImport: return "file_import";
    case ProviderKind::Synthetic: return "synthetic";
  }
  return "synthetic";
}

ProviderKind parse_provider_kind(std::string_view name) {
  if (name == "remote" || name == "remote_api") return ProviderKind::RemoteApi;
  if (name == "file" || name == "file_import") return ProviderKind::FileImport;
  if (name == "synthetic") return ProviderKind::Synthetic;
  throw Error(ErrorKind::InvalidArgument, "unknown provider kind '" + std::string(name) + "'");
}

const std::vector<ModelInfo>& model_registry() {
  static const std::vector<ModelInfo> kModels = {
      {"microsoft/deberta-v3-xsmall", "deberta", 384, 1, ProviderKind::FileImport},
      {"microsoft/deberta-v3-small", "deberta", 768, 2, ProviderKind::FileImport},
      {"microsoft/deberta-v3-base", "deberta", 768, 3, ProviderKind::FileImport},
      {"microsoft/deberta-v3-large", "deberta", 1024, 4, ProviderKind::FileImport},
      {"sentence-transformers/all-MiniLM-L6-v2", "sentence-transformers", 384, 1, ProviderKind::FileImport},
      {"sentence-transformers/all-MiniLM-L12-v2", "sentence-transformers", 768, 2, ProviderKind::FileImport},
      {"sentence-transformers/all-mpnet-base-v2", "sentence-transformers", 768, 3, ProviderKind::FileImport},
      {"text-similarity-ada-001", "gpt-3", 1024, 1, ProviderKind::RemoteApi},
      {"text-similarity-babbage-001", "gpt-3", 2048, 2, ProviderKind::RemoteApi},
      {"text-similarity-curie-001", "gpt-3", 4096, 3, ProviderKind::RemoteApi},
      {"text-embedding-ada-002", "gpt-3", 1536, 4, ProviderKind::RemoteApi},
      {"cohere/small", "cohere", 1024, 1, ProviderKind::FileImport},
      {"cohere/medium", "cohere", 2048, 2, ProviderKind::FileImport},
      {"cohere/large", "cohere", 4096, 3, ProviderKind::FileImport},
  };
  return kModels;
}

std::optional<ModelInfo> find_model(std::string_view model_id) {
  for (const auto& m : model_registry()) {
    if (m.model_id == model_id) return m;
  }
  return std::nullopt;
}

std::string model_family(std::string_view model_id) {
  if (auto m = find_model(model_id)) return m->family;
  const auto slash = model_id.find('/');
  if (slash != std::string_view::npos) return std::string(model_id.substr(0, slash));
  return std::string(model_id);
}

int model_size_rank(std::string_view model_id) {
  if (auto m = find_model(model_id)) return m->size_rank;
  return 0;
}

ProviderSpec make_provider(ProviderKind kind, std::string model_id, std::optional<std::size_t> dim) {
  ProviderSpec p;
  p.kind = kind;
  p.model_id = std::move(model_id);
  if (dim) {
    p.dim = *dim;
  } else if (auto m = find_model(p.model_id)) {
    p.dim = m->dim;
  } else if (kind == ProviderKind::Synthetic) {
    p.dim = p.synthetic.dim;
  } else {
    throw Error(ErrorKind::InvalidArgument,
                "unknown model '" + p.model_id + "'; pass its embedding width explicitly");
  }
  if (p.dim == 0) throw Error(ErrorKind::InvalidArgument, "embedding width must be positive");
  if (kind == ProviderKind::Synthetic) p.synthetic.dim = p.dim;
  return p;
}

ProviderSpec make_synthetic_provider(std::string model_id, const SyntheticConfig& cfg) {
  validate(cfg);
  ProviderSpec p;
  p.kind = ProviderKind::Synthetic;
  p.model_id = std::move(model_id);
  p.dim = cfg.dim;
  p.synthetic = cfg;
  return p;
}

std::string cache_key(std::string_view model_id, std::string_view prompt_text) {
  std::string buf;
  buf.reserve(model_id.size() + prompt_text.size() + 1);
  buf.append(model_id);
  buf.push_back('\x1f');
  buf.append(prompt_text);
  return sha256_hex(buf);
}

// --- EmbeddingCache ---------------------------------------------------------

EmbeddingCache::EmbeddingCache(EmbeddingCache&& other) noexcept {
  std::lock_guard lock(other.mu_);
  records_ = std::move(other.records_);
  pending_ = std::move(other.pending_);
  dir_ = std::move(other.dir_);
}

EmbeddingCache& EmbeddingCache::operator=(EmbeddingCache&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(mu_, other.mu_);
    records_ = std::move(other.records_);
    pending_ = std::move(other.pending_);
    dir_ = std::move(other.dir_);
  }
  return *this;
}

EmbeddingCache EmbeddingCache::open(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw Error(ErrorKind::IoError, "cannot create cache directory " + dir.string());
  EmbeddingCache cache;
  std::vector<fs::path> segments;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("embeddings-") && name.ends_with(".jsonl")) {
      segments.push_back(entry.path());
    }
  }
  std::sort(segments.begin(), segments.end());
  for (const auto& s : segments) cache.load_jsonl(s);
  cache.dir_ = dir;
  return cache;
}

std::optional<EmbeddingCache::Record> EmbeddingCache::find(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

bool EmbeddingCache::contains(const std::string& key) const {
  std::lock_guard lock(mu_);
  return records_.count(key) != 0;
}

void EmbeddingCache::insert(const std::string& key, const std::string& model_id,
                            std::vector<double> vector) {
  std::lock_guard lock(mu_);
  insert_locked(key, model_id, std::move(vector), true);
}

void EmbeddingCache::insert_locked(const std::string& key, const std::string& model_id,
                                   std::vector<double> vector, bool mark_pending) {
  for (double v : vector) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite embedding value for key " + key);
  }
  auto it = records_.find(key);
  if (it != records_.end()) {
    if (it->second.model_id == model_id && same_bits(it->second.vector, vector)) return;
    throw Error(ErrorKind::DuplicateKey, "conflicting vectors for key " + key);
  }
  records_.emplace(key, Record{model_id, std::move(vector)});
  if (mark_pending) pending_.push_back(key);
}

void EmbeddingCache::flush() {
  std::lock_guard lock(mu_);
  if (!dir_ || pending_.empty()) return;
  std::sort(pending_.begin(), pending_.end());
  std::string contents;
  for (const auto& key : pending_) {
    contents += record_line(key, records_.at(key));
    contents.push_back('\n');
  }
  const auto name = "embeddings-" + sha256_hex(contents).substr(0, 16) + ".jsonl";
  write_file_atomic(*dir_ / name, contents);
  pending_.clear();
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

void EmbeddingCache::export_jsonl(const std::filesystem::path& path) const {
  std::string contents;
  {
    std::lock_guard lock(mu_);
    for (const auto& [key, rec] : records_) {
      contents += record_line(key, rec);
      contents.push_back('\n');
    }
  }
  write_file_atomic(path, contents);
}

std::size_t EmbeddingCache::load_jsonl(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::size_t count = 0;
  std::size_t line_no = 0;
  std::size_t start = 0;
  std::lock_guard lock(mu_);
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    std::string key;
    std::string model_id;
    std::vector<double> vec;
    try {
      const json j = json::parse(line);
      key = j.at("key_digest").get<std::string>();
      model_id = j.at("model_id").get<std::string>();
      const auto dim = j.at("dim").get<std::size_t>();
      vec = decode_f64_base64(j.at("vector").get<std::string>());
      if (vec.size() != dim) {
        throw Error(ErrorKind::ParseError, "vector holds " + std::to_string(vec.size()) +
                                               " values but dim is " + std::to_string(dim));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ParseError, path.string() + ": " + e.what(), line_no);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ParseError) throw;
      throw Error(ErrorKind::ParseError, path.string() + ": " + e.what(), line_no);
    }
    insert_locked(key, model_id, std::move(vec), false);
    ++count;
  }
  return count;
}

CacheHandle import_embeddings(const std::filesystem::path& path) {
  EmbeddingCache cache;
  const std::size_t n = cache.load_jsonl(path);
  spdlog::info("imported {} embedding records ({} unique keys) from {}", n, cache.size(), path.string());
  return cache;
}

// --- remote wire format -------------------------------------------------------

std::string make_remote_request(const std::string& model_id, std::span<const std::string> texts) {
  json j;
  j["model"] = model_id;
  j["input"] = json::array();
  for (const auto& t : texts) j["input"].push_back(t);
  return j.dump();
}

std::vector<std::vector<double>> parse_remote_response(std::string_view body,
                                                       std::size_t expected_count) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ProviderError, std::string("malformed provider response: ") + e.what());
  }
  if (!j.contains("data") || !j["data"].is_array()) {
    throw Error(ErrorKind::ProviderError, "provider response has no data array");
  }
  const auto& data = j["data"];
  if (data.size() != expected_count) {
    throw Error(ErrorKind::ProviderError, "provider returned " + std::to_string(data.size()) +
                                              " embeddings for " + std::to_string(expected_count) +
                                              " inputs");
  }
  std::vector<std::vector<double>> out(expected_count);
  std::vector<bool> seen(expected_count, false);
  for (std::size_t pos = 0; pos < data.size(); ++pos) {
    const auto& item = data[pos];
    const std::size_t index = item.contains("index") ? item["index"].get<std::size_t>() : pos;
    if (index >= expected_count || seen[index]) {
      throw Error(ErrorKind::ProviderError, "provider response has a bad or repeated index");
    }
    seen[index] = true;
    const auto& emb = item.at("embedding");
    if (emb.is_string()) {
      out[index] = decode_f32_base64(emb.get<std::string>());
    } else {
      out[index].reserve(emb.size());
      for (const auto& v : emb) out[index].push_back(v.get<double>());
    }
  }
  return out;
}

// --- embed_batch --------------------------------------------------------------

EmbeddingMatrix embed_batch(const ProviderSpec& p, std::span<const std::string> texts,
                            EmbeddingCache& cache) {
  if (p.dim == 0) throw Error(ErrorKind::InvalidArgument, "provider width must be positive");
  EmbeddingMatrix out;
  out.model_id = p.model_id;
  out.rows.resize(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(p.dim));
  out.row_keys.resize(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) out.row_keys[i] = cache_key(p.model_id, texts[i]);

  if (p.kind == ProviderKind::Synthetic) {
    if (p.synthetic.dim != p.dim) check_width(p, p.synthetic.dim);
    const SyntheticEmbedder embedder(p.synthetic);
    const auto n = static_cast<Eigen::Index>(texts.size());
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      out.rows.row(i) = embedder.embed(texts[static_cast<std::size_t>(i)]).transpose();
    }
    return out;
  }

  // Unique missing texts, in first-occurrence order.
  std::vector<std::string> missing_texts;
  std::vector<std::string> missing_keys;
  {
    std::unordered_map<std::string, bool> queued;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto& key = out.row_keys[i];
      if (cache.contains(key) || queued.count(key)) continue;
      queued.emplace(key, true);
      missing_texts.push_back(texts[i]);
      missing_keys.push_back(key);
    }
  }

  if (!missing_texts.empty()) {
    if (p.kind == ProviderKind::FileImport) {
      throw Error(ErrorKind::CacheMiss, std::to_string(missing_texts.size()) +
                                            " prompt texts have no imported embedding for '" +
                                            p.model_id + "', e.g. \"" + missing_texts.front() + "\"");
    }
    fetch_remote(p, missing_texts, missing_keys, cache);
  }

  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto rec = cache.find(out.row_keys[i]);
    if (!rec) throw Error(ErrorKind::CacheMiss, "cache lost key " + out.row_keys[i]);
    check_width(p, rec->vector.size());
    out.rows.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(rec->vector.data(), static_cast<Eigen::Index>(rec->vector.size()));
  }
  return out;
}

}  // namespace probekit
