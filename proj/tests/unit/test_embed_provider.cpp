#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "probekit/digest.hpp"
#include "probekit/embed_provider.hpp"
#include "probekit/io.hpp"
#include "probekit/synthetic.hpp"
#include "test_support.hpp"

namespace probekit {
namespace {

using testing::TempDir;

constexpr double kPhi2 = 0.9772498680518208;  // standard normal CDF at 2

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(Registry, KnownWidths) {
  EXPECT_EQ(make_provider(ProviderKind::RemoteApi, "text-embedding-ada-002").dim, 1536u);
  EXPECT_EQ(find_model("text-embedding-ada-002")->family, "gpt-3");
  EXPECT_EQ(model_registry().size(), 14u);
  for (const auto& m : model_registry()) {
    EXPECT_GT(m.dim, 0u) << m.model_id;
    EXPECT_GE(m.size_rank, 1) << m.model_id;
  }
  EXPECT_THROW(make_provider(ProviderKind::RemoteApi, "unknown-model"), Error);
  EXPECT_EQ(make_provider(ProviderKind::RemoteApi, "unknown-model", 12).dim, 12u);
  EXPECT_EQ(model_family("acme/thing"), "acme");
  EXPECT_EQ(model_size_rank("acme/thing"), 0);
}

TEST(Registry, ProviderKindNames) {
  EXPECT_EQ(parse_provider_kind("remote"), ProviderKind::RemoteApi);
  EXPECT_EQ(parse_provider_kind("file"), ProviderKind::FileImport);
  EXPECT_EQ(parse_provider_kind("synthetic"), ProviderKind::Synthetic);
  EXPECT_THROW(parse_provider_kind("local"), Error);
}

TEST(Synthetic, SameTextSameRow) {
  const ProviderSpec p = make_synthetic_provider("syn", SyntheticConfig{32, 1, 0.5, 1.0, 0.0});
  EmbeddingCache cache;
  const std::vector<std::string> texts{"alpha [[u=0.5]]", "beta", "alpha [[u=0.5]]"};
  const auto m = embed_batch(p, texts, cache);
  ASSERT_EQ(m.rows.rows(), 3);
  EXPECT_EQ(m.rows.cols(), 32);
  EXPECT_EQ(m.rows.row(0), m.rows.row(2));
  EXPECT_NE(m.rows.row(0), m.rows.row(1));
  EXPECT_EQ(cache.size(), 0u);
}

TEST(Synthetic, NoiseFreeUtilityDifference) {
  const SyntheticConfig cfg{64, 9, 0.0, 1.7, 0.0};
  const Vector u = planted_direction(cfg);
  EXPECT_NEAR(u.norm(), 1.0, 1e-15);
  const double diff = u.dot(synthetic_embed(cfg, "x", 1.0)) - u.dot(synthetic_embed(cfg, "y", -1.0));
  EXPECT_NEAR(diff, 2.0 * 1.7, 1e-12);
  EXPECT_EQ(synthetic_embed(cfg, "z", 0.0), Vector::Zero(64));
}

TEST(Synthetic, NuisanceDirectionOrthogonal) {
  const SyntheticConfig cfg{48, 3, 0.0, 1.0, 2.0};
  EXPECT_NEAR(planted_direction(cfg).dot(nuisance_direction(cfg)), 0.0, 1e-15);
  EXPECT_NEAR(nuisance_direction(cfg).norm(), 1.0, 1e-15);
  // The nuisance term never moves the projection onto u.
  const Vector h = synthetic_embed(cfg, "anything", 0.25);
  EXPECT_NEAR(planted_direction(cfg).dot(h), 0.25, 1e-12);
}

TEST(Synthetic, SignAgreementNearNormalCdf) {
  // u.H ~ N(2 * utility, 1); with utility = +-1 the sign agrees with
  // probability Phi(2).
  const SyntheticConfig cfg{64, 4, 1.0, 2.0, 0.0};
  const SyntheticEmbedder e(cfg);
  const Vector u = planted_direction(cfg);
  int agree = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double utility = i % 2 == 0 ? 1.0 : -1.0;
    const double s = u.dot(e.embed("draw " + std::to_string(i), utility));
    if ((s > 0) == (utility > 0)) ++agree;
  }
  const double frac = static_cast<double>(agree) / n;
  EXPECT_GE(frac, 0.95);
  EXPECT_NEAR(frac, kPhi2, 0.01);
}

TEST(Synthetic, CorrelationApproachesOneAsNoiseVanishes) {
  double previous = -1.0;
  for (double sigma : {2.0, 0.5, 0.1, 0.0}) {
    const SyntheticConfig cfg{32, 5, sigma, 1.0, 0.0};
    const SyntheticEmbedder e(cfg);
    const Vector u = planted_direction(cfg);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    std::vector<double> a;
    std::vector<double> b;
    for (int i = 0; i < 2000; ++i) {
      a.push_back(normal(rng));
      b.push_back(u.dot(e.embed("t" + std::to_string(i), a.back())));
    }
    const Eigen::Map<Vector> va(a.data(), 2000);
    const Eigen::Map<Vector> vb(b.data(), 2000);
    const Vector ca = va.array() - va.mean();
    const Vector cb = vb.array() - vb.mean();
    const double corr = ca.dot(cb) / (ca.norm() * cb.norm());
    EXPECT_GT(corr, previous) << sigma;
    previous = corr;
  }
  EXPECT_NEAR(previous, 1.0, 1e-12);
}

TEST(Synthetic, UtilityTagRoundTrip) {
  for (double u : {0.0, -1.25, 3.141592653589793, 1e-300}) {
    EXPECT_EQ(parse_utility_tag("prefix " + utility_tag(u) + " suffix"), u);
  }
  EXPECT_FALSE(parse_utility_tag("untagged").has_value());
  const auto pairs = make_synthetic_pairs(50, 3, "p");
  for (const auto& p : pairs) {
    EXPECT_GE(*parse_utility_tag(p.better.text) - *parse_utility_tag(p.worse.text), kSyntheticMinGap);
  }
}

TEST(Synthetic, InvalidConfig) {
  EXPECT_THROW(validate(SyntheticConfig{0, 1, 0.0, 1.0, 0.0}), Error);
  EXPECT_THROW(validate(SyntheticConfig{8, 1, -0.1, 1.0, 0.0}), Error);
}

TEST(Cache, KeyDependsOnModelAndText) {
  EXPECT_NE(cache_key("m", "a"), cache_key("m", "b"));
  EXPECT_NE(cache_key("m1", "a"), cache_key("m2", "a"));
  EXPECT_NE(cache_key("ab", "c"), cache_key("a", "bc"));
  EXPECT_EQ(cache_key("m", "a").size(), 64u);
}

TEST(Cache, DuplicatesAndConflicts) {
  EmbeddingCache c;
  c.insert("k", "m", {1.0, 2.0});
  c.insert("k", "m", {1.0, 2.0});
  EXPECT_EQ(c.size(), 1u);
  EXPECT_PK_ERROR(c.insert("k", "m", {1.0, 2.5}), ErrorKind::DuplicateKey);
  EXPECT_PK_ERROR(c.insert("n", "m", {std::nan("")}), ErrorKind::NonFinite);
}

TEST(Cache, ImportThreeRecords) {
  TempDir dir;
  EmbeddingCache c;
  c.insert("k1", "m", {1.0});
  c.insert("k2", "m", {2.0});
  c.insert("k3", "m", {3.0});
  c.export_jsonl(dir / "e.jsonl");
  const CacheHandle h = import_embeddings(dir / "e.jsonl");
  EXPECT_EQ(h.size(), 3u);
  EXPECT_EQ(h.find("k2")->vector, std::vector<double>{2.0});
}

TEST(Cache, ImportConflictingDuplicate) {
  TempDir dir;
  const std::string a = R"({"key_digest":"k","model_id":"m","dim":1,"vector":")" +
                        encode_f64_base64(std::vector<double>{1.0}) + "\"}\n";
  const std::string b = R"({"key_digest":"k","model_id":"m","dim":1,"vector":")" +
                        encode_f64_base64(std::vector<double>{2.0}) + "\"}\n";
  write_file_atomic(dir / "same.jsonl", a + a);
  EXPECT_EQ(import_embeddings(dir / "same.jsonl").size(), 1u);
  write_file_atomic(dir / "conflict.jsonl", a + b);
  EXPECT_PK_ERROR(import_embeddings(dir / "conflict.jsonl"), ErrorKind::DuplicateKey);
}

TEST(Cache, MalformedRecordsReportLine) {
  TempDir dir;
  write_file_atomic(dir / "bad.jsonl", "\n{\"key_digest\":\"k\"}\n");
  try {
    import_embeddings(dir / "bad.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ParseError);
    EXPECT_EQ(e.line(), 2u);
  }
  write_file_atomic(dir / "dim.jsonl", R"({"key_digest":"k","model_id":"m","dim":2,"vector":")" +
                                           encode_f64_base64(std::vector<double>{1.0}) + "\"}\n");
  EXPECT_PK_ERROR(import_embeddings(dir / "dim.jsonl"), ErrorKind::ParseError);
}

TEST(Cache, PersistedRoundTripIsBitExactProperty) {
  testing::for_all(5, 8, [](std::mt19937_64& rng, int) {
    TempDir dir;
    std::vector<std::pair<std::string, std::vector<double>>> records;
    std::uniform_real_distribution<double> any(-1e300, 1e300);
    {
      EmbeddingCache c = EmbeddingCache::open(dir.path());
      for (int i = 0; i < 20; ++i) {
        std::vector<double> v{any(rng), std::ldexp(any(rng), -2000), -0.0, 5e-324, any(rng)};
        records.emplace_back(cache_key("m", std::to_string(i)), v);
        c.insert(records.back().first, "m", v);
      }
      c.flush();
    }
    const EmbeddingCache reopened = EmbeddingCache::open(dir.path());
    EXPECT_EQ(reopened.size(), records.size());
    for (const auto& [key, v] : records) EXPECT_TRUE(same_bits(reopened.find(key)->vector, v));
  });
}

TEST(Cache, FlushWritesSegmentsAtomically) {
  TempDir dir;
  EmbeddingCache c = EmbeddingCache::open(dir.path());
  c.insert("a", "m", {1.0});
  c.flush();
  c.insert("b", "m", {2.0});
  c.flush();
  c.flush();
  int segments = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    const auto name = e.path().filename().string();
    EXPECT_TRUE(name.starts_with("embeddings-") && name.ends_with(".jsonl")) << name;
    ++segments;
  }
  EXPECT_EQ(segments, 2);
  EXPECT_EQ(EmbeddingCache::open(dir.path()).size(), 2u);
}

TEST(FileImport, ServesCachedRowsInInputOrder) {
  const ProviderSpec syn = make_synthetic_provider("deberta-like", SyntheticConfig{8, 2, 0.3, 1.0, 0.0});
  EmbeddingCache scratch;
  std::vector<std::string> texts;
  for (int i = 0; i < 30; ++i) texts.push_back("text " + std::to_string(i));
  const auto reference = embed_batch(syn, texts, scratch);

  EmbeddingCache cache;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto row = reference.rows.row(static_cast<Eigen::Index>(i));
    cache.insert(cache_key("deberta-like", texts[i]), "deberta-like", std::vector<double>(row.begin(), row.end()));
  }
  const ProviderSpec file = make_provider(ProviderKind::FileImport, "deberta-like", 8);
  std::vector<std::string> shuffled(texts.rbegin(), texts.rend());
  const auto m = embed_batch(file, shuffled, cache);
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    EXPECT_EQ(m.rows.row(static_cast<Eigen::Index>(i)),
              reference.rows.row(static_cast<Eigen::Index>(texts.size() - 1 - i)));
    EXPECT_EQ(m.row_keys[i], cache_key("deberta-like", shuffled[i]));
  }
}

TEST(FileImport, MissingTextIsCacheMiss) {
  EmbeddingCache cache;
  const std::vector<std::string> texts{"absent"};
  EXPECT_PK_ERROR(embed_batch(make_provider(ProviderKind::FileImport, "m", 4), texts, cache), ErrorKind::CacheMiss);
}

TEST(FileImport, WrongWidthIsDimensionMismatch) {
  EmbeddingCache cache;
  cache.insert(cache_key("m", "t"), "m", {1.0, 2.0, 3.0});
  const std::vector<std::string> texts{"t"};
  EXPECT_PK_ERROR(embed_batch(make_provider(ProviderKind::FileImport, "m", 4), texts, cache),
                  ErrorKind::DimensionMismatch);
}

TEST(RemoteWire, RequestAndResponseFormats) {
  const std::vector<std::string> texts{"a", "b"};
  EXPECT_EQ(make_remote_request("m", texts), R"({"input":["a","b"],"model":"m"})");
  const auto out = parse_remote_response(R"({"data":[{"index":1,"embedding":[3,4]},{"index":0,"embedding":[1,2]}]})", 2);
  EXPECT_EQ(out[0], (std::vector<double>{1, 2}));
  EXPECT_EQ(out[1], (std::vector<double>{3, 4}));
  EXPECT_PK_ERROR(parse_remote_response(R"({"data":[]})", 1), ErrorKind::ProviderError);
  EXPECT_PK_ERROR(parse_remote_response("not json", 1), ErrorKind::ProviderError);
  EXPECT_PK_ERROR(parse_remote_response(R"({"data":[{"index":0,"embedding":[1]},{"index":0,"embedding":[2]}]})", 2),
                  ErrorKind::ProviderError);
}

TEST(RemoteWire, Float32PayloadIsWidened) {
  const float values[] = {0.1f, -2.5f, 3.0f};
  // Little-endian bytes of `values`, base64-encoded.
  const auto decoded = parse_remote_response(
      R"({"data":[{"index":0,"embedding":"zczMPQAAIMAAAEBA"}]})", 1);
  ASSERT_EQ(decoded[0].size(), 3u);
  EXPECT_EQ(decoded[0][0], static_cast<double>(values[0]));
  EXPECT_EQ(decoded[0][1], -2.5);
  EXPECT_EQ(decoded[0][2], 3.0);
}

TEST(Digest, Base64RoundTripAndErrors) {
  const std::vector<double> v{1.0, -0.0, 1e-310, 123.456};
  EXPECT_TRUE(same_bits(decode_f64_base64(encode_f64_base64(v)), v));
  EXPECT_TRUE(decode_f64_base64(encode_f64_base64(std::vector<double>{})).empty());
  EXPECT_PK_ERROR(decode_f64_base64("@@@@"), ErrorKind::ParseError);
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(digest64("abc"), 0xba7816bf8f01cfeaULL);
}

}  // namespace
}  // namespace probekit
