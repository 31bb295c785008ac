#include "probekit/synthetic.hpp"

#include <cmath>
#include <random>

#include "probekit/digest.hpp"
#include "probekit/error.hpp"
#include "probekit/io.hpp"

namespace probekit {
namespace {

constexpr std::string_view kTagOpen = "[[u=";
constexpr std::string_view kTagClose = "]]";

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Vector gaussian_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

void validate(const SyntheticConfig& cfg) {
  if (cfg.dim == 0) throw Error(ErrorKind::InvalidArgument, "synthetic dim must be positive");
  if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
    throw Error(ErrorKind::InvalidArgument, "noise_sigma must be finite and nonnegative");
  }
  if (!std::isfinite(cfg.utility_scale) || !std::isfinite(cfg.nuisance_scale)) {
    throw Error(ErrorKind::InvalidArgument, "synthetic scales must be finite");
  }
  if (cfg.nuisance_scale != 0.0 && cfg.dim < 2) {
    throw Error(ErrorKind::InvalidArgument, "a nuisance direction needs dim >= 2");
  }
}

Vector planted_direction(const SyntheticConfig& cfg) {
  std::mt19937_64 rng(cfg.utility_direction_seed);
  Vector u = gaussian_vector(rng, cfg.dim);
  return u / u.norm();
}

Vector nuisance_direction(const SyntheticConfig& cfg) {
  const Vector u = planted_direction(cfg);
  std::mt19937_64 rng(mix(cfg.utility_direction_seed));
  Vector v = gaussian_vector(rng, cfg.dim);
  v -= v.dot(u) * u;
  return v / v.norm();
}

SyntheticEmbedder::SyntheticEmbedder(const SyntheticConfig& cfg) : cfg_(cfg) {
  validate(cfg_);
  utility_dir_ = planted_direction(cfg_);
  if (cfg_.nuisance_scale != 0.0) nuisance_dir_ = nuisance_direction(cfg_);
}

Vector SyntheticEmbedder::embed(std::string_view text, double planted_utility) const {
  std::mt19937_64 rng(digest64(text) ^ mix(cfg_.utility_direction_seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double nuisance_amplitude = normal(rng);

  Vector h = (cfg_.utility_scale * planted_utility) * utility_dir_;
  if (cfg_.nuisance_scale != 0.0) h += (cfg_.nuisance_scale * nuisance_amplitude) * nuisance_dir_;
  if (cfg_.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < h.size(); ++i) h[i] += cfg_.noise_sigma * normal(rng);
  }
  return h;
}

Vector SyntheticEmbedder::embed(std::string_view text) const {
  return embed(text, parse_utility_tag(text).value_or(0.0));
}

Vector synthetic_embed(const SyntheticConfig& cfg, std::string_view text, double planted_utility) {
  return SyntheticEmbedder(cfg).embed(text, planted_utility);
}

std::string utility_tag(double utility) {
  return std::string(kTagOpen) + format_double(utility) + std::string(kTagClose);
}

std::optional<double> parse_utility_tag(std::string_view text) {
  const auto open = text.find(kTagOpen);
  if (open == std::string_view::npos) return std::nullopt;
  const auto start = open + kTagOpen.size();
  const auto close = text.find(kTagClose, start);
  if (close == std::string_view::npos) return std::nullopt;
  try {
    return parse_double(text.substr(start, close - start));
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::vector<RawPair> make_synthetic_pairs(std::size_t n, std::uint64_t seed,
                                          std::string_view prefix) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<RawPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ua = normal(rng);
    double ub = normal(rng);
    while (std::abs(ua - ub) < kSyntheticMinGap) {
      ua = normal(rng);
      ub = normal(rng);
    }
    const std::string base = std::string(prefix) + " scenario " + std::to_string(i + 1);
    Scenario a{base + "a " + utility_tag(ua)};
    Scenario b{base + "b " + utility_tag(ub)};
    if (ua >= ub) {
      out.push_back(RawPair{std::move(a), std::move(b)});
    } else {
      out.push_back(RawPair{std::move(b), std::move(a)});
    }
  }
  return out;
}

}  // namespace probekit
