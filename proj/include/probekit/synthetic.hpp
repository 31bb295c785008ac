#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/data_ethics.hpp"
#include "probekit/linalg.hpp"

namespace probekit {

/// Parameters of the synthetic embedding provider. Each prompt text maps to
///   utility_scale * planted_utility * u + nuisance_scale * g(text) * v + noise
/// where u is a seeded unit "utility" direction, v a unit direction orthogonal
/// to u, g(text) a standard normal draw and noise isotropic N(0, noise_sigma^2),
/// both seeded by the SHA-256 of the text.
struct SyntheticConfig {
  std::size_t dim = 256;
  std::uint64_t utility_direction_seed = 1;
  double noise_sigma = 0.0;
  double utility_scale = 1.0;
  /// Amplitude of a utility-free distractor direction. Zero disables it.
  double nuisance_scale = 0.0;

  bool operator==(const SyntheticConfig&) const = default;
};

void validate(const SyntheticConfig& cfg);

/// The planted unit utility direction u.
Vector planted_direction(const SyntheticConfig& cfg);
/// Unit direction orthogonal to u used for the nuisance component.
Vector nuisance_direction(const SyntheticConfig& cfg);

Vector synthetic_embed(const SyntheticConfig& cfg, std::string_view text, double planted_utility);

/// synthetic_embed with the directions computed once, for batches.
class SyntheticEmbedder {
 public:
  explicit SyntheticEmbedder(const SyntheticConfig& cfg);

  Vector embed(std::string_view text, double planted_utility) const;
  /// Reads the planted utility from the text's tag (0 when untagged).
  Vector embed(std::string_view text) const;

 private:
  SyntheticConfig cfg_;
  Vector utility_dir_;
  Vector nuisance_dir_;
};

/// Synthetic scenarios carry their utility as a "[[u=<value>]]" tag, which
/// survives every prompt template. Untagged text has utility 0.
std::string utility_tag(double utility);
std::optional<double> parse_utility_tag(std::string_view text);

/// Smallest utility gap between the two scenarios of a synthetic pair.
inline constexpr double kSyntheticMinGap = 0.05;

/// Generates `n` pairs whose scenario utilities are independent N(0, 1)
/// draws, redrawn while they differ by less than kSyntheticMinGap (ties are
/// not annotated). The higher-utility scenario is placed first, as in the
/// ETHICS files.
std::vector<RawPair> make_synthetic_pairs(std::size_t n, std::uint64_t seed,
                                          std::string_view prefix);

}  // namespace probekit
