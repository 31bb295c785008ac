#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/linalg.hpp"

namespace probekit {

inline constexpr double kConstantColumnEpsilon = 1e-12;

/// Per-column centering and scaling to zero mean, unit population variance.
struct Standardizer {
  Vector means;
  Vector stds;
  double epsilon = kConstantColumnEpsilon;
  /// 1 where stds < epsilon; such columns standardize to 0.
  std::vector<unsigned char> constant;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(means.size()); }
  bool operator==(const Standardizer&) const = default;
};

/// Top principal directions as orthonormal rows, ordered by decreasing
/// explained variance. Each row is signed so that its largest-magnitude
/// coordinate is positive.
struct PcaModel {
  Matrix components;            // k_effective x dim
  Vector explained_variances;   // squared singular values / n
  std::size_t k_requested = 0;
  std::size_t k_effective = 0;
  /// Sum of column variances of the (re-centered) fit data.
  double total_variance = 0.0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(components.cols()); }
  /// Keeps the first min(k, k_effective) components.
  PcaModel truncated(std::size_t k) const;
  bool operator==(const PcaModel&) const = default;
};

enum class FitBasis { Singles, Differences };

std::string_view to_string(FitBasis basis);

/// The full map P: standardize, then project onto the PCA basis.
struct Reducer {
  Standardizer standardizer;
  PcaModel pca;
  FitBasis fitted_on = FitBasis::Singles;
  /// SHA-256 of the fit matrix (shape and values).
  std::string fit_digest;

  std::size_t dim() const noexcept { return standardizer.dim(); }
  std::size_t k() const noexcept { return pca.k_effective; }
  Reducer truncated(std::size_t k) const;
  bool operator==(const Reducer&) const = default;
};

/// Throws TooFewRows for n < 2.
Standardizer fit_standardizer(const Matrix& x);
/// Throws DimensionMismatch when widths differ.
Matrix apply_standardizer(const Standardizer& s, const Matrix& x);

/// PCA of the (re-centered) rows of `xs` through a thin SVD. Requests beyond
/// the numerical rank are clamped with a logged warning.
PcaModel fit_pca(const Matrix& xs, std::size_t k);

/// Standardizes and fits PCA on `x`, recording the fit digest.
Reducer fit_reducer(const Matrix& x, std::size_t k, FitBasis basis);

/// n x k_effective coordinates of `x` under `r`.
Matrix project(const Reducer& r, const Matrix& x);

/// Applies the sign convention in place and returns the flipped-row count.
std::size_t canonicalize_signs(Matrix& components);

/// Hash of a matrix's shape and IEEE bytes.
std::string matrix_digest(const Matrix& x);

/// Structured-text (JSON) form; doubles are stored as base64 bytes so the
/// round trip is bit-exact.
std::string serialize_reducer(const Reducer& r);
Reducer parse_reducer(std::string_view text);

}  // namespace probekit
