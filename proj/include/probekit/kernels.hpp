#pragma once

// Data-parallel inner loops of the pipeline.
//
// The functions in `probekit::kernels` are OpenMP-parallel. Reductions are
// computed over fixed blocks of kBlockRows rows and the block partials are
// combined serially in block order, so results are bit-identical for any
// thread count. `probekit::kernels::reference` holds plain serial loops with
// the same contracts; they are kept for tests and the benchmark.

#include <cstddef>
#include <span>

#include "probekit/linalg.hpp"

namespace probekit::kernels {

inline constexpr std::size_t kBlockRows = 256;

struct ColumnMoments {
  Vector means;
  Vector stds;  // population (divide by n)
};

/// Sums of the mean logistic loss over rows and its derivatives with respect
/// to (w, b). The intercept is the last coordinate. No penalty term.
struct LogisticTerms {
  double loss = 0.0;
  Vector grad;
  Matrix hessian;  // empty unless requested
};

ColumnMoments column_moments(const Matrix& x);

/// (x - means) / scales columnwise; columns with constant[j] != 0 become 0.
Matrix standardize(const Matrix& x, const Vector& means, const Vector& scales,
                   std::span<const unsigned char> constant);

/// x * components^T.
Matrix project(const Matrix& x, const Matrix& components);

LogisticTerms logistic_terms(const Matrix& phi, std::span<const int> labels, const Vector& w,
                             double b, bool with_hessian);

/// Numerically stable log(1 + exp(z)).
double softplus(double z) noexcept;
/// 1 / (1 + exp(-z)), evaluated without overflow.
double sigmoid(double z) noexcept;

int max_threads() noexcept;
void set_num_threads(int n) noexcept;

namespace reference {

ColumnMoments column_moments(const Matrix& x);
Matrix standardize(const Matrix& x, const Vector& means, const Vector& scales,
                   std::span<const unsigned char> constant);
Matrix project(const Matrix& x, const Matrix& components);
LogisticTerms logistic_terms(const Matrix& phi, std::span<const int> labels, const Vector& w,
                             double b, bool with_hessian);

}  // namespace reference
}  // namespace probekit::kernels
