#include "probekit/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "probekit/error.hpp"

namespace probekit::kernels {
namespace {

constexpr Eigen::Index kHessianColumnChunk = 32;

Eigen::Index block_count(Eigen::Index n) {
  const auto b = static_cast<Eigen::Index>(kBlockRows);
  return (n + b - 1) / b;
}

struct BlockRange {
  Eigen::Index begin;
  Eigen::Index size;
};

BlockRange block_range(Eigen::Index block, Eigen::Index n) {
  const auto b = static_cast<Eigen::Index>(kBlockRows);
  const Eigen::Index begin = block * b;
  return {begin, std::min(b, n - begin)};
}

void check_labels(const Matrix& phi, std::span<const int> labels, const Vector& w) {
  if (static_cast<std::size_t>(phi.rows()) != labels.size()) {
    throw Error(ErrorKind::DimensionMismatch, "feature rows and label count differ");
  }
  if (phi.cols() != w.size()) {
    throw Error(ErrorKind::DimensionMismatch, "feature width and weight count differ");
  }
}

}  // namespace

double softplus(double z) noexcept {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

int max_threads() noexcept { return omp_get_max_threads(); }

void set_num_threads(int n) noexcept { omp_set_num_threads(std::max(1, n)); }

ColumnMoments column_moments(const Matrix& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index nb = block_count(n);
  ColumnMoments out{Vector::Zero(d), Vector::Zero(d)};
  if (n == 0) return out;

  Matrix partial(nb, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto r = block_range(b, n);
    partial.row(b) = x.middleRows(r.begin, r.size).colwise().sum();
  }
  for (Eigen::Index b = 0; b < nb; ++b) out.means += partial.row(b).transpose();
  out.means /= static_cast<double>(n);

#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto r = block_range(b, n);
    partial.row(b) =
        (x.middleRows(r.begin, r.size).rowwise() - out.means.transpose()).array().square().colwise().sum();
  }
  for (Eigen::Index b = 0; b < nb; ++b) out.stds += partial.row(b).transpose();
  out.stds = (out.stds / static_cast<double>(n)).cwiseSqrt();
  return out;
}

Matrix standardize(const Matrix& x, const Vector& means, const Vector& scales,
                   std::span<const unsigned char> constant) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Matrix out(n, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      out(i, j) = constant[static_cast<std::size_t>(j)] ? 0.0 : (x(i, j) - means[j]) / scales[j];
    }
  }
  return out;
}

Matrix project(const Matrix& x, const Matrix& components) {
  const Eigen::Index n = x.rows();
  const Eigen::Index nb = block_count(n);
  Matrix out(n, components.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto r = block_range(b, n);
    // One product per component, so a column does not depend on how many
    // components are projected alongside it.
    for (Eigen::Index c = 0; c < components.rows(); ++c) {
      out.col(c).segment(r.begin, r.size).noalias() =
          x.middleRows(r.begin, r.size) * components.row(c).transpose();
    }
  }
  return out;
}

LogisticTerms logistic_terms(const Matrix& phi, std::span<const int> labels, const Vector& w,
                             double b, bool with_hessian) {
  check_labels(phi, labels, w);
  const Eigen::Index n = phi.rows();
  const Eigen::Index k = phi.cols();
  const Eigen::Index nb = block_count(n);
  const double inv_n = 1.0 / static_cast<double>(n);

  Vector loss_partial = Vector::Zero(nb);
  Matrix grad_partial = Matrix::Zero(nb, k + 1);
  Matrix scaled;  // rows sqrt(s_i) * (phi_i, 1)
  if (with_hessian) scaled.resize(n, k + 1);

#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < nb; ++blk) {
    const auto r = block_range(blk, n);
    double loss = 0.0;
    for (Eigen::Index i = r.begin; i < r.begin + r.size; ++i) {
      const double z = phi.row(i).dot(w) + b;
      const bool positive = labels[static_cast<std::size_t>(i)] == 1;
      // Residual sigmoid(z) - y written so that (z, y) -> (-z, 1 - y) negates it exactly.
      const double residual = positive ? -sigmoid(-z) : sigmoid(z);
      loss += positive ? softplus(-z) : softplus(z);
      grad_partial.row(blk).head(k) += residual * phi.row(i);
      grad_partial(blk, k) += residual;
      if (with_hessian) {
        const double root = std::sqrt(sigmoid(z) * sigmoid(-z));
        scaled.row(i).head(k) = root * phi.row(i);
        scaled(i, k) = root;
      }
    }
    loss_partial[blk] = loss;
  }

  LogisticTerms out;
  out.loss = loss_partial.sum() * inv_n;
  out.grad = Vector::Zero(k + 1);
  for (Eigen::Index blk = 0; blk < nb; ++blk) out.grad += grad_partial.row(blk).transpose();
  out.grad *= inv_n;

  if (with_hessian) {
    out.hessian.resize(k + 1, k + 1);
    const Eigen::Index chunks = (k + 1 + kHessianColumnChunk - 1) / kHessianColumnChunk;
#pragma omp parallel for schedule(static)
    for (Eigen::Index c = 0; c < chunks; ++c) {
      const Eigen::Index c0 = c * kHessianColumnChunk;
      const Eigen::Index len = std::min(kHessianColumnChunk, k + 1 - c0);
      out.hessian.middleCols(c0, len).noalias() = scaled.transpose() * scaled.middleCols(c0, len);
    }
    out.hessian *= inv_n;
    const Matrix sym = 0.5 * (out.hessian + out.hessian.transpose());
    out.hessian = sym;
  }
  return out;
}

}  // namespace probekit::kernels
