// Serial versions of the kernels, written as plain loops.

#include <cmath>

#include "probekit/error.hpp"
#include "probekit/kernels.hpp"

namespace probekit::kernels::reference {

ColumnMoments column_moments(const Matrix& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  ColumnMoments out{Vector::Zero(d), Vector::Zero(d)};
  if (n == 0) return out;
  for (Eigen::Index j = 0; j < d; ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) sum += x(i, j);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) ss += (x(i, j) - mean) * (x(i, j) - mean);
    out.means[j] = mean;
    out.stds[j] = std::sqrt(ss / static_cast<double>(n));
  }
  return out;
}

Matrix standardize(const Matrix& x, const Vector& means, const Vector& scales,
                   std::span<const unsigned char> constant) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out(i, j) = constant[static_cast<std::size_t>(j)] ? 0.0 : (x(i, j) - means[j]) / scales[j];
    }
  }
  return out;
}

Matrix project(const Matrix& x, const Matrix& components) {
  Matrix out = Matrix::Zero(x.rows(), components.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < components.rows(); ++c) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) acc += x(i, j) * components(c, j);
      out(i, c) = acc;
    }
  }
  return out;
}

LogisticTerms logistic_terms(const Matrix& phi, std::span<const int> labels, const Vector& w,
                             double b, bool with_hessian) {
  if (static_cast<std::size_t>(phi.rows()) != labels.size() || phi.cols() != w.size()) {
    throw Error(ErrorKind::DimensionMismatch, "logistic_terms: inconsistent shapes");
  }
  const Eigen::Index n = phi.rows();
  const Eigen::Index k = phi.cols();
  LogisticTerms out;
  out.grad = Vector::Zero(k + 1);
  if (with_hessian) out.hessian = Matrix::Zero(k + 1, k + 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double z = b;
    for (Eigen::Index j = 0; j < k; ++j) z += phi(i, j) * w[j];
    const double y = labels[static_cast<std::size_t>(i)];
    const double p = 1.0 / (1.0 + std::exp(-z));
    loss += y == 1 ? std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    for (Eigen::Index j = 0; j < k; ++j) out.grad[j] += (p - y) * phi(i, j);
    out.grad[k] += p - y;
    if (with_hessian) {
      const double s = p * (1.0 - p);
      for (Eigen::Index a = 0; a <= k; ++a) {
        const double xa = a < k ? phi(i, a) : 1.0;
        for (Eigen::Index c = 0; c <= k; ++c) {
          const double xc = c < k ? phi(i, c) : 1.0;
          out.hessian(a, c) += s * xa * xc;
        }
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loss = loss * inv_n;
  out.grad *= inv_n;
  if (with_hessian) out.hessian *= inv_n;
  return out;
}

}  // namespace probekit::kernels::reference
