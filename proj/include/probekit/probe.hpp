#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/linalg.hpp"

namespace probekit {

/// phi is n x k; labels are 0/1.
struct FeatureSet {
  Matrix phi;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t width() const noexcept { return static_cast<std::size_t>(phi.cols()); }
};

struct ProbeOptions {
  double lambda = 1e-4;
  double tol = 1e-8;
  int max_iter = 1000;

  bool operator==(const ProbeOptions&) const = default;
};

/// Logistic regression p = sigmoid(phi . w + b). For k = 1 the model is a
/// direction sign plus a threshold.
struct ProbeModel {
  Vector weights;
  double intercept = 0.0;
  double lambda = 0.0;
  bool converged = false;
  double final_grad_norm = 0.0;
  int iterations = 0;
  /// Training data held a single class; the model is intercept-only.
  bool single_class = false;

  bool operator==(const ProbeModel&) const = default;
};

/// Objective: mean logistic loss + (lambda / 2) * |w|^2; b is unpenalized.
struct LossGrad {
  double loss = 0.0;
  Vector grad;  // (dw..., db)
};

/// Damped Newton with Armijo backtracking; converged when |grad| <= tol.
/// `start` optionally gives the initial (w..., b).
ProbeModel fit_logreg(const FeatureSet& fs, double lambda = 1e-4, double tol = 1e-8,
                      int max_iter = 1000, const std::optional<Vector>& start = std::nullopt);
ProbeModel fit_logreg(const FeatureSet& fs, const ProbeOptions& opts);

/// Objective value and gradient at `m` using m.lambda.
LossGrad loss_and_grad(const ProbeModel& m, const FeatureSet& fs);

struct Prediction {
  std::vector<double> probabilities;
  std::vector<int> labels;  // 1 iff p > 0.5
};

Prediction predict(const ProbeModel& m, const Matrix& phi);

/// Exact fraction of equal entries. Throws LengthMismatch.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

std::string serialize_probe(const ProbeModel& m);
ProbeModel parse_probe(std::string_view text);

}  // namespace probekit
