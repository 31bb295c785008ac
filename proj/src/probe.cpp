#include "probekit/probe.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "probekit/digest.hpp"
#include "probekit/error.hpp"
#include "probekit/kernels.hpp"

namespace probekit {
namespace {

using nlohmann::json;

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-10;

void validate(const FeatureSet& fs) {
  if (static_cast<std::size_t>(fs.phi.rows()) != fs.labels.size()) {
    throw Error(ErrorKind::LengthMismatch, "feature rows and label count differ");
  }
  if (fs.labels.size() < 2) throw Error(ErrorKind::TooFewRows, "fit_logreg needs at least 2 rows");
  for (int y : fs.labels) {
    if (y != 0 && y != 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
  }
  if (!fs.phi.allFinite()) throw Error(ErrorKind::NonFinite, "features contain non-finite values");
}

struct Objective {
  double value;
  Vector grad;
  Matrix hessian;
};

Objective evaluate(const FeatureSet& fs, const Vector& theta, double lambda, bool with_hessian) {
  const Eigen::Index k = fs.phi.cols();
  const Vector w = theta.head(k);
  auto t = kernels::logistic_terms(fs.phi, fs.labels, w, theta[k], with_hessian);
  Objective o;
  o.value = t.loss + 0.5 * lambda * w.squaredNorm();
  o.grad = std::move(t.grad);
  o.grad.head(k) += lambda * w;
  if (with_hessian) {
    o.hessian = std::move(t.hessian);
    o.hessian.diagonal().head(k).array() += lambda;
  }
  return o;
}

}  // namespace

ProbeModel fit_logreg(const FeatureSet& fs, double lambda, double tol, int max_iter,
                      const std::optional<Vector>& start) {
  validate(fs);
  if (!(lambda >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda must be nonnegative");
  const Eigen::Index k = fs.phi.cols();

  ProbeModel m;
  m.lambda = lambda;
  const auto positives = std::count(fs.labels.begin(), fs.labels.end(), 1);
  const auto n = static_cast<std::ptrdiff_t>(fs.labels.size());
  if (positives == 0 || positives == n) {
    spdlog::warn("probe training data has a single class; fitting an intercept-only model");
    m.weights = Vector::Zero(k);
    m.intercept = std::log((static_cast<double>(positives) + 0.5) /
                           (static_cast<double>(n - positives) + 0.5));
    m.single_class = true;
    m.converged = true;
    return m;
  }

  Vector theta = Vector::Zero(k + 1);
  if (start) {
    if (start->size() != k + 1) throw Error(ErrorKind::DimensionMismatch, "start vector has the wrong size");
    theta = *start;
  }

  Objective obj = evaluate(fs, theta, lambda, true);
  double gnorm = obj.grad.norm();
  int it = 0;
  for (; it < max_iter && gnorm > tol; ++it) {
    Vector step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(obj.hessian);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(-obj.grad);
    if (step.size() == 0 || !step.allFinite() || step.dot(obj.grad) >= 0.0) step = -obj.grad;

    const double slope = step.dot(obj.grad);
    double t = 1.0;
    bool accepted = false;
    while (t >= kMinStep) {
      const Objective trial = evaluate(fs, theta + t * step, lambda, false);
      if (trial.value <= obj.value + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // At the resolution of the objective; take the full step only if it
      // still shrinks the gradient.
      const Objective trial = evaluate(fs, theta + step, lambda, false);
      if (trial.grad.norm() >= gnorm) break;
      t = 1.0;
    }
    theta += t * step;
    obj = evaluate(fs, theta, lambda, true);
    gnorm = obj.grad.norm();
  }

  m.weights = theta.head(k);
  m.intercept = theta[k];
  m.iterations = it;
  m.final_grad_norm = gnorm;
  m.converged = gnorm <= tol;
  if (!m.converged) {
    spdlog::warn("logistic probe stopped after {} iterations with gradient norm {:.3e}", it, gnorm);
  }
  if (!m.weights.allFinite() || !std::isfinite(m.intercept)) {
    throw Error(ErrorKind::NonFinite, "probe optimizer produced non-finite parameters");
  }
  return m;
}

ProbeModel fit_logreg(const FeatureSet& fs, const ProbeOptions& opts) {
  return fit_logreg(fs, opts.lambda, opts.tol, opts.max_iter);
}

LossGrad loss_and_grad(const ProbeModel& m, const FeatureSet& fs) {
  if (m.weights.size() != fs.phi.cols() ||
      static_cast<std::size_t>(fs.phi.rows()) != fs.labels.size()) {
    throw Error(ErrorKind::DimensionMismatch, "probe width does not match features");
  }
  Vector theta(m.weights.size() + 1);
  theta << m.weights, m.intercept;
  auto o = evaluate(fs, theta, m.lambda, false);
  return LossGrad{o.value, std::move(o.grad)};
}

Prediction predict(const ProbeModel& m, const Matrix& phi) {
  if (phi.cols() != m.weights.size()) {
    throw Error(ErrorKind::DimensionMismatch, "probe expects width " + std::to_string(m.weights.size()) +
                                                  ", got " + std::to_string(phi.cols()));
  }
  Prediction p;
  const Vector z = (phi * m.weights).array() + m.intercept;
  p.probabilities.resize(static_cast<std::size_t>(z.size()));
  p.labels.resize(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double prob = kernels::sigmoid(z[i]);
    p.probabilities[static_cast<std::size_t>(i)] = prob;
    p.labels[static_cast<std::size_t>(i)] = prob > 0.5 ? 1 : 0;
  }
  return p;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::LengthMismatch, "accuracy: " + std::to_string(predicted.size()) +
                                               " predictions for " + std::to_string(truth.size()) +
                                               " labels");
  }
  if (truth.empty()) throw Error(ErrorKind::EmptyDataset, "accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

std::string serialize_probe(const ProbeModel& m) {
  json j;
  j["format"] = "probekit.probe/1";
  j["weights"] = encode_f64_base64(
      std::span<const double>(m.weights.data(), static_cast<std::size_t>(m.weights.size())));
  j["k"] = m.weights.size();
  j["intercept"] = m.intercept;
  j["lambda"] = m.lambda;
  j["converged"] = m.converged;
  j["final_grad_norm"] = m.final_grad_norm;
  j["iterations"] = m.iterations;
  j["single_class"] = m.single_class;
  return j.dump();
}

ProbeModel parse_probe(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "probekit.probe/1") throw Error(ErrorKind::ParseError, "not a probe artifact");
    ProbeModel m;
    const auto w = decode_f64_base64(j.at("weights").get<std::string>());
    if (w.size() != j.at("k").get<std::size_t>()) throw Error(ErrorKind::ParseError, "probe width mismatch");
    m.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.intercept = j.at("intercept").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.final_grad_norm = j.at("final_grad_norm").get<double>();
    m.iterations = j.at("iterations").get<int>();
    m.single_class = j.at("single_class").get<bool>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("probe artifact: ") + e.what());
  }
}

}  // namespace probekit
