#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "probekit/probe.hpp"
#include "probekit/reduce.hpp"
#include "test_support.hpp"

namespace probekit {
namespace {

FeatureSet one_d(std::vector<double> x, std::vector<int> y) {
  FeatureSet fs;
  fs.phi = Eigen::Map<Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  fs.labels = std::move(y);
  return fs;
}

FeatureSet random_features(std::mt19937_64& rng, std::size_t n, std::size_t k, double signal) {
  FeatureSet fs;
  fs.phi = oracle::random_matrix(n, k, rng);
  const Vector w = oracle::random_matrix(k, 1, rng).col(0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < fs.phi.rows(); ++i) {
    const double p = 1.0 / (1.0 + std::exp(-signal * fs.phi.row(i).dot(w)));
    fs.labels.push_back(unif(rng) < p ? 1 : 0);
  }
  return fs;
}

TEST(FitLogreg, SymmetricSeparablePair) {
  const FeatureSet fs = one_d({-1.0, 1.0}, {0, 1});
  const ProbeModel m = fit_logreg(fs, 0.01);
  EXPECT_TRUE(m.converged);
  EXPECT_GT(m.weights(0), 0.0);
  EXPECT_LE(std::abs(m.intercept), 1e-6);
  EXPECT_EQ(accuracy(predict(m, fs.phi).labels, fs.labels), 1.0);
  Matrix plus(1, 1);
  plus(0, 0) = 1.0;
  EXPECT_EQ(predict(m, plus).labels[0], 1);
}

TEST(FitLogreg, MatchesExhaustiveGridOracleProperty) {
  testing::for_all(5, 91, [](std::mt19937_64& rng, int) {
    std::normal_distribution<double> normal;
    std::vector<double> x(6);
    std::vector<int> y(6);
    // Non-separable by construction: the extreme points carry the labels
    // opposite to their side, so the optimum is interior.
    for (int i = 0; i < 6; ++i) x[i] = normal(rng);
    std::vector<std::size_t> order(6);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    for (std::size_t r = 0; r < 6; ++r) y[order[r]] = r < 3 ? 0 : 1;
    y[order[0]] = 1;
    y[order[5]] = 0;
    const double lambda = 1e-4;
    const ProbeModel m = fit_logreg(one_d(x, y), lambda);
    ASSERT_TRUE(m.converged);
    const auto grid = oracle::refined_grid_search_1d(x, y, lambda, -10.0, 10.0, 1e-2, 1e-6);
    const double ours = oracle::logistic_objective_1d(x, y, lambda, m.weights(0), m.intercept);
    EXPECT_LE(std::abs(ours - grid.loss), 1e-6);
    EXPECT_LE(ours, grid.loss + 1e-12);
  });
}

TEST(LossAndGrad, ZeroModelIsLn2) {
  const FeatureSet fs = one_d({0.3, -2.0, 5.0, 1.0}, {1, 0, 1, 0});
  ProbeModel m;
  m.weights = Vector::Zero(1);
  const LossGrad lg = loss_and_grad(m, fs);
  EXPECT_NEAR(lg.loss, 0.6931471805599453, 1e-15);
}

TEST(LossAndGrad, PenaltyGradientTerm) {
  // With all features zero the data term contributes nothing to dw.
  const FeatureSet fs = one_d({0.0, 0.0}, {1, 0});
  ProbeModel m;
  m.weights = Vector::Constant(1, 2.0);
  m.lambda = 1.0;
  const LossGrad lg = loss_and_grad(m, fs);
  EXPECT_DOUBLE_EQ(lg.grad(0), 2.0);
  EXPECT_NEAR(lg.loss, std::log(2.0) + 2.0, 1e-15);
}

TEST(LossAndGrad, MatchesCentralDifferencesProperty) {
  testing::for_all(20, 101, [](std::mt19937_64& rng, int i) {
    const std::size_t k = 1 + static_cast<std::size_t>(i % 6);
    const FeatureSet fs = random_features(rng, 40, k, 1.0);
    ProbeModel m;
    m.weights = oracle::random_matrix(k, 1, rng).col(0);
    m.intercept = std::normal_distribution<double>(0.0, 1.0)(rng);
    m.lambda = 0.1;
    const LossGrad lg = loss_and_grad(m, fs);
    Vector theta(static_cast<Eigen::Index>(k) + 1);
    theta << m.weights, m.intercept;
    const auto objective = [&](const Vector& t) {
      ProbeModel p = m;
      p.weights = t.head(static_cast<Eigen::Index>(k));
      p.intercept = t(static_cast<Eigen::Index>(k));
      return loss_and_grad(p, fs).loss;
    };
    const Vector fd = oracle::central_difference(objective, theta, 1e-6);
    EXPECT_LE((lg.grad - fd).norm() / std::max(fd.norm(), 1e-8), 1e-5);
  });
}

TEST(LossAndGrad, WidthMismatch) {
  ProbeModel m;
  m.weights = Vector::Zero(2);
  EXPECT_PK_ERROR(loss_and_grad(m, one_d({1.0}, {1})), ErrorKind::DimensionMismatch);
}

TEST(FitLogreg, SingleClassGivesInterceptOnlyModel) {
  const FeatureSet fs = one_d({1.0, 2.0, -3.0}, {1, 1, 1});
  const ProbeModel m = fit_logreg(fs);
  EXPECT_TRUE(m.single_class);
  EXPECT_EQ(m.weights, Vector::Zero(1));
  for (double p : predict(m, fs.phi).probabilities) EXPECT_GT(p, 0.5);
}

TEST(FitLogreg, RejectsBadInput) {
  EXPECT_PK_ERROR(fit_logreg(one_d({1.0}, {1})), ErrorKind::TooFewRows);
  EXPECT_PK_ERROR(fit_logreg(one_d({1.0, NAN}, {1, 0})), ErrorKind::NonFinite);
  FeatureSet bad = one_d({1.0, 2.0}, {1});
  EXPECT_PK_ERROR(fit_logreg(bad), ErrorKind::LengthMismatch);
}

TEST(FitLogreg, NegatedFeaturesNegateWeightsProperty) {
  testing::for_all(10, 111, [](std::mt19937_64& rng, int) {
    FeatureSet fs = random_features(rng, 200, 4, 2.0);
    const ProbeModel a = fit_logreg(fs);
    const double acc_a = accuracy(predict(a, fs.phi).labels, fs.labels);
    fs.phi = -fs.phi;
    const ProbeModel b = fit_logreg(fs);
    EXPECT_LE((a.weights + b.weights).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(a.intercept, b.intercept, 1e-6);
    EXPECT_EQ(accuracy(predict(b, fs.phi).labels, fs.labels), acc_a);
  });
}

TEST(FitLogreg, RestartsAgreeProperty) {
  testing::for_all(10, 121, [](std::mt19937_64& rng, int) {
    const FeatureSet fs = random_features(rng, 150, 3, 1.5);
    const ProbeModel a = fit_logreg(fs);
    Vector start(4);
    start << oracle::random_matrix(4, 1, rng).col(0) * 3.0;
    const ProbeModel b = fit_logreg(fs, 1e-4, 1e-8, 1000, start);
    EXPECT_NEAR(loss_and_grad(a, fs).loss, loss_and_grad(b, fs).loss, 1e-8);
  });
}

TEST(FitLogreg, LossNonincreasingOverNestedPcaFeaturesProperty) {
  testing::for_all(10, 131, [](std::mt19937_64& rng, int) {
    const FeatureSet base = random_features(rng, 120, 10, 1.0);
    const Reducer r = fit_reducer(base.phi, 10, FitBasis::Differences);
    const Matrix p = project(r, base.phi);
    double previous = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 1; k <= p.cols(); ++k) {
      const FeatureSet fs{p.leftCols(k), base.labels};
      const double loss = loss_and_grad(fit_logreg(fs), fs).loss;
      EXPECT_LE(loss, previous + 1e-9) << k;
      previous = loss;
    }
  });
}

TEST(Predict, TieMapsToZeroAndMonotone) {
  ProbeModel m;
  m.weights = Vector::Constant(1, 2.0);
  m.intercept = -1.0;
  Matrix phi(5, 1);
  phi << -3, 0, 0.5, 1, 4;
  const Prediction p = predict(m, phi);
  EXPECT_EQ(p.probabilities[2], 0.5);
  EXPECT_EQ(p.labels[2], 0);
  EXPECT_TRUE(std::is_sorted(p.probabilities.begin(), p.probabilities.end()));
  Matrix wide(1, 2);
  EXPECT_PK_ERROR(predict(m, wide), ErrorKind::DimensionMismatch);
}

TEST(Accuracy, ExactFractions) {
  EXPECT_EQ(accuracy(std::vector<int>{1, 0}, std::vector<int>{1, 1}), 0.5);
  EXPECT_EQ(accuracy(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 1}), 1.0);
  EXPECT_PK_ERROR(accuracy(std::vector<int>{1}, std::vector<int>{1, 0}), ErrorKind::LengthMismatch);
  EXPECT_PK_ERROR(accuracy(std::vector<int>{}, std::vector<int>{}), ErrorKind::EmptyDataset);
}

TEST(Accuracy, RandomVersusRandom) {
  std::mt19937_64 rng(141);
  std::vector<int> a(10000);
  std::vector<int> b(10000);
  for (auto& v : a) v = static_cast<int>(rng() >> 63);
  for (auto& v : b) v = static_cast<int>(rng() >> 63);
  EXPECT_NEAR(accuracy(a, b), 0.5, 0.02);
}

TEST(ProbeSerialization, RoundTripsBitExactly) {
  std::mt19937_64 rng(151);
  const FeatureSet fs = random_features(rng, 80, 5, 1.0);
  const ProbeModel m = fit_logreg(fs);
  const std::string text = serialize_probe(m);
  EXPECT_EQ(parse_probe(text), m);
  EXPECT_EQ(serialize_probe(parse_probe(text)), text);
}

}  // namespace
}  // namespace probekit
