#pragma once

// Independent reference computations used only by the tests. None of these
// share code with the library's fitting paths.

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "probekit/linalg.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/reduce.hpp"
#include "probekit/synthetic.hpp"

namespace probekit::oracle {

/// Eigenvalues (descending) and unit eigenvectors (rows) of a symmetric
/// matrix by cyclic Jacobi rotations.
struct SymEig {
  Vector values;
  Matrix vectors;
};
SymEig jacobi_eig(const Matrix& a, double tol = 1e-15, int max_sweeps = 100);

/// PCA through the explicit covariance matrix: center, form X^T X / n,
/// Jacobi-diagonalize, keep the top k, sign rows so the largest-magnitude
/// coordinate is positive. Throws TooFewRows for n < 2. dim <= 64.
PcaModel pca_oracle_eig(const Matrix& xs, std::size_t k);

/// max over columns of |U^T U - Q^T Q|-style projector distance:
/// || A^T A - B^T B ||_max for orthonormal-row bases spanning two subspaces.
double subspace_distance(const Matrix& a, const Matrix& b);

/// Penalized mean logistic loss for 1-D data, written directly from the
/// definition.
double logistic_objective_1d(std::span<const double> x, std::span<const int> y, double lambda, double w,
                             double b);

struct GridMin {
  double w = 0.0;
  double b = 0.0;
  double loss = 0.0;
};
/// Exhaustive grid over [lo, hi]^2 at step `step`.
GridMin grid_search_1d(std::span<const double> x, std::span<const int> y, double lambda, double lo,
                       double hi, double step);
/// Exhaustive coarse grid followed by exhaustive finer grids around the best
/// cell; reaches `final_step` resolution over the whole box for a convex
/// objective.
GridMin refined_grid_search_1d(std::span<const double> x, std::span<const int> y, double lambda, double lo,
                               double hi, double coarse_step, double final_step);

/// Central differences of `f` at `theta` with step h.
Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& theta, double h);

/// Accuracy of the planted-direction sign rule sign(u . (H_first - H_second))
/// on a dataset embedded by the synthetic provider.
double sign_oracle_accuracy(const SyntheticConfig& cfg, const PromptTemplate& tpl, const Dataset& d);

/// Gaussian random matrix with a fixed generator.
Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0);

}  // namespace probekit::oracle
