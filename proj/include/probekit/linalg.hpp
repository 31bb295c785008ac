#pragma once

#include <Eigen/Dense>

namespace probekit {

/// Row-major so that each embedding/feature vector is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace probekit
