#include "probekit/reduce.hpp"

#include <spdlog/spdlog.h>

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "probekit/digest.hpp"
#include "probekit/error.hpp"
#include "probekit/kernels.hpp"

namespace probekit {
namespace {

using nlohmann::json;

void require_rows(const Matrix& x, const char* what) {
  if (x.rows() < 2) {
    throw Error(ErrorKind::TooFewRows, std::string(what) + " needs at least 2 rows, got " +
                                           std::to_string(x.rows()));
  }
}

void require_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) throw Error(ErrorKind::NonFinite, std::string(what) + ": input is not finite");
}

std::string encode(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return encode_f64_base64(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Vector decode_vector(const json& j, std::size_t expected) {
  const auto values = decode_f64_base64(j.get<std::string>());
  if (values.size() != expected) throw Error(ErrorKind::ParseError, "reducer payload has the wrong length");
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string_view to_string(FitBasis basis) {
  return basis == FitBasis::Singles ? "singles" : "differences";
}

PcaModel PcaModel::truncated(std::size_t k) const {
  PcaModel out = *this;
  const auto keep = static_cast<Eigen::Index>(std::min(k, k_effective));
  out.components = components.topRows(keep);
  out.explained_variances = explained_variances.head(keep);
  out.k_requested = k;
  out.k_effective = static_cast<std::size_t>(keep);
  return out;
}

Reducer Reducer::truncated(std::size_t k) const {
  Reducer out = *this;
  out.pca = pca.truncated(k);
  return out;
}

Standardizer fit_standardizer(const Matrix& x) {
  require_rows(x, "fit_standardizer");
  require_finite(x, "fit_standardizer");
  auto moments = kernels::column_moments(x);
  Standardizer s;
  s.means = std::move(moments.means);
  s.stds = std::move(moments.stds);
  s.constant.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    s.constant[static_cast<std::size_t>(j)] = s.stds[j] < s.epsilon ? 1 : 0;
  }
  return s;
}

Matrix apply_standardizer(const Standardizer& s, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != s.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "standardizer width " + std::to_string(s.dim()) +
                                                  " does not match input width " +
                                                  std::to_string(x.cols()));
  }
  const Vector scales = s.stds.cwiseMax(s.epsilon);
  return kernels::standardize(x, s.means, scales, s.constant);
}

std::size_t canonicalize_signs(Matrix& components) {
  std::size_t flipped = 0;
  for (Eigen::Index r = 0; r < components.rows(); ++r) {
    Eigen::Index arg = 0;
    components.row(r).cwiseAbs().maxCoeff(&arg);
    if (components(r, arg) < 0.0) {
      components.row(r) *= -1.0;
      ++flipped;
    }
  }
  return flipped;
}

PcaModel fit_pca(const Matrix& xs, std::size_t k) {
  require_rows(xs, "fit_pca");
  require_finite(xs, "fit_pca");
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "fit_pca: k must be at least 1");

  const Eigen::Index n = xs.rows();
  const Eigen::Index d = xs.cols();
  const Vector means = kernels::column_moments(xs).means;
  Eigen::MatrixXd centered = (xs.rowwise() - means.transpose());

  PcaModel m;
  m.k_requested = k;
  m.total_variance = centered.squaredNorm() / static_cast<double>(n);

  // The factorization sees the data up to a global sign chosen from the data
  // itself, so X and -X yield bit-identical bases.
  for (Eigen::Index i = 0; i < centered.size(); ++i) {
    const double v = centered.data()[i];
    if (v != 0.0) {
      if (v < 0.0) centered = -centered;
      break;
    }
  }

  Vector singular;
  Eigen::MatrixXd right;
  if (n > d) {
    // Tall data: R from a Householder QR has the same singular values and
    // right singular vectors as X.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(centered);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeThinV);
    singular = svd.singularValues();
    right = svd.matrixV();
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    singular = svd.singularValues();
    right = svd.matrixV();
  }

  const double smax = singular.size() > 0 ? singular[0] : 0.0;
  const double tol = smax * static_cast<double>(std::max(n, d)) * std::numeric_limits<double>::epsilon();
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(singular.size()) && singular[static_cast<Eigen::Index>(rank)] > tol) {
    ++rank;
  }
  m.k_effective = std::min(k, rank);
  if (m.k_effective < k) {
    spdlog::warn("PCA: requested {} components but the data has rank {}; using {}", k, rank,
                 m.k_effective);
  }
  const auto keep = static_cast<Eigen::Index>(m.k_effective);
  m.components = right.leftCols(keep).transpose();
  canonicalize_signs(m.components);
  m.explained_variances = singular.head(keep).array().square() / static_cast<double>(n);
  return m;
}

std::string matrix_digest(const Matrix& x) {
  Sha256 h;
  h.update_u64(static_cast<std::uint64_t>(x.rows()));
  h.update_u64(static_cast<std::uint64_t>(x.cols()));
  h.update(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  return h.hex_digest();
}

Reducer fit_reducer(const Matrix& x, std::size_t k, FitBasis basis) {
  Reducer r;
  r.standardizer = fit_standardizer(x);
  r.pca = fit_pca(apply_standardizer(r.standardizer, x), k);
  r.fitted_on = basis;
  r.fit_digest = matrix_digest(x);
  return r;
}

Matrix project(const Reducer& r, const Matrix& x) {
  return kernels::project(apply_standardizer(r.standardizer, x), r.pca.components);
}

std::string serialize_reducer(const Reducer& r) {
  json j;
  j["format"] = "probekit.reducer/1";
  j["fitted_on"] = std::string(to_string(r.fitted_on));
  j["fit_digest"] = r.fit_digest;
  j["dim"] = r.dim();
  j["epsilon"] = r.standardizer.epsilon;
  j["means"] = encode(r.standardizer.means);
  j["stds"] = encode(r.standardizer.stds);
  std::string flags;
  for (auto c : r.standardizer.constant) flags.push_back(c ? '1' : '0');
  j["constant"] = flags;
  j["k_requested"] = r.pca.k_requested;
  j["k_effective"] = r.pca.k_effective;
  j["total_variance"] = r.pca.total_variance;
  j["explained_variances"] = encode(r.pca.explained_variances);
  j["components"] = encode_f64_base64(std::span<const double>(
      r.pca.components.data(), static_cast<std::size_t>(r.pca.components.size())));
  return j.dump();
}

Reducer parse_reducer(std::string_view text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "probekit.reducer/1") throw Error(ErrorKind::ParseError, "not a reducer artifact");
    Reducer r;
    const auto dim = j.at("dim").get<std::size_t>();
    const auto basis = j.at("fitted_on").get<std::string>();
    if (basis != "singles" && basis != "differences") throw Error(ErrorKind::ParseError, "bad fitted_on");
    r.fitted_on = basis == "singles" ? FitBasis::Singles : FitBasis::Differences;
    r.fit_digest = j.at("fit_digest").get<std::string>();
    r.standardizer.epsilon = j.at("epsilon").get<double>();
    r.standardizer.means = decode_vector(j.at("means"), dim);
    r.standardizer.stds = decode_vector(j.at("stds"), dim);
    const auto flags = j.at("constant").get<std::string>();
    if (flags.size() != dim) throw Error(ErrorKind::ParseError, "constant flags have the wrong length");
    for (char c : flags) r.standardizer.constant.push_back(c == '1' ? 1 : 0);
    r.pca.k_requested = j.at("k_requested").get<std::size_t>();
    r.pca.k_effective = j.at("k_effective").get<std::size_t>();
    r.pca.total_variance = j.at("total_variance").get<double>();
    r.pca.explained_variances = decode_vector(j.at("explained_variances"), r.pca.k_effective);
    const auto comps = decode_f64_base64(j.at("components").get<std::string>());
    if (comps.size() != r.pca.k_effective * dim) throw Error(ErrorKind::ParseError, "components have the wrong size");
    r.pca.components = Eigen::Map<const Matrix>(comps.data(), static_cast<Eigen::Index>(r.pca.k_effective),
                                                static_cast<Eigen::Index>(dim));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("reducer artifact: ") + e.what());
  }
}

}  // namespace probekit
