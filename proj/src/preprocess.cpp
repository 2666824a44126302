#include "sgm/preprocess.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "sgm/error.hpp"

namespace sgm {

namespace {

void check_dim(const PreprocessTransform& t, Eigen::Index d) {
  if (t.mu.size() != d || t.d_scale.size() != d) throw ShapeError("transform dimension mismatch");
}

}  // namespace

RowMat PreprocessTransform::apply(const RowMat& x) const {
  check_dim(*this, x.cols());
  const Eigen::RowVectorXd scale = (kappa / d_scale.array()).matrix().transpose();
  return (x.rowwise() - mu.transpose()).array().rowwise() * scale.array();
}

RowMat PreprocessTransform::inverse(const RowMat& x) const {
  check_dim(*this, x.cols());
  const Eigen::RowVectorXd scale = (d_scale.array() / kappa).matrix().transpose();
  RowMat y = x.array().rowwise() * scale.array();
  return y.rowwise() + mu.transpose();
}

GaussianTarget PreprocessTransform::apply(const GaussianTarget& g) const {
  check_dim(*this, g.dim());
  const Vec s = kappa / d_scale.array();
  return GaussianTarget(s.cwiseProduct(g.mu() - mu), s.asDiagonal() * g.Sigma() * s.asDiagonal());
}

GaussianTarget PreprocessTransform::inverse(const GaussianTarget& g) const {
  check_dim(*this, g.dim());
  const Vec s = d_scale.array() / kappa;
  return GaussianTarget(s.cwiseProduct(g.mu()) + mu, s.asDiagonal() * g.Sigma() * s.asDiagonal());
}

double PreprocessTransform::transfer_bound(double w2_scaled) const {
  if (!(w2_scaled >= 0.0)) throw DomainError("scaled W2 bound must be nonnegative");
  return d_scale.maxCoeff() / kappa * w2_scaled;
}

std::string PreprocessTransform::to_json() const {
  nlohmann::ordered_json j;
  j["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
  j["d_scale"] = std::vector<double>(d_scale.data(), d_scale.data() + d_scale.size());
  j["kappa"] = kappa;
  return j.dump(2) + "\n";
}

PreprocessTransform PreprocessTransform::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto mu = j.at("mu").get<std::vector<double>>();
    const auto ds = j.at("d_scale").get<std::vector<double>>();
    if (mu.size() != ds.size() || mu.empty()) throw ShapeError("transform arrays disagree in length");
    PreprocessTransform t;
    t.mu = Eigen::Map<const Vec>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    t.d_scale = Eigen::Map<const Vec>(ds.data(), static_cast<Eigen::Index>(ds.size()));
    t.kappa = j.at("kappa").get<double>();
    if (!(t.kappa > 0.0) || (t.d_scale.array() <= 0.0).any())
      throw DomainError("transform scales must be positive");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed transform JSON: ") + e.what());
  }
}

std::pair<PreprocessTransform, RowMat> fit_transform(const RowMat& x) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (n <= d) throw RankError("preprocessing needs more samples than dimensions");
  PreprocessTransform t;
  t.mu = x.colwise().mean().transpose();
  const RowMat centered = x.rowwise() - t.mu.transpose();
  Mat cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  t.d_scale = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!(t.d_scale(j) > 1e-12 * std::max(1.0, std::abs(t.mu(j))))) {
      std::ostringstream os;
      os << "coordinate " << j << " has zero variance";
      throw DegenerateCoordinateError(os.str());
    }
  }
  const Vec inv = t.d_scale.cwiseInverse();
  Mat corr = inv.asDiagonal() * cov * inv.asDiagonal();
  corr = 0.5 * (corr + corr.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(corr, Eigen::EigenvaluesOnly);
  t.kappa = 1.0 / std::sqrt(2.0 * es.eigenvalues()(d - 1));
  RowMat scaled = t.apply(x);
  return {std::move(t), std::move(scaled)};
}

}  // namespace sgm
