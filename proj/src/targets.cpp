#include "sgm/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sgm/error.hpp"
#include "sgm/parallel.hpp"
#include "sgm/rng.hpp"

namespace sgm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Rows are generated in fixed blocks so the output does not depend on the
// worker count.
constexpr std::size_t kRowBlock = 256;

template <typename RowFn>
RowMat fill_rows(std::size_t n, int d, RowFn&& row_fn) {
  RowMat out(static_cast<Eigen::Index>(n), d);
  const std::size_t blocks = (n + kRowBlock - 1) / kRowBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(n, (b + 1) * kRowBlock);
    Vec z(d);
    for (std::size_t i = b * kRowBlock; i < end; ++i) row_fn(i, out.row(static_cast<Eigen::Index>(i)), z);
  });
  return out;
}

void require_dim(const Vec& x, int d) {
  if (x.size() != d) {
    std::ostringstream os;
    os << "expected a vector of dimension " << d << ", got " << x.size();
    throw ShapeError(os.str());
  }
}

}  // namespace

// ---------------------------------------------------------------- Gaussian

GaussianTarget::GaussianTarget(Vec mu, Mat Sigma) : mu_(std::move(mu)), Sigma_(std::move(Sigma)) {
  const auto d = mu_.size();
  if (d < 1) throw ShapeError("Gaussian target needs dimension >= 1");
  if (Sigma_.rows() != d || Sigma_.cols() != d) throw ShapeError("covariance shape does not match mean");
  if (!Sigma_.allFinite() || !mu_.allFinite()) throw DomainError("Gaussian target has non-finite entries");
  const double asym = (Sigma_ - Sigma_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, Sigma_.cwiseAbs().maxCoeff()))
    throw DomainError("covariance is not symmetric");
  Sigma_ = 0.5 * (Sigma_ + Sigma_.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(Sigma_);
  if (es.info() != Eigen::Success) throw SingularCovarianceError("eigendecomposition failed");
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
  if (evals_(0) < kEigenFloor) {
    std::ostringstream os;
    os.precision(17);
    os << "covariance eigenvalue " << evals_(0) << " below floor " << kEigenFloor;
    throw SingularCovarianceError(os.str());
  }
  precision_ = evecs_ * evals_.cwiseInverse().asDiagonal() * evecs_.transpose();
  factor_ = evecs_ * evals_.cwiseSqrt().asDiagonal();
}

GaussianTarget GaussianTarget::iso(int d) {
  return GaussianTarget(Vec::Ones(d), 0.5 * Mat::Identity(d, d));
}

GaussianTarget GaussianTarget::heterosc(int d) {
  Vec diag(d);
  for (int j = 0; j < d; ++j) diag(j) = j < 5 ? 1.0 : 0.01;
  return GaussianTarget(Vec::Ones(d), diag.asDiagonal());
}

GaussianTarget GaussianTarget::corr(int d) {
  Mat S(d, d);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) S(j, k) = 1.0 / std::sqrt(1.0 + std::abs(j - k));
  return GaussianTarget(Vec::Ones(d), S);
}

GaussianTarget GaussianTarget::stationary(int d, double sigma2) {
  return GaussianTarget(Vec::Zero(d), sigma2 * Mat::Identity(d, d));
}

RowMat GaussianTarget::sample(std::size_t n, std::uint64_t seed) const {
  return fill_rows(n, dim(), [&](std::size_t i, auto row, Vec& z) {
    rng::Stream s(rng::derive(seed, i));
    s.fill_normal(z);
    row = (mu_ + factor_ * z).transpose();
  });
}

double GaussianTarget::log_density(const Vec& x) const {
  require_dim(x, dim());
  const Vec r = x - mu_;
  return -0.5 * (dim() * kLog2Pi + log_det() + r.dot(precision_ * r));
}

// ------------------------------------------------------------------ Funnel

FunnelTarget::FunnelTarget(int d, double a, double b) : d_(d), a_(a), b_(b) {
  if (d < 2) throw DomainError("funnel target needs d >= 2");
  if (!(a > 0.0)) throw DomainError("funnel scale a must be positive");
  if (!std::isfinite(b)) throw DomainError("funnel parameter b must be finite");
}

RowMat FunnelTarget::sample(std::size_t n, std::uint64_t seed) const {
  return fill_rows(n, d_, [&](std::size_t i, auto row, Vec& z) {
    rng::Stream s(rng::derive(seed, i));
    s.fill_normal(z);
    const double x1 = a_ * z(0);
    const double scale = std::exp(b_ * x1);
    row(0) = x1;
    for (int j = 1; j < d_; ++j) row(j) = scale * z(j);
  });
}

double FunnelTarget::log_density(const Vec& x) const {
  require_dim(x, d_);
  const double x1 = x(0);
  double lp = -0.5 * (kLog2Pi + 2.0 * std::log(a_) + x1 * x1 / (a_ * a_));
  const double log_var = 2.0 * b_ * x1;
  const double inv_var = std::exp(-log_var);
  for (int j = 1; j < d_; ++j) lp += -0.5 * (kLog2Pi + log_var + x(j) * x(j) * inv_var);
  return lp;
}

// --------------------------------------------------------------------- GMM

GmmTarget::GmmTarget(Vec weights, Mat means, Vec diag)
    : weights_(std::move(weights)), means_(std::move(means)), diag_(std::move(diag)) {
  if (weights_.size() < 1 || means_.rows() != weights_.size() || means_.cols() != diag_.size())
    throw ShapeError("mixture weights, means and covariance disagree in shape");
  if ((weights_.array() < 0.0).any()) throw DomainError("mixture weights must be nonnegative");
  if (std::abs(weights_.sum() - 1.0) > 1e-12) throw DomainError("mixture weights must sum to 1");
  if ((diag_.array() <= 0.0).any()) throw DomainError("mixture covariance must be positive");
  cumulative_.resize(weights_.size());
  double acc = 0.0;
  for (Eigen::Index k = 0; k < weights_.size(); ++k) cumulative_(k) = (acc += weights_(k));
}

GmmTarget GmmTarget::gmm25(int d) {
  if (d < 2) throw DomainError("gmm25 target needs d >= 2");
  Mat means = Mat::Zero(25, d);
  int k = 0;
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j, ++k) {
      means(k, 0) = i;
      means(k, 1) = j;
    }
  Vec diag = Vec::Constant(d, 0.1);
  diag(0) = diag(1) = 0.01;
  return GmmTarget(Vec::Constant(25, 1.0 / 25.0), std::move(means), std::move(diag));
}

RowMat GmmTarget::sample(std::size_t n, std::uint64_t seed) const {
  const Vec sd = diag_.cwiseSqrt();
  const Eigen::Index K = weights_.size();
  return fill_rows(n, dim(), [&](std::size_t i, auto row, Vec& z) {
    rng::Stream s(rng::derive(seed, i));
    const double u = s.uniform() * cumulative_(K - 1);
    Eigen::Index k = 0;
    while (k < K - 1 && u >= cumulative_(k)) ++k;
    s.fill_normal(z);
    row = (means_.row(k).transpose() + sd.cwiseProduct(z)).transpose();
  });
}

double GmmTarget::log_density(const Vec& x) const {
  require_dim(x, dim());
  const double base = -0.5 * (dim() * kLog2Pi + diag_.array().log().sum());
  double best = -std::numeric_limits<double>::infinity();
  Vec terms(weights_.size());
  for (Eigen::Index k = 0; k < weights_.size(); ++k) {
    if (weights_(k) == 0.0) {
      terms(k) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const Vec r = x - means_.row(k).transpose();
    terms(k) = std::log(weights_(k)) + base - 0.5 * (r.array().square() / diag_.array()).sum();
    best = std::max(best, terms(k));
  }
  if (!std::isfinite(best)) return best;
  return best + std::log((terms.array() - best).exp().sum());
}

// ----------------------------------------------------------------- variant

int target_dim(const Target& target) {
  return std::visit([](const auto& t) { return t.dim(); }, target);
}

std::string target_name(const Target& target) {
  switch (target.index()) {
    case 0: return "gaussian";
    case 1: return "funnel";
    default: return "gmm";
  }
}

RowMat sample(const Target& target, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw DomainError("sample size must be at least 1");
  return std::visit([&](const auto& t) { return t.sample(n, seed); }, target);
}

double log_density(const Target& target, const Vec& x) {
  return std::visit([&](const auto& t) { return t.log_density(x); }, target);
}

const GaussianTarget& require_gaussian(const Target& target, const std::string& op) {
  if (const auto* g = std::get_if<GaussianTarget>(&target)) return *g;
  throw UnsupportedOperation(op + " requires a Gaussian target, got " + target_name(target));
}

// ------------------------------------------------------------------ scores

void GaussianScore::modified_rows(const RowMat& x, RowMat& out) const {
  out.noalias() = -(x.rowwise() - center.transpose()) * precision;
  out += x / sigma2;
}

GaussianScore gaussian_score_at(const GaussianTarget& target, const Schedule& sched, double t) {
  const auto fs = m_sigma(sched, t);
  const Vec var = (fs.m * fs.m) * target.eigenvalues().array() + fs.sig2;
  const Mat& V = target.eigenvectors();
  return {V * var.cwiseInverse().asDiagonal() * V.transpose(), fs.m * target.mu(), sched.sigma2()};
}

Vec gaussian_score(const GaussianTarget& target, const Schedule& sched, double t, const Vec& x) {
  require_dim(x, target.dim());
  return gaussian_score_at(target, sched, t).raw(x);
}

Vec gaussian_modified_score(const GaussianTarget& target, const Schedule& sched, double t,
                            const Vec& x) {
  require_dim(x, target.dim());
  return gaussian_score_at(target, sched, t).modified(x);
}

double gaussian_marginal_log_density(const GaussianTarget& target, const Schedule& sched,
                                     double t, const Vec& x) {
  require_dim(x, target.dim());
  const auto fs = m_sigma(sched, t);
  const Vec var = (fs.m * fs.m) * target.eigenvalues().array() + fs.sig2;
  const Vec r = target.eigenvectors().transpose() * (x - fs.m * target.mu());
  return -0.5 * (target.dim() * kLog2Pi + var.array().log().sum() +
                 (r.array().square() / var.array()).sum());
}

// ------------------------------------------------------- bound constants

Contraction contraction_constants(const GaussianTarget& target, const Schedule& sched, double t) {
  const auto fs = m_sigma(sched, t);
  const double m2 = fs.m * fs.m;
  const double inv_s2 = 1.0 / sched.sigma2();
  const double C = 1.0 / (m2 * target.lambda_max() + fs.sig2) - inv_s2;
  const double noise_part = fs.sig2 > 0.0 ? 1.0 / fs.sig2 : std::numeric_limits<double>::infinity();
  const double data_part = 1.0 / (target.lambda_min() * m2);
  const double L = std::min(noise_part, data_part) + inv_s2;
  if (!std::isfinite(L)) throw SingularCovarianceError("Lipschitz constant is infinite");
  return {C, L};
}

Contraction propagate_contraction(double c_star, double l_star, const Schedule& sched, double t) {
  if (!(c_star > 0.0) || !(l_star > 0.0)) throw DomainError("C* and L* must be positive");
  const auto fs = m_sigma(sched, t);
  const double m2 = fs.m * fs.m;
  const double inv_s2 = 1.0 / sched.sigma2();
  const double C = 1.0 / (m2 / c_star + fs.sig2) - inv_s2;
  const double noise_part = fs.sig2 > 0.0 ? 1.0 / fs.sig2 : std::numeric_limits<double>::infinity();
  const double L = std::min(noise_part, l_star / m2) + inv_s2;
  return {C, L};
}

double score_time_lipschitz_M(const GaussianTarget& target, const Schedule& sched,
                              const TimeGrid& grid) {
  const double s2 = sched.sigma2();
  const double mu_norm = target.mu().norm();
  const Vec& lam = target.eigenvalues();
  double M = 0.0;
  double m1 = m_sigma(sched, grid.t(0)).m;
  for (std::size_t k = 0; k < grid.N(); ++k) {
    const double m2 = m_sigma(sched, grid.t(k + 1)).m;
    const double beta2 = sched.beta(grid.t(k + 1));
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double g = lam(i) - s2;
      const double den = std::abs((s2 + m1 * m1 * g) * (s2 + m2 * m2 * g));
      const double k1 = m1 * m1 * beta2 / s2 * std::abs(g) / den;
      const double k2 = m1 * beta2 / (2.0 * s2) * std::abs(m1 * m2 * g - s2) / den;
      M = std::max({M, k1, mu_norm * k2});
    }
    m1 = m2;
  }
  return M;
}

Mat symmetric_sqrt(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double gaussian_kl(const GaussianTarget& p, const GaussianTarget& q) {
  if (p.dim() != q.dim()) throw ShapeError("divergence between targets of different dimension");
  const Vec dmu = q.mu() - p.mu();
  const double trace = (q.precision() * p.Sigma()).trace();
  const double quad = dmu.dot(q.precision() * dmu);
  return 0.5 * (q.log_det() - p.log_det() - p.dim() + trace + quad);
}

double gaussian_w2(const GaussianTarget& p, const GaussianTarget& q) {
  if (p.dim() != q.dim()) throw ShapeError("divergence between targets of different dimension");
  const Mat root_q = symmetric_sqrt(q.Sigma());
  const Mat cross = symmetric_sqrt(root_q * p.Sigma() * root_q);
  const double w2sq = (q.mu() - p.mu()).squaredNorm() + p.Sigma().trace() + q.Sigma().trace() -
                      2.0 * cross.trace();
  return std::sqrt(std::max(0.0, w2sq));
}

Divergences closed_form_divergences(const GaussianTarget& p, const GaussianTarget& q) {
  return {gaussian_kl(p, q), gaussian_w2(p, q)};
}

double fisher_to_stationary(const GaussianTarget& target, double sigma2) {
  const double d = target.dim();
  const double second = target.Sigma().trace() + target.mu().squaredNorm();
  const double value = second / (sigma2 * sigma2) - 2.0 * d / sigma2 +
                       target.eigenvalues().cwiseInverse().sum();
  return std::max(0.0, value);
}

BoundConstants gaussian_bound_constants(const GaussianTarget& target, const Schedule& sched,
                                        const TimeGrid& grid) {
  BoundConstants c;
  c.C_of_t = [target, sched](double t) { return contraction_constants(target, sched, t).C; };
  c.L_of_t = [target, sched](double t) { return contraction_constants(target, sched, t).L; };
  c.M = score_time_lipschitz_M(target, sched, grid);
  c.B = std::sqrt(target.Sigma().trace() + target.mu().squaredNorm() +
                  sched.sigma2() * target.dim());
  c.fisher = fisher_to_stationary(target, sched.sigma2());
  const auto pi_inf = GaussianTarget::stationary(target.dim(), sched.sigma2());
  c.kl_to_stationary = gaussian_kl(target, pi_inf);
  c.w2_to_stationary = gaussian_w2(target, pi_inf);
  return c;
}

}  // namespace sgm
