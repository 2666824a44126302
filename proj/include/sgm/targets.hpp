#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "sgm/grid.hpp"
#include "sgm/schedule.hpp"
#include "sgm/types.hpp"

namespace sgm {

// N(mu, Sigma) with a cached spectral decomposition (ascending eigenvalues).
class GaussianTarget {
 public:
  static constexpr double kEigenFloor = 1e-12;

  GaussianTarget(Vec mu, Mat Sigma);

  // N(1_d, 0.5 I)
  static GaussianTarget iso(int d);
  // N(1_d, diag(1,...,1 (first 5), 0.01, ...))
  static GaussianTarget heterosc(int d);
  // N(1_d, S) with S_jk = 1/sqrt(1 + |j-k|); unit diagonal, lambda_max ~ 15.5 at d = 50
  static GaussianTarget corr(int d);
  // N(0, sigma2 I), the stationary law of the forward process.
  static GaussianTarget stationary(int d, double sigma2);

  int dim() const noexcept { return static_cast<int>(mu_.size()); }
  const Vec& mu() const noexcept { return mu_; }
  const Mat& Sigma() const noexcept { return Sigma_; }
  const Vec& eigenvalues() const noexcept { return evals_; }
  const Mat& eigenvectors() const noexcept { return evecs_; }
  double lambda_min() const noexcept { return evals_(0); }
  double lambda_max() const noexcept { return evals_(evals_.size() - 1); }
  double log_det() const noexcept { return evals_.array().log().sum(); }
  const Mat& precision() const noexcept { return precision_; }
  // V diag(sqrt lambda) so that mu + factor * z ~ N(mu, Sigma).
  const Mat& factor() const noexcept { return factor_; }

  RowMat sample(std::size_t n, std::uint64_t seed) const;
  double log_density(const Vec& x) const;

 private:
  Vec mu_;
  Mat Sigma_;
  Vec evals_;
  Mat evecs_;
  Mat precision_;
  Mat factor_;
};

// x_1 ~ N(0, a^2), x_j | x_1 ~ N(0, exp(2 b x_1)) for j >= 2.
class FunnelTarget {
 public:
  FunnelTarget(int d, double a = 1.0, double b = 0.5);

  int dim() const noexcept { return d_; }
  double a() const noexcept { return a_; }
  double b() const noexcept { return b_; }

  RowMat sample(std::size_t n, std::uint64_t seed) const;
  double log_density(const Vec& x) const;

 private:
  int d_;
  double a_;
  double b_;
};

// Mixture of Gaussians sharing one diagonal covariance. means is K x d.
class GmmTarget {
 public:
  GmmTarget(Vec weights, Mat means, Vec diag);

  // 25 equally weighted modes at (j, k, 0, ..., 0), j, k in {-2..2},
  // covariance diag(0.01, 0.01, 0.1, ..., 0.1).
  static GmmTarget gmm25(int d);

  int dim() const noexcept { return static_cast<int>(diag_.size()); }
  const Vec& weights() const noexcept { return weights_; }
  const Mat& means() const noexcept { return means_; }
  const Vec& diag() const noexcept { return diag_; }

  RowMat sample(std::size_t n, std::uint64_t seed) const;
  double log_density(const Vec& x) const;

 private:
  Vec weights_;
  Vec cumulative_;
  Mat means_;
  Vec diag_;
};

using Target = std::variant<GaussianTarget, FunnelTarget, GmmTarget>;

int target_dim(const Target& target);
std::string target_name(const Target& target);
RowMat sample(const Target& target, std::size_t n, std::uint64_t seed);
double log_density(const Target& target, const Vec& x);
// Throws UnsupportedOperation naming `op` when the target is not Gaussian.
const GaussianTarget& require_gaussian(const Target& target, const std::string& op);

// The exact score of the forward marginal N(m mu, m^2 Sigma + sig2 I) at a
// fixed time, as an affine map x -> -P (x - c).
struct GaussianScore {
  Mat precision;
  Vec center;
  double sigma2;

  Vec raw(const Vec& x) const { return -precision * (x - center); }
  Vec modified(const Vec& x) const { return raw(x) + x / sigma2; }
  // Row-wise modified score of a sample block.
  void modified_rows(const RowMat& x, RowMat& out) const;
};

GaussianScore gaussian_score_at(const GaussianTarget& target, const Schedule& sched, double t);
Vec gaussian_score(const GaussianTarget& target, const Schedule& sched, double t, const Vec& x);
Vec gaussian_modified_score(const GaussianTarget& target, const Schedule& sched, double t,
                            const Vec& x);
// Log-density of the forward marginal at time t.
double gaussian_marginal_log_density(const GaussianTarget& target, const Schedule& sched,
                                     double t, const Vec& x);

struct Contraction {
  double C;  // strong log-concavity of the modified density
  double L;  // Lipschitz constant of the modified score
};

// Gaussian constants. C_t = 1/(m^2 lmax + sig2_t) - 1/sigma2 is the top
// eigenvalue of minus the modified-score Jacobian; it may be negative.
// L_t = min{1/sig2_t, 1/(lmin m^2)} + 1/sigma2.
Contraction contraction_constants(const GaussianTarget& target, const Schedule& sched, double t);

// Constants propagated from a C*-strongly log-concave, L*-smooth data law.
Contraction propagate_contraction(double c_star, double l_star, const Schedule& sched, double t);

// Time-Lipschitz constant of the Gaussian score over the cells of `grid`.
double score_time_lipschitz_M(const GaussianTarget& target, const Schedule& sched,
                              const TimeGrid& grid);

struct Divergences {
  double kl;
  double w2;
};

Divergences closed_form_divergences(const GaussianTarget& p, const GaussianTarget& q);
double gaussian_kl(const GaussianTarget& p, const GaussianTarget& q);
double gaussian_w2(const GaussianTarget& p, const GaussianTarget& q);
double fisher_to_stationary(const GaussianTarget& target, double sigma2);

// Constants entering the bounds for a fixed schedule.
struct BoundConstants {
  std::function<double(double)> C_of_t;
  std::function<double(double)> L_of_t;
  double M = 0.0;
  double B = 0.0;
  double fisher = 0.0;
  double kl_to_stationary = 0.0;
  double w2_to_stationary = 0.0;
};

BoundConstants gaussian_bound_constants(const GaussianTarget& target, const Schedule& sched,
                                        const TimeGrid& grid);

// Symmetric square root via the spectral decomposition of (A + A^T)/2;
// negative roundoff eigenvalues are clamped at zero.
Mat symmetric_sqrt(const Mat& A);

}  // namespace sgm
