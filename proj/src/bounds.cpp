#include "sgm/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sgm/error.hpp"
#include "sgm/parallel.hpp"
#include "sgm/rng.hpp"

namespace sgm {

namespace {

constexpr std::size_t kNodes = kCellSubpoints + 1;
// Roundoff allowance when testing C_t >= 0.
constexpr double kConcavityTolerance = 1e-12;

// Forward-time image [T - t_{k+1}, T - t_k] of backward cell k.
std::pair<double, double> forward_cell(const Schedule& sched, const TimeGrid& grid, std::size_t k) {
  const double lo = std::max(0.0, sched.T() - grid.t(k + 1));
  const double hi = std::max(lo, sched.T() - grid.t(k));
  return {lo, hi};
}

void check_grid(const Schedule& sched, const TimeGrid& grid) {
  if (std::abs(grid.T() - sched.T()) > 1e-12 * sched.T())
    throw DomainError("time grid horizon differs from the schedule horizon");
}

}  // namespace

double trapezoid(const std::function<double(double)>& f, double a, double b, std::size_t points) {
  if (points < 2) throw DomainError("trapezoid needs at least two nodes");
  if (b == a) return 0.0;
  const double h = (b - a) / static_cast<double>(points - 1);
  double sum = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i + 1 < points; ++i) sum += f(a + h * static_cast<double>(i));
  return sum * h;
}

ScoreErrorProfile score_error_profile(const GaussianTarget& target, const Schedule& sched,
                                      const TimeGrid& grid, const ScoreSource& approx,
                                      std::size_t n_mc, std::uint64_t seed) {
  check_grid(sched, grid);
  if (n_mc < 1) throw DomainError("Monte-Carlo sample count must be at least 1");
  if (approx.dim() != 0 && approx.dim() != target.dim()) throw ShapeError("score dimension mismatch");
  const int d = target.dim();
  const std::uint64_t key = rng::derive_named(seed, "mc");
  ScoreErrorProfile prof{std::vector<double>(grid.N()), std::vector<double>(grid.N())};
  parallel_for(grid.N(), [&](std::size_t k) {
    const double t = std::max(0.0, sched.T() - grid.t(k));
    const auto fs = m_sigma(sched, t);
    const double sd = std::sqrt(fs.sig2);
    RowMat x(static_cast<Eigen::Index>(n_mc), d);
    Vec z0(d), z(d);
    for (std::size_t i = 0; i < n_mc; ++i) {
      rng::Stream st(rng::derive(key, k, i));
      st.fill_normal(z0);
      st.fill_normal(z);
      x.row(static_cast<Eigen::Index>(i)) =
          (fs.m * (target.mu() + target.factor() * z0) + sd * z).transpose();
    }
    RowMat exact(x.rows(), d), est;
    gaussian_score_at(target, sched, t).modified_rows(x, exact);
    approx.modified_rows(t, x, est);
    const Vec err = (exact - est).rowwise().squaredNorm();
    const double mean = err.mean();
    prof.mean[k] = mean;
    prof.var[k] = n_mc > 1 ? (err.array() - mean).square().sum() / static_cast<double>(n_mc - 1) : 0.0;
  });
  return prof;
}

KlBoundReport kl_bound(const GaussianTarget& target, const Schedule& sched, const TimeGrid& grid,
                       const ScoreSource& score, std::size_t n_mc, std::uint64_t seed,
                       bool refined) {
  check_grid(sched, grid);
  if (std::holds_alternative<ScoreSource::Learned>(score.variant()) && n_mc < 2)
    throw PreconditionError("a learned score needs n_mc >= 2 for the E2 estimate");
  const double s2 = sched.sigma2();
  const double integral = sched.beta_integral(0.0, sched.T());
  const double kl = gaussian_kl(target, GaussianTarget::stationary(target.dim(), s2));

  KlBoundReport r;
  r.schedule = sched.describe();
  r.N = grid.N();
  r.n_mc = n_mc;
  r.log_e1 = std::log(kl) - integral / s2;
  r.e1 = std::exp(r.log_e1);
  if (target.lambda_max() <= s2) {
    r.log_e1_refined = std::log(kl) - 2.0 * integral / s2;
    r.e1_refined = std::exp(*r.log_e1_refined);
  } else {
    std::ostringstream os;
    os.precision(17);
    os << "refined mixing term needs lambda_max <= sigma2 (lambda_max = " << target.lambda_max()
       << ", sigma2 = " << s2 << ")";
    if (refined) throw PreconditionError(os.str());
    r.warnings.push_back(os.str());
  }
  r.refined_used = refined;

  if (n_mc > 0) {
    const auto prof = score_error_profile(target, sched, grid, score, n_mc, seed);
    double var = 0.0;
    for (std::size_t k = 0; k < grid.N(); ++k) {
      const auto [lo, hi] = forward_cell(sched, grid, k);
      const double w = sched.beta_integral(lo, hi);
      r.e2 += w * prof.mean[k];
      var += w * w * prof.var[k] / static_cast<double>(n_mc);
    }
    r.mc_std_e2 = std::sqrt(var);
  }

  const double hb = grid.h() * sched.beta(sched.T());
  r.small_step = hb <= 4.0 * s2;
  if (!r.small_step) r.warnings.push_back("h beta(T) > 4 sigma2: using the max-form discretization factor");
  r.e3 = 2.0 * hb * std::max(hb / (4.0 * s2), 1.0) * fisher_to_stationary(target, s2);
  r.total = (refined ? *r.e1_refined : r.e1) + r.e2 + r.e3;
  return r;
}

StepSizeCheck check_step_size(const Schedule& sched, const TimeGrid& grid,
                              const BoundConstants& constants, bool with_M) {
  check_grid(sched, grid);
  const double h = grid.h();
  const double s2 = sched.sigma2();
  StepSizeCheck out{true, 0, std::numeric_limits<double>::infinity()};
  std::vector<double> L(kNodes), C(kNodes);
  for (std::size_t k = 0; k < grid.N(); ++k) {
    const auto [lo, hi] = forward_cell(sched, grid, k);
    // Node j sits at backward time t_k + j h / 64.
    double l_max = 0.0;
    for (std::size_t j = 0; j < kNodes; ++j) {
      const double u = std::max(lo, hi - (hi - lo) * static_cast<double>(j) / kCellSubpoints);
      L[j] = constants.L_of_t(u);
      C[j] = constants.C_of_t(u);
      l_max = std::max(l_max, L[j]);
    }
    const double decay = std::exp(-sched.beta_integral(lo, hi) / (2.0 * s2));
    const double beta_k = sched.beta(hi);
    for (std::size_t j = 0; j < kNodes; ++j) {
      const double den = (with_M ? constants.M : 0.0) + beta_k * l_max * L[j];
      const double rhs = 2.0 * C[j] / den * decay;
      const double margin = rhs > 0.0 ? (rhs - h) / rhs : -std::numeric_limits<double>::infinity();
      if (!(h < rhs)) out.ok = false;
      if (margin < out.margin) {
        out.margin = margin;
        out.worst_cell = k;
      }
    }
  }
  return out;
}

W2BoundReport w2_bound(const Schedule& sched, const TimeGrid& grid, const BoundConstants& constants,
                       std::optional<double> eps) {
  check_grid(sched, grid);
  const double s2 = sched.sigma2();
  const double h = grid.h();
  const double T = sched.T();
  const double beta_T = sched.beta(T);
  if (eps && !(*eps >= 0.0)) throw DomainError("eps must be nonnegative");

  auto beta_C = [&](double u) { return sched.beta(u) * constants.C_of_t(u); };
  auto beta_L = [&](double u) { return sched.beta(u) * constants.L_of_t(u); };

  W2BoundReport r;
  r.schedule = sched.describe();
  r.N = grid.N();
  r.B = constants.B;
  r.M = constants.M;
  r.eps_used = eps.value_or(0.0);

  double int_beta_C = 0.0;
  const double noise_term = std::sqrt(2.0 * h * beta_T) / std::sqrt(s2) + h * beta_T / (2.0 * s2);
  for (std::size_t k = 0; k < grid.N(); ++k) {
    const auto [lo, hi] = forward_cell(sched, grid, k);
    for (std::size_t j = 0; j < kNodes; ++j) {
      const double u = std::min(hi, lo + (hi - lo) * static_cast<double>(j) / kCellSubpoints);
      const double c = constants.C_of_t(u);
      if (c < -kConcavityTolerance / s2) {
        std::ostringstream os;
        os.precision(17);
        os << "strong log-concavity fails: C_t = " << c << " < 0 at forward time " << u
           << "; rescale the data (preprocess rescale) so that lambda_max <= sigma2";
        throw LogConcavityViolation(os.str());
      }
    }
    int_beta_C += trapezoid(beta_C, lo, hi, kNodes);
    const double J = trapezoid(beta_L, lo, hi, kNodes);
    r.e2_discretization += J * (noise_term + 2.0 * J) * constants.B;
  }
  r.log_e1 = std::log(constants.w2_to_stationary) - sched.beta_integral(0.0, T) / s2 - int_beta_C;
  r.e1 = std::exp(r.log_e1);
  r.e2_eps = r.eps_used * T * beta_T;
  r.e2_time = constants.M * h * T * beta_T * (1.0 + 2.0 * constants.B);
  r.total = r.e1 + r.e2_discretization + r.e2_eps + r.e2_time;
  r.step = check_step_size(sched, grid, constants, true);
  r.step_size_ok = r.step.ok;
  return r;
}

EpsEstimate estimate_eps(const GaussianTarget& target, const Schedule& sched, const TimeGrid& grid,
                         const ScoreSource& approx, std::size_t n_mc, std::uint64_t seed) {
  const auto prof = score_error_profile(target, sched, grid, approx, n_mc, seed);
  EpsEstimate e;
  for (std::size_t k = 0; k < prof.mean.size(); ++k) {
    const double v = std::sqrt(prof.mean[k]);
    if (v > e.eps) {
      e.eps = v;
      e.worst_step = k;
    }
  }
  return e;
}

}  // namespace sgm
