#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgm/diffusion.hpp"
#include "sgm/grid.hpp"
#include "sgm/schedule.hpp"
#include "sgm/targets.hpp"

namespace sgm {

struct KlBoundReport {
  std::string schedule;
  std::size_t N = 0;
  std::size_t n_mc = 0;
  double e1 = 0.0;
  double log_e1 = 0.0;
  std::optional<double> e1_refined;
  std::optional<double> log_e1_refined;
  bool refined_used = false;
  double e2 = 0.0;
  double mc_std_e2 = 0.0;
  double e3 = 0.0;
  double total = 0.0;
  // h beta(T) <= 4 sigma2, in which case E3 = 2 h beta(T) I exactly.
  bool small_step = true;
  bool h3_assumed = true;
  std::vector<std::string> warnings;
};

struct StepSizeCheck {
  bool ok = false;
  std::size_t worst_cell = 0;
  double margin = 0.0;  // min over cells and subpoints of (rhs - h) / rhs
};

struct W2BoundReport {
  std::string schedule;
  std::size_t N = 0;
  double e1 = 0.0;
  double log_e1 = 0.0;
  double e2_discretization = 0.0;
  double e2_eps = 0.0;
  double e2_time = 0.0;
  double total = 0.0;
  double eps_used = 0.0;
  double B = 0.0;
  double M = 0.0;
  bool step_size_ok = false;
  StepSizeCheck step;
};

// Per-step Monte-Carlo statistics of ||s~(T - t_k, X) - approx(T - t_k, X)||^2
// under the exact forward marginal at T - t_k.
struct ScoreErrorProfile {
  std::vector<double> mean;
  std::vector<double> var;  // sample variance of the squared error
};

ScoreErrorProfile score_error_profile(const GaussianTarget& target, const Schedule& sched,
                                      const TimeGrid& grid, const ScoreSource& approx,
                                      std::size_t n_mc, std::uint64_t seed);

KlBoundReport kl_bound(const GaussianTarget& target, const Schedule& sched, const TimeGrid& grid,
                       const ScoreSource& score, std::size_t n_mc, std::uint64_t seed,
                       bool refined);

W2BoundReport w2_bound(const Schedule& sched, const TimeGrid& grid, const BoundConstants& constants,
                       std::optional<double> eps = std::nullopt);

struct EpsEstimate {
  double eps = 0.0;
  std::size_t worst_step = 0;
};

// sup_k sqrt(E ||s~ - s~_theta||^2) at forward times T - t_k.
EpsEstimate estimate_eps(const GaussianTarget& target, const Schedule& sched, const TimeGrid& grid,
                         const ScoreSource& approx, std::size_t n_mc, std::uint64_t seed);

StepSizeCheck check_step_size(const Schedule& sched, const TimeGrid& grid,
                              const BoundConstants& constants, bool with_M);

// Composite trapezoid of f over [a, b] with `points` equally spaced nodes.
double trapezoid(const std::function<double(double)>& f, double a, double b, std::size_t points);

inline constexpr std::size_t kCellSubpoints = 64;

}  // namespace sgm
