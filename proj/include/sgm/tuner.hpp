#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sgm/diffusion.hpp"
#include "sgm/scorenet.hpp"
#include "sgm/targets.hpp"

namespace sgm {

enum class BoundMetric { KL, W2 };
std::string to_string(BoundMetric metric);
BoundMetric parse_bound_metric(const std::string& name);

enum class EpsMode { Zero, Value, Estimate };
enum class ScoreMode { Exact, Trained };
std::string to_string(ScoreMode mode);
ScoreMode parse_score_mode(const std::string& name);

// Everything one schedule evaluation needs besides the schedule itself.
struct SweepSpec {
  BoundMetric metric = BoundMetric::KL;
  Target target = GaussianTarget::iso(2);
  // Endpoints pinned across the parametric family.
  double beta0 = 0.1;
  double beta1 = 20.0;
  double T = 1.0;
  double sigma2 = 1.0;
  std::size_t steps = 500;

  ScoreMode score = ScoreMode::Exact;
  TrainConfig train;
  std::size_t n_train = 10000;
  bool rescale = false;

  EpsMode eps_mode = EpsMode::Zero;
  double eps_value = 0.0;
  std::size_t n_mc = 1000;
  bool refined = false;

  // Empirical metrics on generated samples; the first one fills the emp
  // columns. Empty skips sampling altogether.
  std::vector<std::string> metrics;
  std::size_t n_gen = 10000;
  std::size_t n_proj = 500;
  Scheme scheme = Scheme::EI;

  std::uint64_t seed = 0;
  // Trained networks are cached here when non-empty.
  std::string cache_dir;
};

// One run of the full pipeline for a single schedule.
struct Evaluation {
  double bound_total = 0.0;
  double bound_e1 = 0.0;
  double bound_e2 = 0.0;
  double bound_e3_or_eps = 0.0;
  std::vector<double> empirical;  // one value per spec metric
};

Evaluation evaluate_schedule(const SweepSpec& spec, const Schedule& sched, std::size_t run);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  std::optional<double> std;
};

struct SweepRow {
  double a = 0.0;
  bool ok = true;
  std::string error;
  // Means over runs.
  double bound_total = 0.0;
  double bound_e1 = 0.0;
  double bound_e2 = 0.0;
  double bound_e3_or_eps = 0.0;
  std::optional<double> emp_mean;
  std::optional<double> emp_std;  // absent for a single run
  std::vector<MetricSummary> metrics;
  std::size_t n_runs = 0;
};

struct TraceEntry {
  std::string stage;
  std::size_t points = 0;
  double a_star = 0.0;
  double best_total = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by a, unique
  double a_star = 0.0;
  std::vector<TraceEntry> trace;
};

// Evaluates the parametric schedule at every distinct a, `runs` seeds each.
// Bound failures are recorded on the row and the sweep continues; a_star is
// NaN when every point failed.
SweepResult sweep(const SweepSpec& spec, std::vector<double> a_values, std::size_t runs = 1);

// Re-sweeps [a_star - radius, a_star + radius] at the given step and merges;
// re-evaluated points replace their coarse rows.
SweepResult refine(const SweepSpec& spec, const SweepResult& coarse, double step = 0.25,
                   double radius = 1.0, std::size_t runs = 1);

// Argmin of bound_total over successful rows; ties go to smaller |a|, then
// smaller a.
double select_a_star(const std::vector<SweepRow>& rows);

std::vector<double> a_range(double a_min, double a_max, double a_step);

struct ComparisonRow {
  std::string schedule;
  double bound_mean = 0.0;
  double mean = 0.0;
  std::optional<double> std;
  std::size_t n_runs = 0;
  // 100 (linear - this) / linear; absent for the linear row.
  std::optional<double> gain_pct;
};

// First empirical metric per schedule over `runs` seeds. The first schedule named
// "linear" is the reference for the gain column.
std::vector<ComparisonRow> compare_schedules(const SweepSpec& spec,
                                             const std::vector<Schedule>& schedules,
                                             std::size_t runs);

std::string sweep_csv(const SweepResult& result);
std::string comparison_csv(const std::vector<ComparisonRow>& rows);
// Long format: a, metric, mean, std, n_runs.
std::string sweep_metrics_csv(const SweepResult& result);

}  // namespace sgm
