#include "sgm/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "sgm/bounds.hpp"
#include "sgm/error.hpp"
#include "sgm/io.hpp"
#include "sgm/metrics.hpp"
#include "sgm/parallel.hpp"
#include "sgm/preprocess.hpp"
#include "sgm/rng.hpp"

namespace sgm {

std::string to_string(BoundMetric metric) { return metric == BoundMetric::KL ? "kl" : "w2"; }

BoundMetric parse_bound_metric(const std::string& name) {
  if (name == "kl") return BoundMetric::KL;
  if (name == "w2") return BoundMetric::W2;
  throw ConfigError("unknown bound metric '" + name + "' (expected kl or w2)");
}

std::string to_string(ScoreMode mode) { return mode == ScoreMode::Exact ? "exact" : "trained"; }

ScoreMode parse_score_mode(const std::string& name) {
  if (name == "exact") return ScoreMode::Exact;
  if (name == "trained") return ScoreMode::Trained;
  throw ConfigError("unknown score mode '" + name + "' (expected exact or trained)");
}

namespace {

std::uint64_t hash_bytes(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string cache_key(const RowMat& data, const Schedule& sched, const TrainConfig& cfg,
                      const GaussianTarget* analytic) {
  std::ostringstream key;
  key << "score-net-v1|" << sched.describe() << '|' << io::format_double(sched.beta0()) << '|'
      << io::format_double(sched.beta1()) << '|' << io::format_double(sched.T()) << '|'
      << io::format_double(sched.sigma2()) << '|' << to_string(cfg.loss) << '|' << cfg.epochs
      << '|' << cfg.batch_size << '|' << io::format_double(cfg.learning_rate) << '|' << cfg.seed
      << '|' << cfg.width << '|' << cfg.layers << '|' << data.rows() << 'x' << data.cols();
  const std::string head = key.str();
  std::uint64_t h = rng::hash_name(head);
  h = hash_bytes(data.data(), sizeof(double) * static_cast<std::size_t>(data.size()), h);
  if (analytic != nullptr) {
    const Vec& mu = analytic->mu();
    const Mat& S = analytic->Sigma();
    h = hash_bytes(mu.data(), sizeof(double) * static_cast<std::size_t>(mu.size()), h);
    h = hash_bytes(S.data(), sizeof(double) * static_cast<std::size_t>(S.size()), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScoreNetParams trained_params(const SweepSpec& spec, const RowMat& data, const Schedule& sched,
                              const TrainConfig& cfg, const GaussianTarget* analytic) {
  if (spec.cache_dir.empty()) return train_on_samples(data, sched, cfg, analytic).params;
  namespace fs = std::filesystem;
  const fs::path path = fs::path(spec.cache_dir) / ("score-" + cache_key(data, sched, cfg, analytic) + ".bin");
  if (fs::exists(path)) {
    try {
      ScoreNetParams p = load_params(path.string());
      if (p.d() == data.cols() && p.width() == cfg.width && p.layers() == cfg.layers) return p;
    } catch (const Error&) {
      // Unreadable entry: retrain and overwrite.
    }
  }
  ScoreNetParams params = train_on_samples(data, sched, cfg, analytic).params;
  std::error_code ec;
  fs::create_directories(spec.cache_dir, ec);
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  const fs::path tmp = path.string() + ".tmp" + std::to_string(tid);
  save_params(params, tmp.string());
  fs::rename(tmp, path, ec);
  if (ec) fs::remove(tmp, ec);
  return params;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::optional<double> std_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nullopt;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Schedule parametric_for(const SweepSpec& spec, double a) {
  return Schedule::parametric(a, spec.beta0, spec.beta1, spec.T, spec.sigma2);
}

double best_total(const std::vector<SweepRow>& rows, double a_star) {
  for (const auto& r : rows)
    if (r.ok && r.a == a_star) return r.bound_total;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

Evaluation evaluate_schedule(const SweepSpec& spec, const Schedule& sched, std::size_t run) {
  const std::uint64_t run_seed = rng::derive(spec.seed, run);
  const int d = target_dim(spec.target);
  const TimeGrid grid(spec.steps, sched.T());

  const bool need_data = spec.score == ScoreMode::Trained || spec.rescale;
  RowMat data;
  if (need_data) data = sample(spec.target, spec.n_train, rng::derive_named(run_seed, "data"));

  // In rescale mode everything downstream lives in the scaled space, with the
  // Gaussian fit of the scaled training data standing in for the target.
  std::optional<PreprocessTransform> transform;
  GaussianTarget bound_target = spec.rescale ? GaussianTarget::stationary(d, spec.sigma2)
                                             : require_gaussian(spec.target, "bound evaluation");
  if (spec.rescale) {
    auto [tf, scaled] = fit_transform(data);
    bound_target = fit_gaussian(scaled);
    transform = std::move(tf);
    data = std::move(scaled);
  }

  std::optional<ScoreSource> score;
  if (spec.score == ScoreMode::Exact) {
    score = ScoreSource::analytic(bound_target, sched);
  } else {
    TrainConfig cfg = spec.train;
    cfg.seed = rng::derive_named(run_seed, "train");
    const GaussianTarget* analytic = cfg.loss == LossKind::Explicit ? &bound_target : nullptr;
    score = ScoreSource::learned(trained_params(spec, data, sched, cfg, analytic), sched.sigma2());
  }
  const bool exact = spec.score == ScoreMode::Exact;
  const std::uint64_t mc_seed = rng::derive_named(run_seed, "mc");

  Evaluation ev;
  if (spec.metric == BoundMetric::KL) {
    // KL is invariant under the affine rescaling, so no transfer is needed.
    const auto r = kl_bound(bound_target, sched, grid, *score, exact ? 0 : spec.n_mc, mc_seed,
                            spec.refined);
    ev.bound_total = r.total;
    ev.bound_e1 = r.refined_used ? *r.e1_refined : r.e1;
    ev.bound_e2 = r.e2;
    ev.bound_e3_or_eps = r.e3;
  } else {
    const BoundConstants constants = gaussian_bound_constants(bound_target, sched, grid);
    double eps = 0.0;
    if (spec.eps_mode == EpsMode::Value) {
      eps = spec.eps_value;
    } else if (spec.eps_mode == EpsMode::Estimate && !exact) {
      eps = estimate_eps(bound_target, sched, grid, *score, spec.n_mc, mc_seed).eps;
    }
    const auto r = w2_bound(sched, grid, constants, eps);
    const double factor = transform ? transform->transfer_bound(1.0) : 1.0;
    ev.bound_total = factor * r.total;
    ev.bound_e1 = factor * r.e1;
    ev.bound_e2 = factor * (r.e2_discretization + r.e2_time);
    ev.bound_e3_or_eps = factor * r.e2_eps;
  }

  if (!spec.metrics.empty()) {
    RowMat gen = backward_sample(spec.scheme, *score, sched, grid, spec.n_gen, d,
                                 rng::derive_named(run_seed, "sample"))
                     .data;
    if (transform) gen = transform->inverse(gen);
    const RowMat reference = sample(spec.target, spec.n_gen, rng::derive_named(run_seed, "reference"));
    for (const auto& name : spec.metrics) {
      ev.empirical.push_back(evaluate_metric(name, spec.target, reference, gen, spec.n_proj, 0,
                                             rng::derive_named(run_seed, "metric:" + name))
                                 .value);
    }
  }
  return ev;
}

std::vector<double> a_range(double a_min, double a_max, double a_step) {
  if (!(a_step > 0.0)) throw ConfigError("a step must be positive");
  if (a_max < a_min) throw ConfigError("a-max must not be below a-min");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((a_max - a_min) / a_step + 1e-9));
  for (std::size_t i = 0; i <= count; ++i) {
    double a = a_min + static_cast<double>(i) * a_step;
    // Snap values that are integers up to roundoff.
    if (std::abs(a - std::round(a)) < 1e-12) a = std::round(a);
    out.push_back(a);
  }
  return out;
}

double select_a_star(const std::vector<SweepRow>& rows) {
  const SweepRow* best = nullptr;
  for (const auto& r : rows) {
    if (!r.ok || !std::isfinite(r.bound_total)) continue;
    if (best == nullptr || r.bound_total < best->bound_total) {
      best = &r;
    } else if (r.bound_total == best->bound_total) {
      const bool closer = std::abs(r.a) < std::abs(best->a) ||
                          (std::abs(r.a) == std::abs(best->a) && r.a < best->a);
      if (closer) best = &r;
    }
  }
  if (best == nullptr) throw PreconditionError("no a value produced a finite bound");
  return best->a;
}

SweepResult sweep(const SweepSpec& spec, std::vector<double> a_values, std::size_t runs) {
  if (a_values.empty()) throw PreconditionError("sweep needs at least one a value");
  if (runs == 0) throw PreconditionError("sweep needs at least one run");
  std::sort(a_values.begin(), a_values.end());
  a_values.erase(std::unique(a_values.begin(), a_values.end()), a_values.end());

  const std::size_t n_a = a_values.size();
  std::vector<Evaluation> evals(n_a * runs);
  std::vector<std::string> errors(n_a * runs);
  parallel_for(n_a * runs, [&](std::size_t job) {
    const std::size_t i = job / runs, r = job % runs;
    try {
      evals[job] = evaluate_schedule(spec, parametric_for(spec, a_values[i]), r);
    } catch (const Error& e) {
      errors[job] = e.what();
    }
  });

  SweepResult result;
  for (std::size_t i = 0; i < n_a; ++i) {
    SweepRow row;
    row.a = a_values[i];
    row.n_runs = runs;
    std::vector<double> total, e1, e2, e3;
    std::vector<std::vector<double>> emp(spec.metrics.size());
    for (std::size_t r = 0; r < runs; ++r) {
      const std::size_t job = i * runs + r;
      if (!errors[job].empty()) {
        row.ok = false;
        row.error = errors[job];
        break;
      }
      total.push_back(evals[job].bound_total);
      e1.push_back(evals[job].bound_e1);
      e2.push_back(evals[job].bound_e2);
      e3.push_back(evals[job].bound_e3_or_eps);
      for (std::size_t m = 0; m < emp.size(); ++m) emp[m].push_back(evals[job].empirical[m]);
    }
    if (row.ok) {
      row.bound_total = mean_of(total);
      row.bound_e1 = mean_of(e1);
      row.bound_e2 = mean_of(e2);
      row.bound_e3_or_eps = mean_of(e3);
      for (std::size_t m = 0; m < emp.size(); ++m)
        row.metrics.push_back({spec.metrics[m], mean_of(emp[m]), std_of(emp[m])});
      if (!row.metrics.empty()) {
        row.emp_mean = row.metrics.front().mean;
        row.emp_std = row.metrics.front().std;
      }
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.bound_total = row.bound_e1 = row.bound_e2 = row.bound_e3_or_eps = nan;
    }
    result.rows.push_back(std::move(row));
  }
  const bool any_ok = std::any_of(result.rows.begin(), result.rows.end(),
                                  [](const SweepRow& r) { return r.ok && std::isfinite(r.bound_total); });
  result.a_star = any_ok ? select_a_star(result.rows) : std::numeric_limits<double>::quiet_NaN();
  result.trace.push_back({"coarse", n_a, result.a_star, best_total(result.rows, result.a_star)});
  return result;
}

SweepResult refine(const SweepSpec& spec, const SweepResult& coarse, double step, double radius,
                   std::size_t runs) {
  if (!(step > 0.0)) throw PreconditionError("refine step must be positive");
  if (radius < step) throw PreconditionError("refine radius must be at least the step");
  if (!std::isfinite(coarse.a_star)) throw PreconditionError("coarse sweep has no valid a*");
  const auto half = static_cast<long>(std::floor(radius / step + 1e-9));
  std::vector<double> fine;
  for (long k = -half; k <= half; ++k) fine.push_back(coarse.a_star + static_cast<double>(k) * step);
  const SweepResult local = sweep(spec, fine, runs);

  std::map<double, SweepRow> merged;
  for (const auto& r : coarse.rows) merged[r.a] = r;
  for (const auto& r : local.rows) merged[r.a] = r;
  SweepResult out;
  for (auto& [a, row] : merged) out.rows.push_back(row);
  out.a_star = select_a_star(out.rows);
  out.trace = coarse.trace;
  out.trace.push_back({"refine", local.rows.size(), out.a_star, best_total(out.rows, out.a_star)});
  return out;
}

std::vector<ComparisonRow> compare_schedules(const SweepSpec& spec,
                                             const std::vector<Schedule>& schedules,
                                             std::size_t runs) {
  if (spec.metrics.empty()) throw ConfigError("schedule comparison needs an empirical metric");
  if (runs == 0) throw PreconditionError("comparison needs at least one run");
  const std::size_t n_s = schedules.size();
  std::vector<Evaluation> evals(n_s * runs);
  parallel_for(n_s * runs, [&](std::size_t job) {
    evals[job] = evaluate_schedule(spec, schedules[job / runs], job % runs);
  });

  std::vector<ComparisonRow> rows;
  std::optional<double> linear_mean;
  for (std::size_t s = 0; s < n_s; ++s) {
    std::vector<double> emp, bound;
    for (std::size_t r = 0; r < runs; ++r) {
      emp.push_back(evals[s * runs + r].empirical.front());
      bound.push_back(evals[s * runs + r].bound_total);
    }
    ComparisonRow row;
    row.schedule = schedules[s].describe();
    row.bound_mean = mean_of(bound);
    row.mean = mean_of(emp);
    row.std = std_of(emp);
    row.n_runs = runs;
    if (!linear_mean && row.schedule == "linear") linear_mean = row.mean;
    rows.push_back(std::move(row));
  }
  if (linear_mean && *linear_mean != 0.0) {
    for (auto& row : rows)
      if (row.schedule != "linear") row.gain_pct = 100.0 * (*linear_mean - row.mean) / *linear_mean;
  }
  return rows;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

}  // namespace

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "a,bound_total,bound_e1,bound_e2,bound_e3_or_eps,emp_mean,emp_std,n_runs\n";
  for (const auto& r : result.rows) {
    out << io::format_double(r.a) << ',' << io::format_double(r.bound_total) << ','
        << io::format_double(r.bound_e1) << ',' << io::format_double(r.bound_e2) << ','
        << io::format_double(r.bound_e3_or_eps) << ',' << cell(r.emp_mean) << ','
        << cell(r.emp_std) << ',' << r.n_runs << '\n';
  }
  return out.str();
}

std::string sweep_metrics_csv(const SweepResult& result) {
  std::ostringstream out;
  out << "a,metric,mean,std,n_runs\n";
  for (const auto& r : result.rows) {
    for (const auto& m : r.metrics) {
      out << io::format_double(r.a) << ',' << m.name << ',' << io::format_double(m.mean) << ','
          << cell(m.std) << ',' << r.n_runs << '\n';
    }
  }
  return out.str();
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "schedule,bound_mean,emp_mean,emp_std,n_runs,gain_pct\n";
  for (const auto& r : rows) {
    out << r.schedule << ',' << io::format_double(r.bound_mean) << ','
        << io::format_double(r.mean) << ',' << cell(r.std) << ',' << r.n_runs << ','
        << cell(r.gain_pct) << '\n';
  }
  return out.str();
}

}  // namespace sgm
