// Command-line front end: generate, train, bound, metrics, tune, plot, run.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sgm/bounds.hpp"
#include "sgm/config.hpp"
#include "sgm/diffusion.hpp"
#include "sgm/error.hpp"
#include "sgm/io.hpp"
#include "sgm/metrics.hpp"
#include "sgm/parallel.hpp"
#include "sgm/plot.hpp"
#include "sgm/preprocess.hpp"
#include "sgm/rng.hpp"
#include "sgm/scorenet.hpp"
#include "sgm/tuner.hpp"

using json = nlohmann::ordered_json;
using namespace sgm;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const KlBoundReport& r) {
  return {{"schedule", r.schedule},   {"N", r.N},
          {"n_mc", r.n_mc},           {"e1", r.e1},
          {"log_e1", r.log_e1},       {"e1_refined", opt(r.e1_refined)},
          {"log_e1_refined", opt(r.log_e1_refined)},
          {"refined_used", r.refined_used},
          {"e2", r.e2},               {"mc_std_e2", r.mc_std_e2},
          {"e3", r.e3},               {"total", r.total},
          {"small_step", r.small_step}, {"h3_assumed", r.h3_assumed},
          {"warnings", r.warnings}};
}

json to_json(const W2BoundReport& r) {
  return {{"schedule", r.schedule},
          {"N", r.N},
          {"e1", r.e1},
          {"log_e1", r.log_e1},
          {"e2_discretization", r.e2_discretization},
          {"e2_eps", r.e2_eps},
          {"e2_time", r.e2_time},
          {"total", r.total},
          {"eps_used", r.eps_used},
          {"B", r.B},
          {"M", r.M},
          {"step_size_ok", r.step_size_ok},
          {"step", {{"ok", r.step.ok}, {"worst_cell", r.step.worst_cell}, {"margin", r.step.margin}}}};
}

json to_json(const MetricReport& r) {
  json params = json::object();
  for (const auto& [k, v] : r.params) params[k] = v;
  return {{"name", r.name}, {"value", r.value}, {"n_used", r.n_used}, {"params", params},
          {"warnings", r.warnings}};
}

json to_json(const SweepResult& s) {
  json rows = json::array();
  for (const auto& r : s.rows) {
    json metrics = json::array();
    for (const auto& m : r.metrics) metrics.push_back({{"name", m.name}, {"mean", m.mean}, {"std", opt(m.std)}});
    rows.push_back({{"a", r.a},
                    {"ok", r.ok},
                    {"error", r.ok ? json(nullptr) : json(r.error)},
                    {"bound_total", r.bound_total},
                    {"bound_e1", r.bound_e1},
                    {"bound_e2", r.bound_e2},
                    {"bound_e3_or_eps", r.bound_e3_or_eps},
                    {"metrics", metrics},
                    {"n_runs", r.n_runs}});
  }
  json trace = json::array();
  for (const auto& t : s.trace)
    trace.push_back({{"stage", t.stage}, {"points", t.points}, {"a_star", t.a_star}, {"best_total", t.best_total}});
  return {{"a_star", s.a_star}, {"trace", trace}, {"rows", rows}};
}

json to_json(const std::vector<ComparisonRow>& rows) {
  json out = json::array();
  for (const auto& r : rows)
    out.push_back({{"schedule", r.schedule}, {"bound_mean", r.bound_mean}, {"emp_mean", r.mean},
                   {"emp_std", opt(r.std)}, {"n_runs", r.n_runs}, {"gain_pct", opt(r.gain_pct)}});
  return out;
}

// Called after the sweep artifacts are written, so failed rows stay inspectable.
void require_a_star(const SweepResult& r) {
  if (std::isfinite(r.a_star)) return;
  throw Error("every a value failed; first error: " + (r.rows.empty() ? std::string() : r.rows.front().error));
}

void write_json(const std::string& path, const json& j) { io::write_text(path, j.dump(2) + "\n"); }

// "exact", "zero" or "net:<params file>".
ScoreSource make_score(const std::string& spec, const Target& target, const Schedule& sched) {
  if (spec == "exact") return ScoreSource::analytic(require_gaussian(target, "exact score"), sched);
  if (spec == "zero") return ScoreSource::zero(sched.sigma2());
  if (spec.rfind("net:", 0) == 0) return ScoreSource::learned(load_params(spec.substr(4)), sched.sigma2());
  throw ConfigError("--score: expected exact, zero or net:<file>, got '" + spec + "'");
}

std::optional<double> parse_eps(const std::string& eps) {
  if (eps == "estimate") return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(eps, &used);
    if (used == eps.size() && v >= 0.0) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("--eps: expected estimate or a nonnegative number, got '" + eps + "'");
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return "";
}

std::string output_path(const ExperimentConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.output_dir) / (cfg.output_prefix + name)).string();
}

void add_common(CLI::App* sub, ExperimentConfig& cfg, std::string& config_path) {
  sub->add_option("--config", config_path, "Key = value experiment file used as defaults");
  sub->add_option("--seed", cfg.seed, "Top-level seed");
  sub->add_option("--target", cfg.target_kind, "iso, heterosc, corr, stationary, funnel, gmm25, gaussian");
  sub->add_option("--dim", cfg.target_dim, "Target dimension");
  sub->add_option("--schedule", cfg.schedule_kind, "linear, parametric or cosine");
  sub->add_option("--a", cfg.schedule_a, "Parametric schedule shape");
  sub->add_option("--s", cfg.schedule_s, "Cosine schedule offset");
  sub->add_option("--beta0", cfg.beta0, "beta(0)");
  sub->add_option("--beta1", cfg.beta1, "beta(T)");
  sub->add_option("--T", cfg.T, "Horizon");
  sub->add_option("--sigma2", cfg.sigma2, "Stationary variance");
  sub->add_option("--steps", cfg.steps, "Number of backward steps N");
}

int run_experiment(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.output_dir);
  io::write_text(output_path(cfg, "config.cfg"), serialize_config(cfg));
  const SweepSpec spec = make_sweep_spec(cfg);
  SweepResult result = sweep(spec, a_range(cfg.a_min, cfg.a_max, cfg.a_step), 1);
  if (cfg.refine && std::isfinite(result.a_star)) result = refine(spec, result, cfg.refine_step, cfg.refine_radius, cfg.runs);
  io::write_text(output_path(cfg, "sweep.csv"), sweep_csv(result));
  json report = {{"config", serialize_config(cfg)}, {"sweep", to_json(result)}};
  if (!cfg.metrics.empty()) io::write_text(output_path(cfg, "metrics.csv"), sweep_metrics_csv(result));
  if (!std::isfinite(result.a_star)) {
    write_json(output_path(cfg, "report.json"), report);
    require_a_star(result);
  }
  if (cfg.compare) {
    const std::vector<Schedule> schedules = {
        Schedule::linear(cfg.beta0, cfg.beta1, cfg.T, cfg.sigma2),
        Schedule::cosine(cfg.schedule_s, cfg.T, cfg.sigma2),
        Schedule::parametric(result.a_star, cfg.beta0, cfg.beta1, cfg.T, cfg.sigma2)};
    const auto rows = compare_schedules(spec, schedules, cfg.runs);
    io::write_text(output_path(cfg, "compare.csv"), comparison_csv(rows));
    report["compare"] = to_json(rows);
  }
  write_json(output_path(cfg, "report.json"), report);
  std::vector<std::string> ys = {"bound_total"};
  if (!cfg.metrics.empty()) ys.push_back("emp_mean");
  PlotOptions po;
  po.title = to_string(spec.metric) + " bound over a";
  po.log_y = true;
  bool positive = true;
  for (const auto& r : result.rows)
    if (r.ok && (r.bound_total <= 0.0 || (r.emp_mean && *r.emp_mean <= 0.0))) positive = false;
  po.log_y = positive;
  const std::string csv_path = output_path(cfg, "sweep.csv");
  io::write_text(output_path(cfg, "sweep.svg"), plot_svg(io::read_csv(csv_path), "a", ys, po));
  std::cout << "a* = " << io::format_double(result.a_star) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ExperimentConfig cfg;
  std::string config_path;
  try {
    config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"Score-based generative model noise schedules: sampling, bounds and tuning"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker count (overrides SGM_THREADS)");

  // generate
  auto* gen = app.add_subcommand("generate", "Run the backward sampler and write samples");
  add_common(gen, cfg, config_path);
  std::string gen_score = "exact", gen_out, gen_transform;
  gen->add_option("--scheme", cfg.scheme, "em or ei");
  gen->add_option("--n", cfg.sample_n, "Number of samples");
  gen->add_option("--score", gen_score, "exact, zero or net:<params file>");
  gen->add_option("--transform", gen_transform, "Preprocess JSON; samples are descaled with it");
  gen->add_option("--out", gen_out, "Samples file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a score network by score matching");
  add_common(tr, cfg, config_path);
  std::string tr_out, tr_report;
  tr->add_option("--loss", cfg.loss, "explicit or conditional");
  tr->add_option("--epochs", cfg.epochs, "Training epochs");
  tr->add_option("--lr", cfg.lr, "Adam learning rate");
  tr->add_option("--batch", cfg.batch, "Batch size");
  tr->add_option("--width", cfg.width, "Hidden width");
  tr->add_option("--layers", cfg.layers, "Hidden layers");
  tr->add_option("--n-train", cfg.n_train, "Training samples drawn from the target");
  tr->add_option("--preprocess", cfg.preprocess, "none or rescale");
  tr->add_option("--out", tr_out, "Parameter file")->required();
  tr->add_option("--report", tr_report, "JSON with per-epoch losses");

  // bound
  auto* bd = app.add_subcommand("bound", "Evaluate the KL or W2 upper bound");
  add_common(bd, cfg, config_path);
  std::string bd_score = "exact", bd_out;
  bd->add_option("--metric", cfg.bound_metric, "kl or w2");
  bd->add_flag("--refined", cfg.refined, "Use the refined mixing term (KL)");
  bd->add_option("--eps", cfg.eps, "0, estimate or a value (W2)");
  bd->add_option("--n-mc", cfg.n_mc, "Monte-Carlo samples per step");
  bd->add_option("--score", bd_score, "exact or net:<params file>");
  bd->add_option("--out", bd_out, "Report JSON")->required();

  // metrics
  auto* mt = app.add_subcommand("metrics", "Compare generated samples with the target");
  add_common(mt, cfg, config_path);
  std::vector<std::string> mt_metrics;
  std::string mt_generated, mt_reference, mt_out, mt_k = "auto";
  mt->add_option("--metric", mt_metrics, "gauss-kl, gauss-w2, sliced-w2, knn-kl, nll (repeatable)");
  mt->add_option("--projections", cfg.projections, "Sliced-W2 directions");
  mt->add_option("--k", mt_k, "k-NN order or auto");
  mt->add_option("--generated", mt_generated, "Generated samples file")->required();
  mt->add_option("--reference", mt_reference, "Reference samples file (default: drawn from the target)");
  mt->add_option("--out", mt_out, "Report JSON")->required();

  // tune
  auto* tu = app.add_subcommand("tune", "Sweep the parametric schedule and locate a*");
  add_common(tu, cfg, config_path);
  std::string tu_out, tu_json, tu_compare;
  tu->add_option("--metric", cfg.bound_metric, "kl or w2");
  tu->add_option("--a-min", cfg.a_min, "Smallest a");
  tu->add_option("--a-max", cfg.a_max, "Largest a");
  tu->add_option("--a-step", cfg.a_step, "Coarse step");
  tu->add_flag("--refine", cfg.refine, "Refine around the coarse a*");
  auto* rs = tu->add_option("--refine-step", cfg.refine_step, "Refinement step");
  auto* rr = tu->add_option("--refine-radius", cfg.refine_radius, "Refinement radius");
  tu->add_option("--runs", cfg.runs, "Seeds per refined point and per compared schedule");
  tu->add_option("--score", cfg.score, "exact or trained");
  tu->add_option("--loss", cfg.loss, "explicit or conditional");
  tu->add_option("--epochs", cfg.epochs, "Training epochs");
  tu->add_option("--n-train", cfg.n_train, "Training samples");
  tu->add_option("--eps", cfg.eps, "0, estimate or a value (W2)");
  tu->add_option("--n-mc", cfg.n_mc, "Monte-Carlo samples per step");
  tu->add_option("--preprocess", cfg.preprocess, "none or rescale");
  tu->add_option("--empirical", cfg.metrics, "Empirical metrics on generated samples");
  tu->add_option("--n", cfg.sample_n, "Generated samples per evaluation");
  tu->add_option("--cache-dir", cfg.cache_dir, "Directory for cached networks");
  tu->add_option("--out", tu_out, "Sweep CSV")->required();
  tu->add_option("--json", tu_json, "Sweep JSON");
  tu->add_option("--compare", tu_compare, "Comparison CSV of linear, cosine and a*");

  // plot
  auto* pl = app.add_subcommand("plot", "SVG line chart from a CSV file");
  std::string pl_csv, pl_x = "a", pl_out;
  std::vector<std::string> pl_y;
  PlotOptions po;
  pl->add_option("--csv", pl_csv, "Input CSV")->required();
  pl->add_option("--x", pl_x, "x column");
  pl->add_option("--y", pl_y, "y columns")->required()->delimiter(',');
  pl->add_flag("--log", po.log_y, "Log-scale y axis");
  pl->add_option("--title", po.title, "Chart title");
  pl->add_option("--out", pl_out, "Output SVG")->required();

  // run
  auto* rn = app.add_subcommand("run", "Run the sweep described by a config file");
  std::string run_config;
  rn->add_option("config", run_config, "Experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (threads > 0) set_thread_count(threads);
    if (*rn) {
      cfg = load_config(run_config);
      validate_config(cfg);
      return run_experiment(cfg);
    }
    if (*pl) {
      io::write_text(pl_out, plot_svg(io::read_csv(pl_csv), pl_x, pl_y, po));
      return 0;
    }
    if (*tu && (rs->count() > 0 || rr->count() > 0)) cfg.refine = true;
    validate_config(cfg);
    const Target target = make_target(cfg);
    const Schedule sched = make_schedule(cfg);
    const TimeGrid grid(cfg.steps, sched.T());

    if (*gen) {
      const ScoreSource score = make_score(gen_score, target, sched);
      RowMat x = backward_sample(parse_scheme(cfg.scheme), score, sched, grid, cfg.sample_n,
                                 target_dim(target), rng::derive_named(cfg.seed, "sample"))
                     .data;
      if (!gen_transform.empty()) x = PreprocessTransform::from_json(io::read_text(gen_transform)).inverse(x);
      io::write_samples(gen_out, x);
    } else if (*tr) {
      TrainConfig tc = make_train_config(cfg);
      tc.seed = rng::derive_named(cfg.seed, "train");
      RowMat data = sample(target, cfg.n_train, rng::derive_named(cfg.seed, "data"));
      std::optional<GaussianTarget> analytic;
      if (auto* g = std::get_if<GaussianTarget>(&target)) analytic = *g;
      if (cfg.preprocess == "rescale") {
        auto [tf, scaled] = fit_transform(data);
        data = std::move(scaled);
        if (analytic) analytic = tf.apply(*analytic);
        io::write_text(tr_out + ".transform.json", tf.to_json());
      }
      if (tc.loss == LossKind::Explicit && !analytic)
        throw UnsupportedOperation("explicit loss needs a Gaussian target, got " + target_name(target));
      const TrainResult res = train_on_samples(data, sched, tc, analytic ? &*analytic : nullptr);
      save_params(res.params, tr_out);
      if (!tr_report.empty())
        write_json(tr_report, {{"loss", to_string(tc.loss)}, {"epochs", tc.epochs}, {"epoch_loss", res.epoch_loss}});
    } else if (*bd) {
      const GaussianTarget& g = require_gaussian(target, "bound");
      const ScoreSource score = make_score(bd_score, target, sched);
      const std::uint64_t mc_seed = rng::derive_named(cfg.seed, "mc");
      if (parse_bound_metric(cfg.bound_metric) == BoundMetric::KL) {
        write_json(bd_out, to_json(kl_bound(g, sched, grid, score, score.is_analytic() ? 0 : cfg.n_mc, mc_seed,
                                            cfg.refined)));
      } else {
        std::optional<double> eps = parse_eps(cfg.eps);
        if (!eps) eps = score.is_analytic() ? 0.0 : estimate_eps(g, sched, grid, score, cfg.n_mc, mc_seed).eps;
        write_json(bd_out, to_json(w2_bound(sched, grid, gaussian_bound_constants(g, sched, grid), eps)));
      }
    } else if (*mt) {
      if (mt_metrics.empty()) mt_metrics = cfg.metrics;
      if (mt_metrics.empty()) throw ConfigError("--metric: at least one metric is required");
      int k = 0;
      if (mt_k != "auto") {
        try {
          k = std::stoi(mt_k);
        } catch (const std::exception&) {
          throw ConfigError("--k: expected auto or an integer");
        }
      }
      const RowMat generated = io::read_samples(mt_generated);
      const RowMat reference = mt_reference.empty()
                                   ? sample(target, static_cast<std::size_t>(generated.rows()),
                                            rng::derive_named(cfg.seed, "reference"))
                                   : io::read_samples(mt_reference);
      json out = json::array();
      for (const auto& name : mt_metrics)
        out.push_back(to_json(evaluate_metric(name, target, reference, generated, cfg.projections, k,
                                              rng::derive_named(cfg.seed, "metric:" + name))));
      write_json(mt_out, out);
    } else if (*tu) {
      const SweepSpec spec = make_sweep_spec(cfg);
      SweepResult result = sweep(spec, a_range(cfg.a_min, cfg.a_max, cfg.a_step), 1);
      if (cfg.refine && std::isfinite(result.a_star)) result = refine(spec, result, cfg.refine_step, cfg.refine_radius, cfg.runs);
      io::write_text(tu_out, sweep_csv(result));
      if (!tu_json.empty()) write_json(tu_json, to_json(result));
      require_a_star(result);
      if (!tu_compare.empty()) {
        const std::vector<Schedule> schedules = {
            Schedule::linear(cfg.beta0, cfg.beta1, cfg.T, cfg.sigma2),
            Schedule::cosine(cfg.schedule_s, cfg.T, cfg.sigma2),
            Schedule::parametric(result.a_star, cfg.beta0, cfg.beta1, cfg.T, cfg.sigma2)};
        io::write_text(tu_compare, comparison_csv(compare_schedules(spec, schedules, cfg.runs)));
      }
      std::cout << "a* = " << io::format_double(result.a_star) << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
