#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sgm/bounds.hpp"
#include "sgm/diffusion.hpp"
#include "sgm/error.hpp"
#include "sgm/metrics.hpp"
#include "sgm/preprocess.hpp"
#include "sgm/scorenet.hpp"
#include "sgm/targets.hpp"
#include "sgm/tuner.hpp"

namespace py = pybind11;
using namespace sgm;

namespace {

py::object opt(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict to_dict(const KlBoundReport& r) {
  py::dict d;
  d["schedule"] = r.schedule;
  d["N"] = r.N;
  d["n_mc"] = r.n_mc;
  d["e1"] = r.e1;
  d["log_e1"] = r.log_e1;
  d["e1_refined"] = opt(r.e1_refined);
  d["log_e1_refined"] = opt(r.log_e1_refined);
  d["refined_used"] = r.refined_used;
  d["e2"] = r.e2;
  d["mc_std_e2"] = r.mc_std_e2;
  d["e3"] = r.e3;
  d["total"] = r.total;
  d["small_step"] = r.small_step;
  d["h3_assumed"] = r.h3_assumed;
  d["warnings"] = r.warnings;
  return d;
}

py::dict to_dict(const W2BoundReport& r) {
  py::dict d;
  d["schedule"] = r.schedule;
  d["N"] = r.N;
  d["e1"] = r.e1;
  d["log_e1"] = r.log_e1;
  d["e2_discretization"] = r.e2_discretization;
  d["e2_eps"] = r.e2_eps;
  d["e2_time"] = r.e2_time;
  d["total"] = r.total;
  d["eps_used"] = r.eps_used;
  d["B"] = r.B;
  d["M"] = r.M;
  d["step_size_ok"] = r.step_size_ok;
  d["step_worst_cell"] = r.step.worst_cell;
  d["step_margin"] = r.step.margin;
  return d;
}

// "exact", "zero" or a ScoreNetParams instance.
ScoreSource make_score(const py::object& score, const GaussianTarget& target, const Schedule& sched) {
  if (py::isinstance<py::str>(score)) {
    const auto s = score.cast<std::string>();
    if (s == "exact") return ScoreSource::analytic(target, sched);
    if (s == "zero") return ScoreSource::zero(sched.sigma2());
    throw ConfigError("score must be 'exact', 'zero' or a ScoreNetParams, got '" + s + "'");
  }
  return ScoreSource::learned(score.cast<ScoreNetParams>(), sched.sigma2());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Noise schedules, samplers and convergence bounds for score-based generative models";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<LogConcavityViolation>(m, "LogConcavityViolation", base.ptr());

  py::class_<Schedule>(m, "Schedule")
      .def_static("linear", &Schedule::linear, py::arg("beta0") = 0.1, py::arg("beta1") = 20.0,
                  py::arg("T") = 1.0, py::arg("sigma2") = 1.0)
      .def_static("parametric", &Schedule::parametric, py::arg("a"), py::arg("beta0") = 0.1,
                  py::arg("beta1") = 20.0, py::arg("T") = 1.0, py::arg("sigma2") = 1.0)
      .def_static("cosine", &Schedule::cosine, py::arg("s") = Schedule::kDefaultCosineS,
                  py::arg("T") = 1.0, py::arg("sigma2") = 1.0)
      .def("beta", &Schedule::beta)
      .def("beta_integral", &Schedule::beta_integral)
      .def("describe", &Schedule::describe)
      .def_property_readonly("T", &Schedule::T)
      .def_property_readonly("sigma2", &Schedule::sigma2)
      .def("__repr__", [](const Schedule& s) { return "<Schedule " + s.describe() + ">"; });

  py::class_<GaussianTarget>(m, "GaussianTarget")
      .def(py::init<Vec, Mat>(), py::arg("mu"), py::arg("sigma"))
      .def_static("iso", &GaussianTarget::iso)
      .def_static("heterosc", &GaussianTarget::heterosc)
      .def_static("corr", &GaussianTarget::corr)
      .def_static("stationary", &GaussianTarget::stationary, py::arg("d"), py::arg("sigma2") = 1.0)
      .def_property_readonly("mu", &GaussianTarget::mu)
      .def_property_readonly("sigma", &GaussianTarget::Sigma)
      .def_property_readonly("dim", &GaussianTarget::dim)
      .def("sample", &GaussianTarget::sample, py::arg("n"), py::arg("seed"))
      .def("log_density", &GaussianTarget::log_density);

  py::class_<ScoreNetParams>(m, "ScoreNetParams")
      .def_property_readonly("d", &ScoreNetParams::d)
      .def_property_readonly("width", &ScoreNetParams::width)
      .def("save", [](const ScoreNetParams& p, const std::string& path) { save_params(p, path); })
      .def_static("load", [](const std::string& path) { return load_params(path); })
      .def("__call__", [](const ScoreNetParams& p, double t, const RowMat& x) {
        RowMat out;
        net_forward_rows(p, t, x, out);
        return out;
      });

  m.def("forward_exact",
        [](const GaussianTarget& target, const Schedule& sched, double t, std::size_t n, std::uint64_t seed) {
          return forward_exact(target, sched, t, n, seed).data;
        },
        py::arg("target"), py::arg("schedule"), py::arg("t"), py::arg("n"), py::arg("seed"));

  m.def("sample",
        [](const GaussianTarget& target, const Schedule& sched, std::size_t steps, std::size_t n,
           const py::object& score, const std::string& scheme, std::uint64_t seed) {
          const ScoreSource src = make_score(score, target, sched);
          return backward_sample(parse_scheme(scheme), src, sched, TimeGrid(steps, sched.T()), n,
                                 target.dim(), seed)
              .data;
        },
        py::arg("target"), py::arg("schedule"), py::arg("steps"), py::arg("n"),
        py::arg("score") = "exact", py::arg("scheme") = "ei", py::arg("seed") = 0,
        "Backward sampler; score is 'exact', 'zero' or a ScoreNetParams.");

  m.def("train",
        [](const GaussianTarget& target, const Schedule& sched, std::size_t n_train, const std::string& loss,
           std::size_t epochs, double lr, int width, std::uint64_t seed) {
          TrainConfig cfg;
          cfg.loss = parse_loss(loss);
          cfg.epochs = epochs;
          cfg.learning_rate = lr;
          cfg.width = width;
          cfg.seed = seed;
          auto res = train(target, sched, cfg, n_train, seed + 1);
          return py::make_tuple(res.params, res.epoch_loss);
        },
        py::arg("target"), py::arg("schedule"), py::arg("n_train") = 10000, py::arg("loss") = "explicit",
        py::arg("epochs") = 20, py::arg("lr") = 1e-4, py::arg("width") = 256, py::arg("seed") = 0,
        "Returns (params, per-epoch losses).");

  m.def("kl_bound",
        [](const GaussianTarget& target, const Schedule& sched, std::size_t steps, const py::object& score,
           std::size_t n_mc, std::uint64_t seed, bool refined) {
          const ScoreSource src = make_score(score, target, sched);
          return to_dict(kl_bound(target, sched, TimeGrid(steps, sched.T()), src,
                                  src.is_analytic() ? 0 : n_mc, seed, refined));
        },
        py::arg("target"), py::arg("schedule"), py::arg("steps") = 500, py::arg("score") = "exact",
        py::arg("n_mc") = 500, py::arg("seed") = 0, py::arg("refined") = false);

  m.def("w2_bound",
        [](const GaussianTarget& target, const Schedule& sched, std::size_t steps, double eps) {
          const TimeGrid grid(steps, sched.T());
          return to_dict(w2_bound(sched, grid, gaussian_bound_constants(target, sched, grid), eps));
        },
        py::arg("target"), py::arg("schedule"), py::arg("steps") = 500, py::arg("eps") = 0.0);

  m.def("fit_gaussian", &fit_gaussian);
  m.def("gaussian_kl", &gaussian_kl);
  m.def("gaussian_w2", &gaussian_w2);
  m.def("sliced_w2", &sliced_w2, py::arg("a"), py::arg("b"), py::arg("n_proj") = 2000, py::arg("seed") = 0);
  m.def("knn_kl", [](const RowMat& p, const RowMat& q, int k) { return knn_kl(p, q, k).value; },
        py::arg("p"), py::arg("q"), py::arg("k") = 0);
  m.def("nll", [](const GaussianTarget& g, const RowMat& x) { return nll(g, x); });

  py::class_<PreprocessTransform>(m, "PreprocessTransform")
      .def_readonly("mu", &PreprocessTransform::mu)
      .def_readonly("d_scale", &PreprocessTransform::d_scale)
      .def_readonly("kappa", &PreprocessTransform::kappa)
      .def("apply", py::overload_cast<const RowMat&>(&PreprocessTransform::apply, py::const_))
      .def("inverse", py::overload_cast<const RowMat&>(&PreprocessTransform::inverse, py::const_))
      .def("transfer_bound", &PreprocessTransform::transfer_bound)
      .def("to_json", &PreprocessTransform::to_json);
  m.def("fit_transform", [](const RowMat& x) {
    auto [t, y] = fit_transform(x);
    return py::make_tuple(t, y);
  });

  m.def("sweep",
        [](const GaussianTarget& target, const std::vector<double>& a_values, const std::string& metric,
           std::size_t steps, const std::vector<std::string>& metrics, std::size_t n_gen, std::uint64_t seed) {
          SweepSpec spec;
          spec.metric = parse_bound_metric(metric);
          spec.target = target;
          spec.steps = steps;
          spec.metrics = metrics;
          spec.n_gen = n_gen;
          spec.seed = seed;
          const SweepResult r = sweep(spec, a_values);
          py::list rows;
          for (const auto& row : r.rows) {
            py::dict d;
            d["a"] = row.a;
            d["ok"] = row.ok;
            d["error"] = row.error;
            d["bound_total"] = row.bound_total;
            d["bound_e1"] = row.bound_e1;
            d["bound_e2"] = row.bound_e2;
            d["bound_e3_or_eps"] = row.bound_e3_or_eps;
            d["emp_mean"] = opt(row.emp_mean);
            rows.append(d);
          }
          return py::make_tuple(r.a_star, rows);
        },
        py::arg("target"), py::arg("a_values"), py::arg("metric") = "kl", py::arg("steps") = 500,
        py::arg("metrics") = std::vector<std::string>{}, py::arg("n_gen") = 10000, py::arg("seed") = 0,
        "Exact-score sweep over the parametric family; returns (a_star, rows).");
}
