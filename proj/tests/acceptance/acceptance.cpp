// Acceptance checks. Each criterion prints its individual checks followed by
// one PASS/FAIL line; the exit status is nonzero when any check fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sgm/bounds.hpp"
#include "sgm/diffusion.hpp"
#include "sgm/io.hpp"
#include "sgm/metrics.hpp"
#include "sgm/preprocess.hpp"
#include "sgm/rng.hpp"
#include "sgm/scorenet.hpp"
#include "sgm/targets.hpp"
#include "sgm/tuner.hpp"

using namespace sgm;
namespace fs = std::filesystem;

namespace {

class Checker {
 public:
  void check(bool ok, const std::string& what) {
    std::cout << (ok ? "  ok    " : "  FAIL  ") << what << "\n" << std::flush;
    ok_ = ok_ && ok;
  }
  bool ok() const { return ok_; }

 private:
  bool ok_ = true;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stdev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Random SPD covariance with eigenvalues in [lo, hi].
GaussianTarget random_gaussian(int d, std::uint64_t seed, double lo, double hi) {
  rng::Stream st(seed);
  Mat a(d, d);
  st.fill_normal(a.reshaped());
  Eigen::HouseholderQR<Mat> qr(a);
  const Mat q = qr.householderQ();
  Vec ev(d), mu(d);
  for (int i = 0; i < d; ++i) ev(i) = lo + (hi - lo) * st.uniform();
  st.fill_normal(mu);
  Mat s = q * ev.asDiagonal() * q.transpose();
  return GaussianTarget(mu, 0.5 * (s + s.transpose()));
}

Mat spd_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
bool criterion1() {
  Checker c;
  const std::size_t n = 100000;
  for (int d : {1, 5}) {
    const auto p = random_gaussian(d, 10 + d, 0.4, 1.6);
    const auto q = random_gaussian(d, 20 + d, 0.5, 2.0);
    const RowMat x = p.sample(n, 30 + d);

    // KL(p||q) as the mean log-likelihood ratio.
    double kl_mc = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Vec xi = x.row(i).transpose();
      kl_mc += p.log_density(xi) - q.log_density(xi);
    }
    kl_mc /= static_cast<double>(n);
    const double kl = gaussian_kl(p, q);
    c.check(rel(kl, kl_mc) <= 0.02, "d=" + std::to_string(d) + " KL closed " + fmt(kl) + " vs MC " + fmt(kl_mc));

    // W2: transport cost of the optimal affine map under p.
    double w2_mc = 0.0;
    if (d == 1) {
      const RowMat y = q.sample(n, 40 + d);
      std::vector<double> a(x.data(), x.data() + n), b(y.data(), y.data() + n);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      for (std::size_t i = 0; i < n; ++i) w2_mc += (a[i] - b[i]) * (a[i] - b[i]);
      w2_mc = std::sqrt(w2_mc / static_cast<double>(n));
    } else {
      const Mat sp = spd_sqrt(p.Sigma());
      const Mat spi = sp.inverse();
      const Mat A = spi * spd_sqrt(sp * q.Sigma() * sp) * spi;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Vec xi = x.row(i).transpose();
        const Vec ti = q.mu() + A * (xi - p.mu());
        w2_mc += (xi - ti).squaredNorm();
      }
      w2_mc = std::sqrt(w2_mc / static_cast<double>(n));
    }
    const double w2 = gaussian_w2(p, q);
    c.check(rel(w2, w2_mc) <= 0.02, "d=" + std::to_string(d) + " W2 closed " + fmt(w2) + " vs MC " + fmt(w2_mc));

    // Relative Fisher information to N(0, I).
    double fi_mc = 0.0;
    const Mat prec = p.Sigma().inverse();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Vec xi = x.row(i).transpose();
      fi_mc += (-prec * (xi - p.mu()) + xi).squaredNorm();
    }
    fi_mc /= static_cast<double>(n);
    const double fi = fisher_to_stationary(p, 1.0);
    c.check(rel(fi, fi_mc) <= 0.02, "d=" + std::to_string(d) + " Fisher closed " + fmt(fi) + " vs MC " + fmt(fi_mc));
  }

  // iso d=50 composites, derived by hand: N(1, I/2) against N(0, I).
  const int d = 50;
  const double kl_oracle = 0.5 * d * (0.5 + 1.0 - 1.0 - std::log(0.5));
  const double fisher_oracle = d * (1.0 + 0.5);
  const double int_beta = 0.1 + 0.5 * (20.0 - 0.1);
  const double e1_oracle = kl_oracle * std::exp(-int_beta);
  const double e3_oracle = 2.0 * (1.0 / 500.0) * 20.0 * fisher_oracle;
  const auto iso = GaussianTarget::iso(d);
  const auto sched = Schedule::linear();
  const auto rep = kl_bound(iso, sched, TimeGrid(500, 1.0), ScoreSource::analytic(iso, sched), 0, 1, false);
  const auto div = closed_form_divergences(iso, GaussianTarget::stationary(d, 1.0));
  c.check(rel(div.kl, kl_oracle) <= 1e-6 && std::abs(div.kl - 29.8286) <= 1e-4,
          "KL(data||stationary) = " + fmt(div.kl));
  c.check(rel(fisher_to_stationary(iso, 1.0), fisher_oracle) <= 1e-6 && fisher_oracle == 75.0,
          "Fisher = " + fmt(fisher_to_stationary(iso, 1.0)));
  c.check(rel(rep.e1, e1_oracle) <= 1e-6 && std::abs(rep.e1 - 1.287e-3) <= 2e-6, "E1 = " + fmt(rep.e1));
  c.check(rel(rep.e3, e3_oracle) <= 1e-6 && e3_oracle == 6.0, "E3 = " + fmt(rep.e3));
  return c.ok();
}

// ---------------------------------------------------------------------------
bool criterion2() {
  Checker c;
  const auto g = random_gaussian(5, 7, 0.3, 2.5);
  const auto sched = Schedule::parametric(2.0);
  rng::Stream st(11);
  double worst = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < 100; ++i) {
    const double t = 0.02 + 0.98 * st.uniform();
    Vec x(5);
    st.fill_normal(x);
    const Vec an = gaussian_score(g, sched, t, x);
    for (int j = 0; j < 5; ++j) {
      Vec up = x, dn = x;
      up(j) += h;
      dn(j) -= h;
      const double fd = (gaussian_marginal_log_density(g, sched, t, up) -
                         gaussian_marginal_log_density(g, sched, t, dn)) / (2 * h);
      worst = std::max(worst, std::abs(fd - an(j)));
    }
  }
  c.check(worst <= 1e-4, "analytic score vs finite differences, max abs err " + fmt(worst));

  const int d = 2, W = 8, n = 32;
  ScoreNetParams p = ScoreNetParams::kaiming(d, W, 5);
  for (std::size_t k = 0; k < p.tensors().size(); ++k) {
    auto m = p.tensor(k);
    if (m.cols() == 1) st.fill_normal(m.reshaped());
  }
  Vec t(n);
  RowMat x(n, d), y(n, d);
  for (int i = 0; i < n; ++i) t(i) = st.uniform();
  st.fill_normal(x.reshaped());
  st.fill_normal(y.reshaped());
  auto loss = [&] { return (net_forward_batch(p, t, x) - y).rowwise().squaredNorm().mean(); };
  const Gradient grad = net_backward(p, t, x, y);
  double num = 0.0, den = 0.0, worst_entry = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(p.size()); ++i) {
    const double keep = p.flat()(i);
    p.flat()(i) = keep + h;
    const double up = loss();
    p.flat()(i) = keep - h;
    const double dn = loss();
    p.flat()(i) = keep;
    const double fd = (up - dn) / (2 * h);
    num += (fd - grad.grad.flat()(i)) * (fd - grad.grad.flat()(i));
    den += fd * fd;
    worst_entry = std::max(worst_entry, std::abs(fd - grad.grad.flat()(i)) /
                                            std::max({std::abs(fd), std::abs(grad.grad.flat()(i)), 1e-6}));
  }
  const double rel_err = std::sqrt(num / den);
  c.check(rel_err <= 1e-4, "backprop vs finite differences over all " + std::to_string(p.size()) +
                               " parameters, relative error " + fmt(rel_err) + " (worst entry " +
                               fmt(worst_entry) + ")");
  return c.ok();
}

// ---------------------------------------------------------------------------
bool criterion3() {
  Checker c;
  {
    const GaussianTarget g = random_gaussian(2, 3, 0.3, 1.5);
    const auto sched = Schedule::linear();
    const double t = 0.3;
    const std::size_t n = 100000;
    const RowMat exact = forward_exact(g, sched, t, n, 1).data;
    // Euler-Maruyama on the forward SDE, 4000 steps.
    RowMat x = g.sample(n, 2);
    const int steps = 4000;
    const double h = t / steps;
    rng::Stream st(3);
    for (int k = 0; k < steps; ++k) {
      const double b = sched.beta(k * h);
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        double& v = x.data()[i];
        v += -0.5 * b * v * h + std::sqrt(b * h) * st.normal();
      }
    }
    for (int j = 0; j < 2; ++j) {
      const Vec a = exact.col(j), b = x.col(j);
      const double ma = a.mean(), mb = b.mean();
      const double va = (a.array() - ma).square().sum() / (n - 1.0);
      const double vb = (b.array() - mb).square().sum() / (n - 1.0);
      const double se_m = std::sqrt((va + vb) / n);
      const double se_v = std::sqrt(2.0 / (n - 1.0) * (va * va + vb * vb));
      c.check(std::abs(ma - mb) <= 3 * se_m, "forward mean coord " + std::to_string(j) + ": " + fmt(ma) + " vs EM " + fmt(mb));
      c.check(std::abs(va - vb) <= 3 * se_v, "forward var coord " + std::to_string(j) + ": " + fmt(va) + " vs EM " + fmt(vb));
    }
    // Cross moment.
    const double ca = ((exact.col(0).array() - exact.col(0).mean()) * (exact.col(1).array() - exact.col(1).mean())).mean();
    const double cb = ((x.col(0).array() - x.col(0).mean()) * (x.col(1).array() - x.col(1).mean())).mean();
    const double se_c = std::sqrt(2.0 / n) * std::sqrt(g.Sigma()(0, 0) * g.Sigma()(1, 1) + 1.0);
    c.check(std::abs(ca - cb) <= 3 * se_c, "forward covariance: " + fmt(ca) + " vs EM " + fmt(cb));
  }
  {
    const auto sched = Schedule::linear();
    const std::size_t n = 100000;
    for (std::size_t N : {1, 500}) {
      const RowMat y = backward_ei(ScoreSource::zero(1.0), sched, TimeGrid(N, 1.0), n, 2, 7).data;
      const double m = y.mean();
      const double v = (y.array() - m).square().sum() / (y.size() - 1.0);
      const double cnt = static_cast<double>(y.size());
      c.check(std::abs(m) <= 3 / std::sqrt(cnt) && std::abs(v - 1.0) <= 3 * std::sqrt(2.0 / cnt),
              "EI zero score N=" + std::to_string(N) + ": mean " + fmt(m) + ", var " + fmt(v));
    }
  }
  {
    const auto iso = GaussianTarget::iso(10);
    const auto sched = Schedule::linear();
    const auto score = ScoreSource::analytic(iso, sched);
    for (Scheme s : {Scheme::EM, Scheme::EI}) {
      std::vector<double> means, stds;
      for (std::size_t N : {50, 125, 250, 500}) {
        std::vector<double> w;
        for (std::uint64_t r = 0; r < 10; ++r)
          w.push_back(gaussian_w2(iso, fit_gaussian(backward_sample(s, score, sched, TimeGrid(N, 1.0), 10000, 10, 100 + r).data)));
        means.push_back(mean(w));
        stds.push_back(stdev(w));
        std::cout << "    " << to_string(s) << " N=" << N << " W2 " << fmt(means.back()) << " +- " << fmt(stds.back()) << "\n";
      }
      c.check(means.back() <= 0.15, to_string(s) + " exact-score W2 at N=500: " + fmt(means.back()));
      bool mono = true;
      for (std::size_t i = 1; i < means.size(); ++i)
        mono = mono && means[i] <= means[i - 1] + std::max(stds[i], stds[i - 1]);
      c.check(mono, to_string(s) + " W2 nonincreasing in N within 1 MC std");
    }
  }
  return c.ok();
}

// ---------------------------------------------------------------------------
bool criterion4() {
  Checker c;
  SweepSpec spec;
  spec.target = GaussianTarget::iso(10);
  spec.n_gen = 10000;
  spec.n_train = 10000;
  spec.steps = 500;
  spec.seed = 4;
  const auto a = a_range(-10, 10, 1);

  spec.metric = BoundMetric::KL;
  spec.metrics = {"gauss-kl"};
  const auto kl = sweep(spec, a, 3);
  bool ok = true;
  for (const auto& r : kl.rows) {
    const bool row_ok = r.ok && r.bound_total >= *r.emp_mean - 3 * *r.emp_std;
    if (!row_ok) std::cout << "    KL a=" << r.a << " bound " << fmt(r.bound_total) << " emp " << fmt(*r.emp_mean) << "\n";
    ok = ok && row_ok;
  }
  c.check(ok, "KL bound >= empirical KL - 3 std at every a (emp at a=0: " + fmt(*kl.rows[10].emp_mean) +
                  ", bound " + fmt(kl.rows[10].bound_total) + ")");

  spec.metric = BoundMetric::W2;
  spec.metrics = {"gauss-w2"};
  spec.rescale = true;
  spec.eps_mode = EpsMode::Estimate;
  const auto w2 = sweep(spec, a, 3);
  ok = true;
  double tightest = INFINITY;
  for (const auto& r : w2.rows) {
    const bool row_ok = r.ok && r.bound_total >= *r.emp_mean - 3 * *r.emp_std;
    if (!row_ok) std::cout << "    W2 a=" << r.a << " bound " << fmt(r.bound_total) << " emp " << fmt(*r.emp_mean) << "\n";
    if (r.ok) tightest = std::min(tightest, r.bound_total / *r.emp_mean);
    ok = ok && row_ok;
  }
  c.check(ok, "W2 bound (rescaled, eps estimated = 0) >= empirical W2 - 3 std at every a (min ratio " + fmt(tightest) + ")");
  return c.ok();
}

// ---------------------------------------------------------------------------
bool criterion5(const fs::path& work) {
  Checker c;
  {
    SweepSpec spec;
    spec.metric = BoundMetric::W2;
    spec.target = GaussianTarget::iso(50);
    const auto r = sweep(spec, a_range(-10, 10, 1));
    c.check(r.a_star > -10 && r.a_star < 10, "iso d=50 W2 bound (eps = 0) argmin a* = " + fmt(r.a_star) + " is interior");
  }
  const fs::path cache = work / "criterion5-cache";
  fs::remove_all(cache);
  SweepSpec spec;
  spec.metric = BoundMetric::KL;
  spec.target = GaussianTarget::iso(5);
  spec.score = ScoreMode::Trained;
  spec.train.loss = LossKind::Explicit;
  spec.train.epochs = 20;
  spec.train.learning_rate = 1e-4;
  spec.n_train = 10000;
  spec.steps = 500;
  spec.n_mc = 500;
  spec.n_gen = 10000;
  spec.seed = 5;
  spec.cache_dir = cache.string();

  const auto t0 = std::chrono::steady_clock::now();
  const auto coarse = sweep(spec, a_range(-10, 10, 1), 1);
  for (const auto& r : coarse.rows)
    std::cout << "    a=" << fmt(r.a) << " KL bound " << fmt(r.bound_total) << " (E1 " << fmt(r.bound_e1)
              << ", E2 " << fmt(r.bound_e2) << ", E3 " << fmt(r.bound_e3_or_eps) << ")\n";
  const auto fine = refine(spec, coarse, 0.25, 1.0, 3);
  std::cout << "    coarse a* = " << fmt(coarse.a_star) << ", refined a* = " << fmt(fine.a_star) << "\n";
  c.check(fine.a_star >= 0.0 && fine.a_star <= 5.0, "d=5 trained KL-bound a* = " + fmt(fine.a_star) + " in [0, 5]");

  spec.metrics = {"gauss-kl"};
  const auto rows = compare_schedules(spec, {Schedule::linear(), Schedule::parametric(fine.a_star)}, 3);
  const double pooled = std::sqrt(0.5 * (*rows[0].std * *rows[0].std + *rows[1].std * *rows[1].std));
  c.check(rows[1].mean <= rows[0].mean + pooled,
          "a* mean KL " + fmt(rows[1].mean) + " +- " + fmt(*rows[1].std) + " vs linear " + fmt(rows[0].mean) +
              " +- " + fmt(*rows[0].std) + " (gain " + fmt(*rows[1].gain_pct) + "%)");
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60;
  std::cout << "    trained protocol took " << fmt(minutes) << " min\n";
  fs::remove_all(cache);
  return c.ok();
}

// ---------------------------------------------------------------------------
bool criterion6() {
  Checker c;
  const auto std_normal = [](int d) { return GaussianTarget::stationary(d, 1.0); };
  const RowMat a = std_normal(5).sample(3000, 1);
  c.check(sliced_w2(a, a, 2000, 2) == 0.0, "sliced W2 of identical batches is 0");

  const RowMat p1 = std_normal(1).sample(5000, 3);
  RowMat q1 = std_normal(1).sample(5000, 4);
  q1.array() = 2.0 * q1.array() + 0.5;
  std::vector<double> u(p1.data(), p1.data() + p1.size()), v(q1.data(), q1.data() + q1.size());
  std::sort(u.begin(), u.end());
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
  const double oracle = std::sqrt(s / static_cast<double>(u.size()));
  const double sw = sliced_w2(p1, q1, 2000, 5);
  c.check(std::abs(sw - oracle) <= 1e-12 * oracle, "d=1 sliced W2 " + fmt(sw) + " equals sorting oracle " + fmt(oracle));

  const RowMat x = std_normal(5).sample(10000, 6);
  const auto eq = knn_kl(x.topRows(5000), x.bottomRows(5000));
  c.check(eq.k == 3 && std::abs(eq.value) <= 0.1, "k-NN KL equal laws d=5: " + fmt(eq.value) + " (k=" + std::to_string(eq.k) + ")");
  RowMat far = std_normal(1).sample(5000, 8);
  far.array() += 3.0;
  const auto sep = knn_kl(std_normal(1).sample(5000, 7), far);
  c.check(std::abs(sep.value - 4.5) <= 0.2 * 4.5, "k-NN KL N(0,1) vs N(3,1): " + fmt(sep.value) + " vs 4.5");

  const int d = 50;
  const Target g = std_normal(d);
  const double expected = 0.5 * d * (1.0 + std::log(2.0 * std::numbers::pi));
  const double val = nll(g, std_normal(d).sample(10000, 9));
  c.check(rel(val, expected) <= 0.02, "NLL d=50: " + fmt(val) + " vs " + fmt(expected));
  return c.ok();
}

// ---------------------------------------------------------------------------
bool criterion7() {
  Checker c;
  const int d = 10;
  const auto g = GaussianTarget::heterosc(d);
  const RowMat data = g.sample(10000, 1);
  const auto [tf, scaled] = fit_transform(data);
  const auto pushed = tf.apply(g);
  const double ratio = pushed.lambda_min() / pushed.lambda_max();
  c.check(std::abs(ratio - 1.0) <= 0.05, "post-transform lambda_min/lambda_max = " + fmt(ratio));

  const auto fitted = fit_gaussian(scaled);
  const auto sched = Schedule::linear();
  const TimeGrid grid(500, 1.0);
  double min_c = INFINITY;
  for (std::size_t k = 0; k <= grid.N(); ++k) min_c = std::min(min_c, contraction_constants(fitted, sched, grid.t(k)).C);
  c.check(min_c >= 0.0, "post-transform C_t >= 0 on the grid (min " + fmt(min_c) + ")");

  const double rt = (tf.inverse(scaled) - data).cwiseAbs().maxCoeff();
  c.check(rt <= 1e-10, "round-trip max abs error " + fmt(rt));

  SweepSpec spec;
  spec.metric = BoundMetric::W2;
  spec.target = g;
  spec.rescale = true;
  spec.metrics = {"gauss-w2"};
  spec.n_gen = 10000;
  spec.seed = 7;
  const auto ev = evaluate_schedule(spec, sched, 0);
  c.check(ev.bound_total >= ev.empirical.front(),
          "transferred W2 bound " + fmt(ev.bound_total) + " >= descaled empirical W2 " + fmt(ev.empirical.front()));
  return c.ok();
}

// ---------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool criterion8(std::string sgm, const fs::path& work) {
  Checker c;
  if (!sgm.empty()) sgm = fs::absolute(sgm).string();
  if (sgm.empty() || !fs::exists(sgm)) {
    c.check(false, "sgm executable not found: '" + sgm + "'");
    return false;
  }
  const fs::path root = work / "criterion8";
  fs::remove_all(root);
  fs::create_directories(root);

  struct Command {
    std::string name;
    std::string args;
    std::vector<std::string> outputs;
  };
  const std::string common = " --seed 17 --dim 4 --steps 60";
  const std::vector<Command> commands = {
      {"generate", "generate" + common + " --n 3000 --out gen.bin", {"gen.bin"}},
      {"generate-em", "generate" + common + " --scheme em --n 3000 --target corr --out gen-em.bin", {"gen-em.bin"}},
      {"train", "train" + common + " --width 16 --epochs 2 --n-train 2000 --preprocess rescale --out net.bin --report train.json",
       {"net.bin", "net.bin.transform.json", "train.json"}},
      {"bound-kl", "bound" + common + " --metric kl --score net:net.bin --n-mc 200 --out kl.json", {"kl.json"}},
      {"bound-w2", "bound" + common + " --metric w2 --eps estimate --score net:net.bin --n-mc 200 --out w2.json", {"w2.json"}},
      {"metrics", "metrics" + common + " --generated gen.bin --metric gauss-kl --metric gauss-w2 --metric sliced-w2 --metric knn-kl --metric nll --projections 200 --out metrics.json",
       {"metrics.json"}},
      {"tune", "tune" + common + " --metric w2 --a-min -3 --a-max 3 --refine-step 0.5 --runs 2 --empirical gauss-w2 --empirical sliced-w2 --n 1000 --out sweep.csv --json sweep.json --compare compare.csv",
       {"sweep.csv", "sweep.json", "compare.csv"}},
      {"tune-trained", "tune" + common + " --metric kl --a-min -1 --a-max 1 --score trained --epochs 1 --n-train 1000 --n-mc 50 --out sweep-tr.csv --json sweep-tr.json --cache-dir cache",
       {"sweep-tr.csv", "sweep-tr.json"}},
      {"plot", "plot --csv sweep.csv --y bound_total,emp_mean --log --out sweep.svg", {"sweep.svg"}},
      {"run", "run run.cfg", {"run/config.cfg", "run/sweep.csv", "run/metrics.csv", "run/compare.csv", "run/report.json", "run/sweep.svg"}},
  };
  io::write_text((root / "run.cfg").string(),
                 "target.kind = heterosc\ntarget.dim = 3\ngrid.steps = 40\nsweep.a-min = -2\nsweep.a-max = 2\n"
                 "sweep.refine = true\nsweep.refine-step = 0.5\nsweep.runs = 2\nsweep.compare = true\n"
                 "bound.metric = w2\npreprocess = rescale\ntrain.n = 1500\nsample.n = 1000\n"
                 "metrics = gauss-kl,sliced-w2\nmetrics.projections = 100\nseed = 3\noutput.dir = run\n");

  std::vector<std::vector<std::string>> first(commands.size());
  const std::vector<std::pair<int, int>> passes = {{1, 0}, {8, 1}, {1, 2}, {8, 3}};
  bool all_ran = true;
  for (const auto& [threads, pass] : passes) {
    fs::remove_all(root / "cache");
    fs::remove_all(root / "run");
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const std::string cmd = "cd '" + root.string() + "' && SGM_THREADS=" + std::to_string(threads) + " '" + sgm +
                              "' " + commands[i].args + " > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        all_ran = false;
        std::cout << "    command failed (" << rc << "): " << commands[i].args << "\n";
      }
      std::vector<std::string> contents;
      for (const auto& out : commands[i].outputs) contents.push_back(slurp(root / out));
      if (pass == 0) {
        first[i] = contents;
        for (std::size_t k = 0; k < contents.size(); ++k)
          if (contents[k].empty()) {
            all_ran = false;
            std::cout << "    empty output " << commands[i].outputs[k] << "\n";
          }
      } else {
        for (std::size_t k = 0; k < contents.size(); ++k) {
          if (contents[k] != first[i][k]) {
            c.check(false, commands[i].name + ": " + commands[i].outputs[k] + " differs on pass " +
                               std::to_string(pass) + " (SGM_THREADS=" + std::to_string(threads) + ")");
          }
        }
      }
    }
  }
  c.check(all_ran, "every command succeeded and wrote its outputs");
  if (c.ok())
    c.check(true, std::to_string(commands.size()) + " commands byte-identical across 4 runs at SGM_THREADS 1 and 8");
  return c.ok();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int criterion = 0;
  std::string sgm;
  std::string work = (fs::temp_directory_path() / "sgm-acceptance").string();
  app.add_option("--criterion", criterion, "Criterion number (1-8); 0 runs all");
  app.add_option("--sgm", sgm, "Path to the sgm executable (criterion 8)");
  app.add_option("--work-dir", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  const char* names[] = {"",
                         "closed-form oracle suite",
                         "score and gradient correctness",
                         "sampler invariants",
                         "bound dominance",
                         "interior minimum and a* non-inferiority",
                         "estimator self-tests",
                         "preprocessing contract",
                         "CLI determinism"};
  bool all = true;
  for (int k = 1; k <= 8; ++k) {
    if (criterion != 0 && criterion != k) continue;
    std::cout << "criterion " << k << ": " << names[k] << "\n" << std::flush;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      switch (k) {
        case 1: ok = criterion1(); break;
        case 2: ok = criterion2(); break;
        case 3: ok = criterion3(); break;
        case 4: ok = criterion4(); break;
        case 5: ok = criterion5(work); break;
        case 6: ok = criterion6(); break;
        case 7: ok = criterion7(); break;
        case 8: ok = criterion8(sgm, work); break;
      }
    } catch (const std::exception& e) {
      std::cout << "  exception: " << e.what() << "\n";
      ok = false;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << k << ": " << names[k] << " (" << fmt(secs) << " s)\n"
              << std::flush;
    all = all && ok;
  }
  return all ? 0 : 1;
}
