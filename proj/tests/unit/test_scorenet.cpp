#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sgm/error.hpp"
#include "sgm/rng.hpp"
#include "sgm/scorenet.hpp"

using namespace sgm;

namespace {

ScoreNetParams random_params(int d, int width, std::uint64_t seed) {
  ScoreNetParams p = ScoreNetParams::kaiming(d, width, seed);
  rng::Stream st(seed + 1);
  for (std::size_t i = 0; i < p.tensors().size(); ++i) {
    auto m = p.tensor(i);
    if (m.cols() == 1)
      for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = 0.3 * st.normal();
  }
  return p;
}

double loss(const ScoreNetParams& p, const Vec& t, const RowMat& x, const RowMat& y) {
  return (net_forward_batch(p, t, x) - y).rowwise().squaredNorm().mean();
}

struct Batch {
  Vec t;
  RowMat x, y;
};

Batch random_batch(int n, int d, std::uint64_t seed) {
  rng::Stream st(seed);
  Batch b{Vec(n), RowMat(n, d), RowMat(n, d)};
  for (int i = 0; i < n; ++i) b.t(i) = st.uniform();
  st.fill_normal(b.x.reshaped());
  st.fill_normal(b.y.reshaped());
  return b;
}

}  // namespace

TEST_SUITE("scorenet") {
  TEST_CASE("zero parameters give zero output") {
    const ScoreNetParams p(3, 16);
    CHECK(net_forward(p, 0.4, Vec::Ones(3)).norm() == 0.0);
  }

  TEST_CASE("forward is pure and batch paths agree") {
    const auto p = random_params(3, 16, 4);
    const Vec x = Vec::LinSpaced(3, -1, 1);
    const Vec a = net_forward(p, 0.3, x);
    CHECK((a - net_forward(p, 0.3, x)).norm() == 0.0);
    RowMat xs(2, 3);
    xs.row(0) = x.transpose();
    xs.row(1) = -x.transpose();
    const RowMat b = net_forward_batch(p, Vec::Constant(2, 0.3), xs);
    CHECK((b.row(0).transpose() - a).norm() <= 1e-12);
  }

  TEST_CASE("output bias shifts one coordinate") {
    auto p = random_params(3, 16, 5);
    const Vec x = Vec::Ones(3);
    const Vec before = net_forward(p, 0.7, x);
    p.b_out()(1, 0) += 0.125;
    const Vec after = net_forward(p, 0.7, x);
    CHECK(after(0) == before(0));
    CHECK(after(2) == before(2));
    CHECK(after(1) - before(1) == doctest::Approx(0.125).epsilon(1e-14));
  }

  TEST_CASE("time embedding layout") {
    const Vec e = time_embedding(8, 0.0);
    CHECK(e.head(4).norm() == 0.0);
    CHECK((e.tail(4).array() == 1.0).all());
    const Vec e1 = time_embedding(8, 1.0);
    CHECK(e1(0) == doctest::Approx(std::sin(1.0)));
    CHECK(e1(1) == doctest::Approx(std::sin(std::pow(10000.0, -0.25))));
  }

  TEST_CASE("backprop matches finite differences") {
    const int d = 2, W = 8;
    auto p = random_params(d, W, 12);
    const Batch b = random_batch(16, d, 13);
    const Gradient g = net_backward(p, b.t, b.x, b.y);
    CHECK(g.loss == doctest::Approx(loss(p, b.t, b.x, b.y)).epsilon(1e-13));
    rng::Stream st(99);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto i = static_cast<Eigen::Index>(st.below(p.size()));
      const double keep = p.flat()(i);
      p.flat()(i) = keep + 1e-5;
      const double up = loss(p, b.t, b.x, b.y);
      p.flat()(i) = keep - 1e-5;
      const double down = loss(p, b.t, b.x, b.y);
      p.flat()(i) = keep;
      const double fd = (up - down) / 2e-5;
      const double an = g.grad.flat()(i);
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-7}));
    }
    CHECK(worst <= 1e-4);
  }

  TEST_CASE("gradient is linear in the residuals") {
    const auto p = random_params(2, 8, 3);
    const Batch b = random_batch(8, 2, 4);
    const RowMat out = net_forward_batch(p, b.t, b.x);
    CHECK(net_backward(p, b.t, b.x, out).grad.flat().norm() == 0.0);
    const RowMat y2 = out - 2.0 * (out - b.y);
    const Vec g1 = net_backward(p, b.t, b.x, b.y).grad.flat();
    const Vec g2 = net_backward(p, b.t, b.x, y2).grad.flat();
    CHECK((g2 - 2.0 * g1).norm() <= 1e-12 * g1.norm());
  }

  TEST_CASE("adam first step") {
    Adam opt(2, 0.1);
    Vec theta = Vec::Zero(2);
    Vec grad(2);
    grad << 3.0, -0.5;
    opt.step(theta, grad);
    // Bias-corrected first step moves by lr * sign(g) up to eps.
    CHECK(theta(0) == doctest::Approx(-0.1).epsilon(1e-7));
    CHECK(theta(1) == doctest::Approx(0.1).epsilon(1e-7));
  }

  TEST_CASE("training times are uniform") {
    const EpochDraw draw = draw_epoch(10000, 1, 1.0, 5, 0);
    std::vector<double> tau(draw.tau.data(), draw.tau.data() + draw.tau.size());
    std::sort(tau.begin(), tau.end());
    double ks = 0.0;
    const double n = static_cast<double>(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i)
      ks = std::max({ks, (i + 1) / n - tau[i], tau[i] - i / n});
    CHECK(ks < 1.63 / std::sqrt(n));
    CHECK(tau.front() > 0.0);
    CHECK(tau.back() < 1.0);
  }

  TEST_CASE("training reduces the loss and is deterministic") {
    const Target iso = GaussianTarget::iso(5);
    const auto sched = Schedule::linear();
    TrainConfig cfg;
    cfg.loss = LossKind::Explicit;
    cfg.epochs = 20;
    cfg.learning_rate = 1e-4;
    cfg.seed = 17;
    const auto a = train(iso, sched, cfg, 2000, 3);
    const auto b = train(iso, sched, cfg, 2000, 3);
    CHECK(a.epoch_loss.size() == 20);
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());
    std::vector<double> first(a.epoch_loss.begin(), a.epoch_loss.begin() + 5);
    std::vector<double> last(a.epoch_loss.end() - 5, a.epoch_loss.end());
    std::nth_element(first.begin(), first.begin() + 2, first.end());
    std::nth_element(last.begin(), last.begin() + 2, last.end());
    CHECK(last[2] < first[2]);
    CHECK((a.params.flat() - b.params.flat()).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("explicit loss needs a Gaussian target") {
    TrainConfig cfg;
    cfg.loss = LossKind::Explicit;
    CHECK_THROWS_AS(train(Target(FunnelTarget(2)), Schedule::linear(), cfg, 100, 1), UnsupportedOperation);
  }

  TEST_CASE("conditional and explicit losses differ by a parameter-free gap") {
    const int d = 2;
    const GaussianTarget g(Vec::Ones(d), 0.5 * Mat::Identity(d, d));
    const auto sched = Schedule::linear();
    const auto p1 = random_params(d, 16, 31);
    const auto p2 = random_params(d, 16, 32);
    const std::size_t n = 100000;
    const RowMat x0 = g.sample(n, 8);
    const EpochDraw draw = draw_epoch(n, d, 1.0, 9, 0);
    RowMat xt(n, d), ycond(n, d), yexp(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto fs = m_sigma(sched, draw.tau(r));
      xt.row(r) = fs.m * x0.row(r) + std::sqrt(fs.sig2) * draw.noise.row(r);
      ycond.row(r) = -draw.noise.row(r) / std::sqrt(fs.sig2);
      yexp.row(r) = gaussian_score(g, sched, draw.tau(r), xt.row(r).transpose()).transpose();
    }
    auto gap = [&](const ScoreNetParams& p) {
      const RowMat s = net_forward_batch(p, draw.tau, xt);
      return Vec((s - ycond).rowwise().squaredNorm() - (s - yexp).rowwise().squaredNorm());
    };
    const Vec diff = gap(p1) - gap(p2);
    const double mean = diff.mean();
    const double sd = std::sqrt((diff.array() - mean).square().sum() / (n - 1));
    CHECK(std::abs(mean) <= 3.0 * sd / std::sqrt(static_cast<double>(n)));
  }

  TEST_CASE("parameter file round trip") {
    const auto p = random_params(3, 8, 77);
    std::stringstream buf;
    save_params(p, buf);
    const auto q = load_params(buf);
    CHECK(q.d() == 3);
    CHECK(q.width() == 8);
    CHECK(q.layers() == 3);
    CHECK((q.flat() - p.flat()).cwiseAbs().maxCoeff() == 0.0);
    std::stringstream bad("NOTANETWORKFILE");
    CHECK_THROWS_AS(load_params(bad), IoError);
  }
}
