#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sgm/error.hpp"
#include "sgm/metrics.hpp"
#include "sgm/rng.hpp"

using namespace sgm;

namespace {

RowMat normal_rows(std::size_t n, int d, std::uint64_t seed, double shift = 0.0) {
  RowMat x = GaussianTarget(Vec::Zero(d), Mat::Identity(d, d)).sample(n, seed);
  x.col(0).array() += shift;
  return x;
}

// Minimal quadratic cost over all matchings.
double brute_force_w2(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::size_t> perm(b.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += (a[i] - b[perm[i]]) * (a[i] - b[perm[i]]);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(a.size()));
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("fit_gaussian") {
    RowMat same = RowMat::Ones(10, 3);
    CHECK_THROWS_AS(fit_gaussian(same), RankError);
    const RowMat x = normal_rows(100000, 5, 1);
    const auto g = fit_gaussian(x);
    CHECK(g.mu().cwiseAbs().maxCoeff() <= 0.02);
    CHECK((g.Sigma() - Mat::Identity(5, 5)).cwiseAbs().maxCoeff() <= 0.05);

    const RowMat small = normal_rows(200, 3, 2);
    Mat A(3, 3);
    A << 2, 0.5, 0, -1, 1, 0.3, 0, 0.2, 3;
    Vec b(3);
    b << 1, -2, 0.5;
    const RowMat y = (small * A.transpose()).rowwise() + b.transpose();
    const auto gx = fit_gaussian(small);
    const auto gy = fit_gaussian(y);
    CHECK((gy.mu() - (A * gx.mu() + b)).norm() <= 1e-12);
    CHECK((gy.Sigma() - A * gx.Sigma() * A.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("sliced W2 basics") {
    const RowMat a = normal_rows(500, 3, 3);
    CHECK(sliced_w2(a, a, 100, 1) == 0.0);
    const RowMat b = normal_rows(400, 3, 4, 0.5);
    CHECK(sliced_w2(a, b, 100, 7) == sliced_w2(b, a, 100, 7));
  }

  TEST_CASE("sliced W2 in one dimension is the sorted-sample distance") {
    const RowMat a = normal_rows(7, 1, 5);
    const RowMat b = normal_rows(7, 1, 6, 1.0);
    std::vector<double> va(a.data(), a.data() + 7), vb(b.data(), b.data() + 7);
    const double oracle = brute_force_w2(va, vb);
    CHECK(std::abs(sliced_w2(a, b, 50, 3) - oracle) <= 1e-14);
    CHECK(w2_1d(va, vb) == sliced_w2(a, b, 50, 3));
  }

  TEST_CASE("sliced W2 grows with the shift") {
    double prev = -1.0;
    for (double delta : {0.0, 1.0, 2.0}) {
      const double s = sliced_w2(normal_rows(2000, 2, 8), normal_rows(2000, 2, 9, delta), 500, 2);
      CHECK(s > prev);
      prev = s;
    }
  }

  TEST_CASE("k-NN KL") {
    const RowMat x = normal_rows(10000, 5, 10);
    const auto eq = knn_kl(x.topRows(5000), x.bottomRows(5000));
    CHECK(eq.k == 3);
    CHECK(std::abs(eq.value) <= 0.1);
    const auto far = knn_kl(normal_rows(5000, 1, 11), normal_rows(5000, 1, 12, 3.0));
    CHECK(far.value == doctest::Approx(4.5).epsilon(0.2));
    const RowMat small = normal_rows(50, 2, 13);
    const auto self = knn_kl(small, small, 1);
    CHECK(self.floored > 0);
    CHECK(std::isfinite(self.value));
  }

  TEST_CASE("negative log-likelihood") {
    const Target std1 = GaussianTarget(Vec::Zero(1), Mat::Identity(1, 1));
    CHECK(nll(std1, RowMat::Zero(1, 1)) == doctest::Approx(0.5 * std::log(2 * std::numbers::pi)));
    const int d = 50;
    const Target g = GaussianTarget(Vec::Zero(d), Mat::Identity(d, d));
    const double expected = 0.5 * d * (1.0 + std::log(2 * std::numbers::pi));
    CHECK(nll(g, std::get<GaussianTarget>(g).sample(10000, 3)) == doctest::Approx(expected).epsilon(0.02));
    // Scaling the covariance by s^2 adds d log s to every log-density.
    const Target wide = GaussianTarget(Vec::Zero(1), 4.0 * Mat::Identity(1, 1));
    RowMat at0 = RowMat::Zero(1, 1);
    CHECK(nll(wide, at0) - nll(std1, at0) == doctest::Approx(std::log(2.0)));
    CHECK_THROWS_AS(nll(std1, RowMat::Zero(2, 3)), ShapeError);
  }

  TEST_CASE("named metrics") {
    const auto g = GaussianTarget::stationary(5, 1.0);
    const RowMat ref = g.sample(100000, 1);
    const RowMat gen = g.sample(100000, 2);
    CHECK(evaluate_metric("gauss-kl", g, ref, gen, 10, 0, 1).value <= 0.02);
    CHECK(evaluate_metric("gauss-w2", g, ref, gen, 10, 0, 1).value <= 0.02);
    CHECK(fit_gaussian(ref).dim() == 5);
    CHECK(gaussian_kl(fit_gaussian(ref), fit_gaussian(gen)) <= 0.02);
    CHECK(gaussian_w2(fit_gaussian(ref), fit_gaussian(gen)) <= 0.02);
    CHECK_THROWS_AS(evaluate_metric("fid", g, ref, gen, 10, 0, 1), ConfigError);
  }
}
