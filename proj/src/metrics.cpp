#include "sgm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "sgm/error.hpp"
#include "sgm/parallel.hpp"
#include "sgm/rng.hpp"

namespace sgm {

namespace {

constexpr double kDistanceFloor = 1e-300;

RowMat subsample(const RowMat& x, std::size_t m, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::Stream s(seed);
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + s.below(n - i)]);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  RowMat out(static_cast<Eigen::Index>(m), x.cols());
  for (std::size_t i = 0; i < m; ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

// k-th smallest squared distance from y to the rows of x, skipping row `skip`.
double kth_sq_distance(const RowMat& x, const Eigen::RowVectorXd& y, int k, Eigen::Index skip,
                       std::vector<double>& best) {
  best.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    if (j == skip) continue;
    const double dist = (x.row(j) - y).squaredNorm();
    if (dist >= best.back()) continue;
    auto it = std::upper_bound(best.begin(), best.end(), dist);
    best.insert(it, dist);
    best.pop_back();
  }
  return best.back();
}

}  // namespace

GaussianTarget fit_gaussian(const RowMat& x) {
  const auto n = x.rows();
  const auto d = x.cols();
  if (n <= d) throw RankError("fitting a Gaussian needs more samples than dimensions");
  const Vec mean = x.colwise().mean().transpose();
  const RowMat centered = x.rowwise() - mean.transpose();
  Mat cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(cov, Eigen::EigenvaluesOnly);
  if (es.eigenvalues()(0) < GaussianTarget::kEigenFloor) {
    std::ostringstream os;
    os.precision(17);
    os << "sample covariance is rank deficient (smallest eigenvalue " << es.eigenvalues()(0) << ")";
    throw RankError(os.str());
  }
  return GaussianTarget(mean, cov);
}

double w2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) throw ShapeError("1-D W2 needs equal nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum / static_cast<double>(a.size()));
}

double sliced_w2(const RowMat& a, const RowMat& b, std::size_t n_proj, std::uint64_t seed) {
  if (a.cols() != b.cols()) throw ShapeError("sliced W2 needs batches of equal dimension");
  if (n_proj < 1) throw DomainError("sliced W2 needs at least one projection");
  const auto m = static_cast<std::size_t>(std::min(a.rows(), b.rows()));
  if (m < 1) throw DomainError("sliced W2 needs nonempty batches");
  const std::uint64_t sub_seed = rng::derive_named(seed, "subsample");
  const RowMat A = static_cast<std::size_t>(a.rows()) > m ? subsample(a, m, sub_seed) : a;
  const RowMat B = static_cast<std::size_t>(b.rows()) > m ? subsample(b, m, sub_seed) : b;
  const int d = static_cast<int>(a.cols());
  auto column = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  // Directions on S^0 are +-1 and W2 is sign invariant.
  if (d == 1) return w2_1d(column(A.col(0)), column(B.col(0)));

  const std::uint64_t dir_seed = rng::derive_named(seed, "projection");
  std::vector<double> sq(n_proj);
  parallel_for(n_proj, [&](std::size_t p) {
    rng::Stream s(rng::derive(dir_seed, p));
    Vec theta(d);
    do {
      s.fill_normal(theta);
    } while (theta.norm() == 0.0);
    theta.normalize();
    const double w = w2_1d(column(A * theta), column(B * theta));
    sq[p] = w * w;
  });
  double sum = 0.0;
  for (double v : sq) sum += v;
  return std::sqrt(sum / static_cast<double>(n_proj));
}

KnnKl knn_kl(const RowMat& p, const RowMat& q, int k) {
  if (p.cols() != q.cols()) throw ShapeError("k-NN KL needs batches of equal dimension");
  const int d = static_cast<int>(p.cols());
  if (k <= 0) k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
  const auto n = p.rows();
  const auto m = q.rows();
  if (n < k + 1 || m < k + 1) throw DomainError("k-NN KL needs at least k + 1 points per batch");

  std::vector<double> terms(static_cast<std::size_t>(n));
  std::vector<char> floored(static_cast<std::size_t>(n), 0);
  const std::size_t blocks = (static_cast<std::size_t>(n) + 63) / 64;
  parallel_for(blocks, [&](std::size_t blk) {
    std::vector<double> best;
    const auto end = std::min<Eigen::Index>(n, static_cast<Eigen::Index>((blk + 1) * 64));
    for (auto i = static_cast<Eigen::Index>(blk * 64); i < end; ++i) {
      const Eigen::RowVectorXd y = p.row(i);
      double rho = std::sqrt(kth_sq_distance(p, y, k, i, best));
      double nu = std::sqrt(kth_sq_distance(q, y, k, -1, best));
      if (rho < kDistanceFloor || nu < kDistanceFloor) floored[static_cast<std::size_t>(i)] = 1;
      rho = std::max(rho, kDistanceFloor);
      nu = std::max(nu, kDistanceFloor);
      terms[static_cast<std::size_t>(i)] = std::log(nu / rho);
    }
  });
  double sum = 0.0;
  for (double t : terms) sum += t;
  KnnKl out;
  out.k = k;
  out.floored = static_cast<std::size_t>(std::count(floored.begin(), floored.end(), 1));
  out.value = static_cast<double>(d) / static_cast<double>(n) * sum +
              std::log(static_cast<double>(m) / static_cast<double>(n - 1));
  return out;
}

double nll(const Target& target, const RowMat& x) {
  if (x.rows() < 1) throw DomainError("NLL needs at least one sample");
  if (x.cols() != target_dim(target)) throw ShapeError("NLL batch dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) sum += log_density(target, x.row(i).transpose());
  return -sum / static_cast<double>(x.rows());
}

bool is_metric_name(const std::string& name) {
  return name == "gauss-kl" || name == "gauss-w2" || name == "sliced-w2" || name == "knn-kl" ||
         name == "nll";
}

MetricReport evaluate_metric(const std::string& name, const Target& target, const RowMat& reference,
                             const RowMat& generated, std::size_t n_proj, int k,
                             std::uint64_t seed) {
  MetricReport r;
  r.name = name;
  r.n_used = static_cast<std::size_t>(generated.rows());
  if (name == "gauss-kl" || name == "gauss-w2") {
    const GaussianTarget fitted = fit_gaussian(generated);
    const GaussianTarget* truth = std::get_if<GaussianTarget>(&target);
    const GaussianTarget ref = truth ? *truth : fit_gaussian(reference);
    r.value = name == "gauss-kl" ? gaussian_kl(ref, fitted) : gaussian_w2(ref, fitted);
  } else if (name == "sliced-w2") {
    r.value = sliced_w2(reference, generated, n_proj, seed);
    r.n_used = static_cast<std::size_t>(std::min(reference.rows(), generated.rows()));
    r.params["projections"] = static_cast<double>(n_proj);
  } else if (name == "knn-kl") {
    const KnnKl est = knn_kl(reference, generated, k);
    r.value = est.value;
    r.params["k"] = est.k;
    if (est.floored > 0)
      r.warnings.push_back(std::to_string(est.floored) + " zero neighbour distances floored at 1e-300");
  } else if (name == "nll") {
    r.value = nll(target, generated);
  } else {
    throw ConfigError("unknown metric '" + name + "'");
  }
  return r;
}

}  // namespace sgm
