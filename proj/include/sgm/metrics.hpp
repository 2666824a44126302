#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sgm/targets.hpp"
#include "sgm/types.hpp"

namespace sgm {

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::size_t n_used = 0;
  std::map<std::string, double> params;
  std::vector<std::string> warnings;
};

// Sample mean and unbiased covariance (symmetrized) as a Gaussian.
GaussianTarget fit_gaussian(const RowMat& x);

// Exact 1-D quadratic Wasserstein distance between equal-size samples.
double w2_1d(std::vector<double> a, std::vector<double> b);

// sqrt of the mean over random unit directions of the squared 1-D W2 of the
// projections. The larger batch is subsampled (seeded) to the smaller size.
double sliced_w2(const RowMat& a, const RowMat& b, std::size_t n_proj = 2000,
                 std::uint64_t seed = 0);

struct KnnKl {
  double value = 0.0;
  int k = 0;
  std::size_t floored = 0;  // distances raised to the 1e-300 floor
};

// k-NN divergence estimate of KL(p || q); k <= 0 selects ceil(sqrt(d)).
KnnKl knn_kl(const RowMat& p, const RowMat& q, int k = 0);

double nll(const Target& target, const RowMat& x);

// Named metrics between a reference (target and/or reference samples) and a
// generated batch: gauss-kl, gauss-w2, sliced-w2, knn-kl, nll.
MetricReport evaluate_metric(const std::string& name, const Target& target, const RowMat& reference,
                             const RowMat& generated, std::size_t n_proj, int k,
                             std::uint64_t seed);

bool is_metric_name(const std::string& name);

}  // namespace sgm
