#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sgm/schedule.hpp"
#include "sgm/targets.hpp"
#include "sgm/types.hpp"

namespace sgm {

// Dense time-conditioned network
//   h_0 = W_in x + b_in
//   h_l = relu(A_l h_{l-1} + b_l + U_l e(t) + c_l),  l = 1..layers
//   s   = W_out h_L + b_out
// with e(t) the width-W sine/cosine embedding. All tensors live in one flat
// vector (column-major per tensor) in the order
//   W_in, b_in, (A_l, b_l, U_l, c_l) for each layer, W_out, b_out.
class ScoreNetParams {
 public:
  struct Tensor {
    std::string name;
    int rows;
    int cols;
    std::size_t offset;
  };

  ScoreNetParams(int d, int width, int layers = 3);

  // Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static ScoreNetParams kaiming(int d, int width, std::uint64_t seed, int layers = 3);

  int d() const noexcept { return d_; }
  int width() const noexcept { return width_; }
  int layers() const noexcept { return layers_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(flat_.size()); }
  const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

  Vec& flat() noexcept { return flat_; }
  const Vec& flat() const noexcept { return flat_; }

  Eigen::Map<Mat> tensor(std::size_t i);
  Eigen::Map<const Mat> tensor(std::size_t i) const;

  Eigen::Map<Mat> W_in() { return tensor(0); }
  Eigen::Map<const Mat> W_in() const { return tensor(0); }
  Eigen::Map<Mat> b_in() { return tensor(1); }
  Eigen::Map<const Mat> b_in() const { return tensor(1); }
  Eigen::Map<Mat> A(int l) { return tensor(2 + 4 * l); }
  Eigen::Map<const Mat> A(int l) const { return tensor(2 + 4 * l); }
  Eigen::Map<Mat> b(int l) { return tensor(3 + 4 * l); }
  Eigen::Map<const Mat> b(int l) const { return tensor(3 + 4 * l); }
  Eigen::Map<Mat> U(int l) { return tensor(4 + 4 * l); }
  Eigen::Map<const Mat> U(int l) const { return tensor(4 + 4 * l); }
  Eigen::Map<Mat> c(int l) { return tensor(5 + 4 * l); }
  Eigen::Map<const Mat> c(int l) const { return tensor(5 + 4 * l); }
  Eigen::Map<Mat> W_out() { return tensor(2 + 4 * layers_); }
  Eigen::Map<const Mat> W_out() const { return tensor(2 + 4 * layers_); }
  Eigen::Map<Mat> b_out() { return tensor(3 + 4 * layers_); }
  Eigen::Map<const Mat> b_out() const { return tensor(3 + 4 * layers_); }

 private:
  int d_;
  int width_;
  int layers_;
  std::vector<Tensor> tensors_;
  Vec flat_;
};

// Features (sin w_j t)_j followed by (cos w_j t)_j, w_j = 10000^(-2j/W).
Vec time_embedding(int width, double t);

Vec net_forward(const ScoreNetParams& params, double t, const Vec& x);
// All rows share the time t; out is resized to n x d.
void net_forward_rows(const ScoreNetParams& params, double t, const RowMat& x, RowMat& out);
// Row i is evaluated at times(i).
RowMat net_forward_batch(const ScoreNetParams& params, const Vec& times, const RowMat& x);

struct Gradient {
  ScoreNetParams grad;
  double loss;  // mean over rows of ||s - y||^2
};

// Gradient of the mean squared loss over the batch.
Gradient net_backward(const ScoreNetParams& params, const Vec& times, const RowMat& x,
                      const RowMat& targets);

class Adam {
 public:
  explicit Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(Vec& theta, const Vec& grad);
  std::size_t steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  Vec m_, v_;
  std::size_t t_ = 0;
  double pow1_ = 1.0, pow2_ = 1.0;
};

enum class LossKind { Explicit, Conditional };

std::string to_string(LossKind loss);
LossKind parse_loss(const std::string& name);

struct TrainConfig {
  LossKind loss = LossKind::Conditional;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  int width = 256;
  int layers = 3;
};

struct TrainResult {
  ScoreNetParams params;
  std::vector<double> epoch_loss;
};

// Per-epoch randomness: a visiting order, diffusion times in (0, T) and
// Gaussian noise, all drawn from one stream keyed by (seed, epoch).
struct EpochDraw {
  std::vector<std::size_t> order;
  Vec tau;
  RowMat noise;
};

EpochDraw draw_epoch(std::size_t n, int d, double T, std::uint64_t seed, std::size_t epoch);

// Draws n_train data points from the target, then trains on them.
TrainResult train(const Target& target, const Schedule& sched, const TrainConfig& cfg,
                  std::size_t n_train, std::uint64_t data_seed);

// Trains on a fixed data set. The explicit loss needs `analytic`, the
// Gaussian whose forward marginals supply the regression target.
TrainResult train_on_samples(const RowMat& data, const Schedule& sched, const TrainConfig& cfg,
                             const GaussianTarget* analytic = nullptr);

void save_params(const ScoreNetParams& params, std::ostream& out);
ScoreNetParams load_params(std::istream& in);
void save_params(const ScoreNetParams& params, const std::string& path);
ScoreNetParams load_params(const std::string& path);

}  // namespace sgm
