#include "sgm/scorenet.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sgm/error.hpp"
#include "sgm/io.hpp"
#include "sgm/rng.hpp"

namespace sgm {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'M', 'S', 'C', 'O', 'R', 'E'};
constexpr std::uint32_t kVersion = 1;

Mat embedding_matrix(int width, const Vec& times) {
  Mat E(width, times.size());
  for (Eigen::Index i = 0; i < times.size(); ++i) E.col(i) = time_embedding(width, times(i));
  return E;
}

struct Trace {
  Mat x;                // d x n
  Mat E;                // W x n
  std::vector<Mat> h;   // h[0] = input projection, h[l] after layer l
  std::vector<Mat> pre; // pre-activations of hidden layers
  Mat out;              // d x n
};

Trace forward_trace(const ScoreNetParams& p, const Vec& times, const RowMat& x) {
  Trace tr;
  tr.x = x.transpose();
  tr.E = embedding_matrix(p.width(), times);
  tr.h.reserve(p.layers() + 1);
  tr.h.push_back((p.W_in() * tr.x).colwise() + p.b_in().col(0));
  for (int l = 0; l < p.layers(); ++l) {
    Mat z = p.A(l) * tr.h.back() + p.U(l) * tr.E;
    z.colwise() += p.b(l).col(0) + p.c(l).col(0);
    tr.h.push_back(z.cwiseMax(0.0));
    tr.pre.push_back(std::move(z));
  }
  tr.out = (p.W_out() * tr.h.back()).colwise() + p.b_out().col(0);
  return tr;
}

void check_input(const ScoreNetParams& p, const RowMat& x) {
  if (x.cols() != p.d()) {
    std::ostringstream os;
    os << "network expects inputs of dimension " << p.d() << ", got " << x.cols();
    throw ShapeError(os.str());
  }
}

}  // namespace

ScoreNetParams::ScoreNetParams(int d, int width, int layers) : d_(d), width_(width), layers_(layers) {
  if (d < 1 || width < 2 || width % 2 != 0 || layers < 1)
    throw ShapeError("network needs d >= 1, an even width >= 2 and at least one layer");
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    tensors_.push_back({std::move(name), rows, cols, offset});
    offset += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  };
  add("W_in", width, d);
  add("b_in", width, 1);
  for (int l = 0; l < layers; ++l) {
    const auto s = std::to_string(l + 1);
    add("A" + s, width, width);
    add("b" + s, width, 1);
    add("U" + s, width, width);
    add("c" + s, width, 1);
  }
  add("W_out", d, width);
  add("b_out", d, 1);
  flat_ = Vec::Zero(static_cast<Eigen::Index>(offset));
}

Eigen::Map<Mat> ScoreNetParams::tensor(std::size_t i) {
  const auto& t = tensors_.at(i);
  return {flat_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Mat> ScoreNetParams::tensor(std::size_t i) const {
  const auto& t = tensors_.at(i);
  return {flat_.data() + t.offset, t.rows, t.cols};
}

ScoreNetParams ScoreNetParams::kaiming(int d, int width, std::uint64_t seed, int layers) {
  ScoreNetParams p(d, width, layers);
  for (std::size_t i = 0; i < p.tensors_.size(); ++i) {
    const auto& t = p.tensors_[i];
    if (t.cols == 1) continue;
    const double bound = std::sqrt(6.0 / t.cols);
    rng::Stream s(rng::derive(seed, i));
    auto m = p.tensor(i);
    for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = bound * (2.0 * s.uniform() - 1.0);
  }
  return p;
}

Vec time_embedding(int width, double t) {
  const int half = width / 2;
  Vec e(width);
  for (int j = 0; j < half; ++j) {
    const double w = std::pow(10000.0, -2.0 * j / width);
    e(j) = std::sin(w * t);
    e(half + j) = std::cos(w * t);
  }
  return e;
}

Vec net_forward(const ScoreNetParams& params, double t, const Vec& x) {
  RowMat in = x.transpose();
  RowMat out;
  net_forward_rows(params, t, in, out);
  return out.row(0).transpose();
}

void net_forward_rows(const ScoreNetParams& p, double t, const RowMat& x, RowMat& out) {
  check_input(p, x);
  const Vec e = time_embedding(p.width(), t);
  Mat h = (p.W_in() * x.transpose()).colwise() + p.b_in().col(0);
  Mat z;
  for (int l = 0; l < p.layers(); ++l) {
    const Vec shift = p.U(l) * e + p.b(l).col(0) + p.c(l).col(0);
    z.noalias() = p.A(l) * h;
    h = (z.colwise() + shift).cwiseMax(0.0);
  }
  out = ((p.W_out() * h).colwise() + p.b_out().col(0)).transpose();
}

RowMat net_forward_batch(const ScoreNetParams& params, const Vec& times, const RowMat& x) {
  check_input(params, x);
  if (times.size() != x.rows()) throw ShapeError("one time per input row is required");
  return forward_trace(params, times, x).out.transpose();
}

Gradient net_backward(const ScoreNetParams& p, const Vec& times, const RowMat& x,
                      const RowMat& targets) {
  check_input(p, x);
  if (times.size() != x.rows() || targets.rows() != x.rows() || targets.cols() != x.cols())
    throw ShapeError("batch, times and targets do not conform");
  const Trace tr = forward_trace(p, times, x);
  const double n = static_cast<double>(x.rows());
  const Mat resid = tr.out - targets.transpose();
  Gradient g{ScoreNetParams(p.d(), p.width(), p.layers()), resid.squaredNorm() / n};

  Mat delta = (2.0 / n) * resid;
  g.grad.W_out() = delta * tr.h.back().transpose();
  g.grad.b_out() = delta.rowwise().sum();
  Mat up = p.W_out().transpose() * delta;
  for (int l = p.layers() - 1; l >= 0; --l) {
    delta = up.cwiseProduct((tr.pre[l].array() > 0.0).cast<double>().matrix());
    g.grad.A(l) = delta * tr.h[l].transpose();
    g.grad.b(l) = delta.rowwise().sum();
    g.grad.U(l) = delta * tr.E.transpose();
    g.grad.c(l) = g.grad.b(l);
    up = p.A(l).transpose() * delta;
  }
  g.grad.W_in() = up * tr.x.transpose();
  g.grad.b_in() = up.rowwise().sum();
  return g;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Vec::Zero(static_cast<Eigen::Index>(size))), v_(Vec::Zero(static_cast<Eigen::Index>(size))) {
  if (!(lr > 0.0)) throw DomainError("learning rate must be positive");
}

void Adam::step(Vec& theta, const Vec& grad) {
  if (theta.size() != m_.size() || grad.size() != m_.size())
    throw ShapeError("optimizer state does not match parameter size");
  ++t_;
  pow1_ *= beta1_;
  pow2_ *= beta2_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 / (1.0 - pow1_);
  const double c2 = 1.0 / (1.0 - pow2_);
  theta.array() -= lr_ * (m_.array() * c1) / ((v_.array() * c2).sqrt() + eps_);
}

std::string to_string(LossKind loss) {
  return loss == LossKind::Explicit ? "explicit" : "conditional";
}

LossKind parse_loss(const std::string& name) {
  if (name == "explicit") return LossKind::Explicit;
  if (name == "conditional") return LossKind::Conditional;
  throw ConfigError("unknown loss '" + name + "' (expected explicit or conditional)");
}

EpochDraw draw_epoch(std::size_t n, int d, double T, std::uint64_t seed, std::size_t epoch) {
  rng::Stream s(rng::derive(seed, rng::hash_name("epoch"), epoch));
  EpochDraw draw;
  draw.order.resize(n);
  for (std::size_t i = 0; i < n; ++i) draw.order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(draw.order[i - 1], draw.order[s.below(i)]);
  draw.tau.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) draw.tau(static_cast<Eigen::Index>(i)) = T * s.uniform();
  draw.noise.resize(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < draw.noise.size(); ++i) draw.noise.data()[i] = s.normal();
  return draw;
}

TrainResult train_on_samples(const RowMat& data, const Schedule& sched, const TrainConfig& cfg,
                             const GaussianTarget* analytic) {
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw DomainError("epochs and batch size must be >= 1");
  if (data.rows() < 1) throw DomainError("training set is empty");
  if (cfg.loss == LossKind::Explicit && analytic == nullptr)
    throw UnsupportedOperation("explicit score matching requires an analytic Gaussian score");
  const int d = static_cast<int>(data.cols());
  if (analytic != nullptr && analytic->dim() != d) throw ShapeError("analytic target dimension mismatch");
  const std::size_t n = static_cast<std::size_t>(data.rows());

  TrainResult res{ScoreNetParams::kaiming(d, cfg.width, rng::derive_named(cfg.seed, "init"), cfg.layers), {}};
  Adam opt(res.params.size(), cfg.learning_rate);

  Vec inv_var;
  if (analytic != nullptr) inv_var.resize(d);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EpochDraw draw = draw_epoch(n, d, sched.T(), cfg.seed, epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t bs = std::min(cfg.batch_size, n - start);
      RowMat xb(static_cast<Eigen::Index>(bs), d), yb(static_cast<Eigen::Index>(bs), d);
      Vec tb(static_cast<Eigen::Index>(bs));
      for (std::size_t r = 0; r < bs; ++r) {
        const auto i = static_cast<Eigen::Index>(draw.order[start + r]);
        const auto row = static_cast<Eigen::Index>(r);
        const double tau = draw.tau(i);
        const auto fs = m_sigma(sched, tau);
        const double sd = std::sqrt(fs.sig2);
        tb(row) = tau;
        xb.row(row) = fs.m * data.row(i) + sd * draw.noise.row(i);
        if (cfg.loss == LossKind::Conditional) {
          yb.row(row) = -draw.noise.row(i) / sd;
        } else {
          const Mat& V = analytic->eigenvectors();
          inv_var = ((fs.m * fs.m) * analytic->eigenvalues().array() + fs.sig2).inverse();
          const Vec r0 = xb.row(row).transpose() - fs.m * analytic->mu();
          yb.row(row) = -(V * inv_var.cwiseProduct(V.transpose() * r0)).transpose();
        }
      }
      Gradient g = net_backward(res.params, tb, xb, yb);
      total += g.loss * static_cast<double>(bs);
      opt.step(res.params.flat(), g.grad.flat());
    }
    const double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean) || !res.params.flat().allFinite()) {
      std::ostringstream os;
      os << "training loss is not finite at epoch " << epoch;
      throw TrainingDiverged(epoch, os.str());
    }
    res.epoch_loss.push_back(mean);
  }
  return res;
}

TrainResult train(const Target& target, const Schedule& sched, const TrainConfig& cfg,
                  std::size_t n_train, std::uint64_t data_seed) {
  const GaussianTarget* analytic = std::get_if<GaussianTarget>(&target);
  if (cfg.loss == LossKind::Explicit && analytic == nullptr)
    throw UnsupportedOperation("explicit score matching requires a Gaussian target, got " +
                               target_name(target));
  const RowMat data = sample(target, n_train, data_seed);
  return train_on_samples(data, sched, cfg, analytic);
}

void save_params(const ScoreNetParams& p, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  io::write_u32(out, kVersion);
  io::write_u32(out, static_cast<std::uint32_t>(p.d()));
  io::write_u32(out, static_cast<std::uint32_t>(p.width()));
  io::write_u32(out, static_cast<std::uint32_t>(p.layers()));
  for (std::size_t i = 0; i < p.tensors().size(); ++i) {
    const auto m = p.tensor(i);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) io::write_f64(out, m(r, c));
  }
  if (!out) throw IoError("failed to write network parameters");
}

ScoreNetParams load_params(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a score network parameter file");
  const auto version = io::read_u32(in);
  if (version != kVersion) throw IoError("unsupported parameter file version " + std::to_string(version));
  const auto d = io::read_u32(in);
  const auto width = io::read_u32(in);
  const auto layers = io::read_u32(in);
  if (d == 0 || d > 1u << 20 || width > 1u << 16 || layers == 0 || layers > 64)
    throw IoError("implausible network shape in parameter file");
  ScoreNetParams p(static_cast<int>(d), static_cast<int>(width), static_cast<int>(layers));
  for (std::size_t i = 0; i < p.tensors().size(); ++i) {
    auto m = p.tensor(i);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = io::read_f64(in);
  }
  if (!p.flat().allFinite()) throw IoError("parameter file holds non-finite values");
  return p;
}

void save_params(const ScoreNetParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  save_params(params, out);
}

ScoreNetParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_params(in);
}

}  // namespace sgm
