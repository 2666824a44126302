#include "sgm/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/parallel.hpp"
#include "sgm/rng.hpp"

namespace sgm {

namespace {

// Particles advance in fixed-size chunks through all steps; the chunk size
// fixes every floating-point reduction regardless of threading.
constexpr std::size_t kChunk = 64;
constexpr double kDivergenceLimit = 1e8;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

// Per-step evaluator of the modified score at forward times T - t_k.
class StepScore {
 public:
  StepScore(const ScoreSource& src, const Schedule& sched, const TimeGrid& grid) : src_(src) {
    times_.resize(grid.N());
    for (std::size_t k = 0; k < grid.N(); ++k) times_[k] = std::max(0.0, sched.T() - grid.t(k));
    if (const auto* a = std::get_if<ScoreSource::Analytic>(&src.variant())) {
      cache_.reserve(grid.N());
      for (double t : times_) cache_.push_back(gaussian_score_at(a->target, a->sched, t));
      offset_ = a->offset;
    }
  }

  void operator()(std::size_t k, const RowMat& x, RowMat& out) const {
    if (!cache_.empty()) {
      out.resize(x.rows(), x.cols());
      cache_[k].modified_rows(x, out);
      if (offset_.size() > 0) out.rowwise() += offset_.transpose();
      return;
    }
    src_.modified_rows(times_[k], x, out);
  }

 private:
  const ScoreSource& src_;
  std::vector<double> times_;
  std::vector<GaussianScore> cache_;
  Vec offset_;
};

void check_setup(const ScoreSource& score, const Schedule& sched, const TimeGrid& grid,
                 std::size_t n, int d) {
  if (n < 1) throw DomainError("sample count must be at least 1");
  if (d < 1) throw DomainError("dimension must be at least 1");
  if (score.dim() != 0 && score.dim() != d) throw ShapeError("score source dimension mismatch");
  if (std::abs(grid.T() - sched.T()) > 1e-12 * sched.T())
    throw DomainError("time grid horizon differs from the schedule horizon");
  if (std::abs(score.sigma2() - sched.sigma2()) > 1e-12 * sched.sigma2())
    throw DomainError("score source and schedule disagree on sigma2");
}

// Shared driver: `update` advances one chunk by one step given the score.
template <typename Update>
SampleBatch run_backward(const ScoreSource& score, const Schedule& sched, const TimeGrid& grid,
                         std::size_t n, int d, std::uint64_t seed, Update&& update) {
  check_setup(score, sched, grid, n, d);
  const StepScore step_score(score, sched, grid);
  const double sd = std::sqrt(sched.sigma2());
  const std::uint64_t init_key = rng::derive_named(seed, "init");
  const std::uint64_t noise_key = rng::derive_named(seed, "noise");

  SampleBatch out{RowMat(static_cast<Eigen::Index>(n), d), seed, Stage::Generated, sched.T()};
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::size_t> diverged(chunks, std::numeric_limits<std::size_t>::max());

  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const auto rows = static_cast<Eigen::Index>(std::min(n, begin + kChunk) - begin);
    RowMat x(rows, d), s(rows, d), z(rows, d);
    for (Eigen::Index r = 0; r < rows; ++r) {
      rng::Stream st(rng::derive(init_key, begin + r));
      for (int j = 0; j < d; ++j) x(r, j) = sd * st.normal();
    }
    for (std::size_t k = 0; k < grid.N(); ++k) {
      step_score(k, x, s);
      for (Eigen::Index r = 0; r < rows; ++r) {
        rng::Stream st(rng::derive(noise_key, begin + r, k));
        for (int j = 0; j < d; ++j) z(r, j) = st.normal();
      }
      update(k, x, s, z);
      const bool finite = x.allFinite() && x.cwiseAbs().maxCoeff() <= kDivergenceLimit;
      if (!finite) {
        diverged[c] = k;
        return;
      }
    }
    out.data.middleRows(static_cast<Eigen::Index>(begin), rows) = x;
  });

  const std::size_t first = *std::min_element(diverged.begin(), diverged.end());
  if (first != std::numeric_limits<std::size_t>::max()) {
    std::ostringstream os;
    os << "backward sampler diverged at step " << first << " (|x| > 1e8 or non-finite)";
    throw DivergenceError(first, os.str());
  }
  return out;
}

}  // namespace

ScoreSource ScoreSource::analytic(GaussianTarget target, Schedule sched, Vec offset) {
  if (offset.size() != 0 && offset.size() != target.dim())
    throw ShapeError("score offset dimension mismatch");
  return ScoreSource(Analytic{std::move(target), std::move(sched), std::move(offset)});
}

ScoreSource ScoreSource::learned(ScoreNetParams params, double sigma2) {
  if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  return ScoreSource(Learned{std::move(params), sigma2});
}

ScoreSource ScoreSource::zero(double sigma2) {
  if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  return ScoreSource(Zero{sigma2});
}

double ScoreSource::sigma2() const noexcept {
  return std::visit(Overloaded{[](const Analytic& a) { return a.sched.sigma2(); },
                               [](const Learned& l) { return l.sigma2; },
                               [](const Zero& z) { return z.sigma2; }},
                    v_);
}

int ScoreSource::dim() const noexcept {
  return std::visit(Overloaded{[](const Analytic& a) { return a.target.dim(); },
                               [](const Learned& l) { return l.params.d(); },
                               [](const Zero&) { return 0; }},
                    v_);
}

std::string ScoreSource::describe() const {
  return std::visit(Overloaded{[](const Analytic& a) {
                                 return std::string(a.offset.size() ? "exact+offset" : "exact");
                               },
                               [](const Learned&) { return std::string("net"); },
                               [](const Zero&) { return std::string("zero"); }},
                    v_);
}

Vec ScoreSource::modified(double t, const Vec& x) const {
  RowMat in = x.transpose();
  RowMat out;
  modified_rows(t, in, out);
  return out.row(0).transpose();
}

Vec ScoreSource::raw(double t, const Vec& x) const { return modified(t, x) - x / sigma2(); }

void ScoreSource::modified_rows(double t, const RowMat& x, RowMat& out) const {
  std::visit(Overloaded{[&](const Analytic& a) {
                          if (x.cols() != a.target.dim()) throw ShapeError("score input dimension mismatch");
                          out.resize(x.rows(), x.cols());
                          gaussian_score_at(a.target, a.sched, t).modified_rows(x, out);
                          if (a.offset.size() > 0) out.rowwise() += a.offset.transpose();
                        },
                        [&](const Learned& l) {
                          net_forward_rows(l.params, t, x, out);
                          out += x / l.sigma2;
                        },
                        [&](const Zero&) { out = RowMat::Zero(x.rows(), x.cols()); }},
             v_);
}

RowMat forward_from(const RowMat& x0, const Schedule& sched, double t, std::uint64_t seed) {
  const auto fs = m_sigma(sched, t);
  const double sd = std::sqrt(fs.sig2);
  const auto n = static_cast<std::size_t>(x0.rows());
  const int d = static_cast<int>(x0.cols());
  RowMat out(x0.rows(), d);
  const std::size_t blocks = (n + 255) / 256;
  parallel_for(blocks, [&](std::size_t b) {
    for (std::size_t i = b * 256; i < std::min(n, (b + 1) * 256); ++i) {
      rng::Stream st(rng::derive(seed, i));
      const auto r = static_cast<Eigen::Index>(i);
      for (int j = 0; j < d; ++j) out(r, j) = fs.m * x0(r, j) + sd * st.normal();
    }
  });
  return out;
}

SampleBatch forward_exact(const Target& target, const Schedule& sched, double t, std::size_t n,
                          std::uint64_t seed) {
  const RowMat x0 = sample(target, n, rng::derive_named(seed, "data"));
  return {forward_from(x0, sched, t, rng::derive_named(seed, "noise")), seed, Stage::Forward, t};
}

SampleBatch backward_em(const ScoreSource& score, const Schedule& sched, const TimeGrid& grid,
                        std::size_t n, int d, std::uint64_t seed) {
  const double h = grid.h();
  const double s2 = sched.sigma2();
  std::vector<double> beta(grid.N());
  for (std::size_t k = 0; k < grid.N(); ++k) beta[k] = sched.beta(std::max(0.0, sched.T() - grid.t(k)));
  return run_backward(score, sched, grid, n, d, seed,
                      [&](std::size_t k, RowMat& x, const RowMat& s, const RowMat& z) {
                        const double b = beta[k];
                        x += h * (-(b / (2.0 * s2)) * x + b * s) + std::sqrt(b * h) * z;
                      });
}

SampleBatch backward_ei(const ScoreSource& score, const Schedule& sched, const TimeGrid& grid,
                        std::size_t n, int d, std::uint64_t seed) {
  const double s2 = sched.sigma2();
  struct Coef {
    double decay, drift, noise;
  };
  std::vector<Coef> coef(grid.N());
  for (std::size_t k = 0; k < grid.N(); ++k) {
    const double lo = std::max(0.0, sched.T() - grid.t(k + 1));
    const double hi = std::max(lo, sched.T() - grid.t(k));
    const double I = sched.beta_integral(lo, hi);
    const double one_minus_a = -std::expm1(-I / (2.0 * s2));
    coef[k] = {1.0 - one_minus_a, 2.0 * s2 * one_minus_a, std::sqrt(-s2 * std::expm1(-I / s2))};
  }
  return run_backward(score, sched, grid, n, d, seed,
                      [&](std::size_t k, RowMat& x, const RowMat& s, const RowMat& z) {
                        const Coef& c = coef[k];
                        x = c.decay * x + c.drift * s + c.noise * z;
                      });
}

std::string to_string(Scheme scheme) { return scheme == Scheme::EM ? "em" : "ei"; }

Scheme parse_scheme(const std::string& name) {
  if (name == "em") return Scheme::EM;
  if (name == "ei") return Scheme::EI;
  throw ConfigError("unknown scheme '" + name + "' (expected em or ei)");
}

SampleBatch backward_sample(Scheme scheme, const ScoreSource& score, const Schedule& sched,
                            const TimeGrid& grid, std::size_t n, int d, std::uint64_t seed) {
  return scheme == Scheme::EM ? backward_em(score, sched, grid, n, d, seed)
                              : backward_ei(score, sched, grid, n, d, seed);
}

}  // namespace sgm
