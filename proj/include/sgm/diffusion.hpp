#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "sgm/grid.hpp"
#include "sgm/schedule.hpp"
#include "sgm/scorenet.hpp"
#include "sgm/targets.hpp"
#include "sgm/types.hpp"

namespace sgm {

enum class Stage { Data, Forward, Generated };

struct SampleBatch {
  RowMat data;
  std::uint64_t seed = 0;
  Stage stage = Stage::Data;
  double time = 0.0;  // forward time for Stage::Forward
};

// Source of the modified score s~(t, x) = grad log p_t(x) + x / sigma2, with t
// in forward time.
class ScoreSource {
 public:
  struct Analytic {
    GaussianTarget target;
    Schedule sched;
    Vec offset;  // added to the exact modified score; empty means none
  };
  struct Learned {
    ScoreNetParams params;
    double sigma2;
  };
  struct Zero {
    double sigma2;
  };

  static ScoreSource analytic(GaussianTarget target, Schedule sched, Vec offset = Vec());
  static ScoreSource learned(ScoreNetParams params, double sigma2);
  static ScoreSource zero(double sigma2);

  const auto& variant() const noexcept { return v_; }
  bool is_analytic() const noexcept { return std::holds_alternative<Analytic>(v_); }
  double sigma2() const noexcept;
  // Dimension the source accepts, or 0 when any dimension works.
  int dim() const noexcept;
  std::string describe() const;

  Vec modified(double t, const Vec& x) const;
  Vec raw(double t, const Vec& x) const;
  // Row-wise modified score; out is resized to match x.
  void modified_rows(double t, const RowMat& x, RowMat& out) const;

 private:
  explicit ScoreSource(std::variant<Analytic, Learned, Zero> v) : v_(std::move(v)) {}
  std::variant<Analytic, Learned, Zero> v_;
};

// X_t = m_t X_0 + sigma_t Z with X_0 drawn from the target.
SampleBatch forward_exact(const Target& target, const Schedule& sched, double t, std::size_t n,
                          std::uint64_t seed);
// Same construction from given data rows; noise row i is keyed by (seed, i).
RowMat forward_from(const RowMat& x0, const Schedule& sched, double t, std::uint64_t seed);

// Backward samplers on the reversed clock beta~(t) = beta(T - t), started from
// N(0, sigma2 I) and integrated to t = T. Noise for particle p at step k comes
// from a stream keyed by (seed, p, k), so the output does not depend on the
// worker count.
SampleBatch backward_em(const ScoreSource& score, const Schedule& sched, const TimeGrid& grid,
                        std::size_t n, int d, std::uint64_t seed);
SampleBatch backward_ei(const ScoreSource& score, const Schedule& sched, const TimeGrid& grid,
                        std::size_t n, int d, std::uint64_t seed);

enum class Scheme { EM, EI };
std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

SampleBatch backward_sample(Scheme scheme, const ScoreSource& score, const Schedule& sched,
                            const TimeGrid& grid, std::size_t n, int d, std::uint64_t seed);

}  // namespace sgm
