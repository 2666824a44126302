#pragma once

#include <cstddef>

#include "sgm/error.hpp"

namespace sgm {

// Uniform grid t_k = k T / N on [0, T].
class TimeGrid {
 public:
  TimeGrid(std::size_t steps, double horizon) : N_(steps), T_(horizon) {
    if (steps == 0) throw DomainError("time grid needs at least one step");
    if (!(horizon > 0.0)) throw DomainError("time grid horizon must be positive");
  }

  std::size_t N() const noexcept { return N_; }
  double T() const noexcept { return T_; }
  double h() const noexcept { return T_ / static_cast<double>(N_); }
  // t_N is returned as T exactly.
  double t(std::size_t k) const noexcept {
    return k >= N_ ? T_ : T_ * static_cast<double>(k) / static_cast<double>(N_);
  }

 private:
  std::size_t N_;
  double T_;
};

}  // namespace sgm
