#pragma once

#include <string>

namespace sgm {

enum class ScheduleKind { Linear, Parametric, Cosine };

// A nondecreasing positive noise schedule beta on [0, T] together with the
// stationary variance sigma2 of the forward Ornstein-Uhlenbeck process.
//
//   Linear:      beta0 + (beta1 - beta0) t / T
//   Parametric:  beta0 + (beta1 - beta0) (e^{a t} - 1) / (e^{a T} - 1)
//   Cosine:      sigma2 pi / (T (s + 1)) tan(pi (s + t/T) / (2 (s + 1)))
//
// Parametric with |a| <= kLinearLimit is evaluated with the linear formula.
// The cosine schedule diverges at t = T and is clipped to kCosineClip for
// sampling and integration; beta_unclipped() exposes the raw closed form.
class Schedule {
 public:
  static constexpr double kLinearLimit = 1e-8;
  static constexpr double kCosineClip = 200.0;
  static constexpr double kDefaultCosineS = 0.021122;

  static Schedule linear(double beta0 = 0.1, double beta1 = 20.0, double T = 1.0,
                         double sigma2 = 1.0);
  static Schedule parametric(double a, double beta0 = 0.1, double beta1 = 20.0,
                             double T = 1.0, double sigma2 = 1.0);
  static Schedule cosine(double s = kDefaultCosineS, double T = 1.0, double sigma2 = 1.0);

  ScheduleKind kind() const noexcept { return kind_; }
  double a() const noexcept { return a_; }
  double s() const noexcept { return s_; }
  double beta0() const noexcept { return beta0_; }
  double beta1() const noexcept { return beta1_; }
  double T() const noexcept { return T_; }
  double sigma2() const noexcept { return sigma2_; }

  // Human readable tag, e.g. "linear", "parametric(a=2)", "cosine(s=0.021122)".
  std::string describe() const;

  double beta(double t) const;
  double beta_unclipped(double t) const;
  // Integral of beta over [t0, t1], closed form for every kind.
  double beta_integral(double t0, double t1) const;

 private:
  Schedule(ScheduleKind kind, double a, double s, double beta0, double beta1, double T,
           double sigma2);

  void check_time(double t) const;
  double cosine_scale() const noexcept;
  double cosine_angle(double t) const noexcept;
  double cosine_log_cos_integral(double t0, double t1) const;
  double primitive_affine(double t) const noexcept;

  ScheduleKind kind_;
  double a_;
  double s_;
  double beta0_;
  double beta1_;
  double T_;
  double sigma2_;
  double clip_time_;  // cosine only: first time where beta reaches kCosineClip
};

// Forward-process scalars at time t:
//   m_t = exp(-int_0^t beta / (2 sigma2)),   sig2_t = sigma2 (1 - m_t^2).
struct ForwardScalars {
  double m;
  double sig2;
};

ForwardScalars m_sigma(const Schedule& sched, double t);

}  // namespace sgm
