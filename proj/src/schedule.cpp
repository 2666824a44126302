#include "sgm/schedule.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sgm/error.hpp"

namespace sgm {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

Schedule::Schedule(ScheduleKind kind, double a, double s, double beta0, double beta1, double T,
                   double sigma2)
    : kind_(kind), a_(a), s_(s), beta0_(beta0), beta1_(beta1), T_(T), sigma2_(sigma2),
      clip_time_(T) {
  require(T > 0.0 && std::isfinite(T), "schedule horizon T must be positive");
  require(sigma2 > 0.0 && std::isfinite(sigma2), "schedule sigma2 must be positive");
  if (kind == ScheduleKind::Cosine) {
    require(s > 0.0 && std::isfinite(s), "cosine offset s must be positive");
    const double theta_clip = std::atan(kCosineClip / cosine_scale());
    clip_time_ = std::min(T, T * (theta_clip * 2.0 * (s + 1.0) / std::numbers::pi - s));
    beta0_ = beta(0.0);
    beta1_ = kCosineClip;
  } else {
    require(beta0 > 0.0, "beta0 must be positive");
    require(beta1 >= beta0, "beta1 must be at least beta0 (nondecreasing schedule)");
    require(std::isfinite(a), "parametric a must be finite");
  }
}

Schedule Schedule::linear(double beta0, double beta1, double T, double sigma2) {
  return Schedule(ScheduleKind::Linear, 0.0, 0.0, beta0, beta1, T, sigma2);
}

Schedule Schedule::parametric(double a, double beta0, double beta1, double T, double sigma2) {
  return Schedule(ScheduleKind::Parametric, a, 0.0, beta0, beta1, T, sigma2);
}

Schedule Schedule::cosine(double s, double T, double sigma2) {
  return Schedule(ScheduleKind::Cosine, 0.0, s, 0.0, 0.0, T, sigma2);
}

std::string Schedule::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case ScheduleKind::Linear:
      os << "linear";
      break;
    case ScheduleKind::Parametric:
      os << "parametric(a=" << a_ << ")";
      break;
    case ScheduleKind::Cosine:
      os << "cosine(s=" << s_ << ")";
      break;
  }
  return os.str();
}

void Schedule::check_time(double t) const {
  if (!(t >= 0.0 && t <= T_)) {
    std::ostringstream os;
    os.precision(17);
    os << "time " << t << " outside [0, " << T_ << "]";
    throw DomainError(os.str());
  }
}

double Schedule::cosine_scale() const noexcept {
  return sigma2_ * std::numbers::pi / (T_ * (s_ + 1.0));
}

double Schedule::cosine_angle(double t) const noexcept {
  return std::numbers::pi * (s_ + t / T_) / (2.0 * (s_ + 1.0));
}

double Schedule::beta_unclipped(double t) const {
  check_time(t);
  switch (kind_) {
    case ScheduleKind::Linear:
      return beta0_ + (beta1_ - beta0_) * t / T_;
    case ScheduleKind::Parametric:
      if (std::abs(a_) <= kLinearLimit) return beta0_ + (beta1_ - beta0_) * t / T_;
      return beta0_ + (beta1_ - beta0_) * std::expm1(a_ * t) / std::expm1(a_ * T_);
    case ScheduleKind::Cosine:
      return cosine_scale() * std::tan(cosine_angle(t));
  }
  return 0.0;
}

double Schedule::beta(double t) const {
  check_time(t);
  if (kind_ == ScheduleKind::Cosine) {
    if (t >= clip_time_) return kCosineClip;
    const double v = cosine_scale() * std::tan(cosine_angle(t));
    return (std::isfinite(v) && v < kCosineClip) ? v : kCosineClip;
  }
  return beta_unclipped(t);
}

// Antiderivative of the affine/parametric schedule, zero at t = 0.
double Schedule::primitive_affine(double t) const noexcept {
  const double span = beta1_ - beta0_;
  if (kind_ == ScheduleKind::Linear || std::abs(a_) <= kLinearLimit)
    return beta0_ * t + span * t * t / (2.0 * T_);
  // (e^{at} - 1)/a - t, written with expm1 to keep precision for small a t.
  return beta0_ * t + span * (std::expm1(a_ * t) / a_ - t) / std::expm1(a_ * T_);
}

// int tan(theta(u)) * scale du = -(2 sigma2) log cos(theta(u)).
double Schedule::cosine_log_cos_integral(double t0, double t1) const {
  if (t1 <= t0) return 0.0;
  return 2.0 * sigma2_ * (std::log(std::cos(cosine_angle(t0))) - std::log(std::cos(cosine_angle(t1))));
}

double Schedule::beta_integral(double t0, double t1) const {
  check_time(t0);
  check_time(t1);
  if (t1 < t0) throw DomainError("beta_integral requires t0 <= t1");
  if (t1 == t0) return 0.0;
  if (kind_ != ScheduleKind::Cosine) return primitive_affine(t1) - primitive_affine(t0);
  const double smooth_end = std::min(t1, clip_time_);
  double total = 0.0;
  if (t0 < smooth_end) total += cosine_log_cos_integral(t0, smooth_end);
  const double clip_start = std::max(t0, clip_time_);
  if (t1 > clip_start) total += kCosineClip * (t1 - clip_start);
  return total;
}

ForwardScalars m_sigma(const Schedule& sched, double t) {
  const double integral = sched.beta_integral(0.0, t);
  const double m = std::exp(-integral / (2.0 * sched.sigma2()));
  return {m, -sched.sigma2() * std::expm1(-integral / sched.sigma2())};
}

}  // namespace sgm
