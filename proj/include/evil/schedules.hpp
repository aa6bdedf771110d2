#pragma once

// Training schedules: KL annealing beta, Gaussian consistency ramp-up lambda,
// polynomial learning-rate decay.

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace evil {

inline double beta_schedule(double t, double t_max) {
  if (t_max <= 0.0) throw std::invalid_argument("beta_schedule: t_max must be > 0");
  if (t < 0.0 || t > t_max)
    throw std::invalid_argument("beta_schedule: t outside [0, t_max]");
  return std::min(1.0, t / (0.5 * t_max));
}

inline double lambda_rampup(double t, double t_max, double lam_max) {
  if (t_max <= 0.0) throw std::invalid_argument("lambda_rampup: t_max must be > 0");
  if (t < 0.0 || t > t_max)
    throw std::invalid_argument("lambda_rampup: t outside [0, t_max]");
  const double r = 1.0 - t / t_max;
  return lam_max * std::exp(-5.0 * r * r);
}

constexpr double kPolyPower = 0.9;

inline double poly_lr(double iter, double max_iter, double lr0) {
  if (max_iter <= 0.0) throw std::invalid_argument("poly_lr: max_iter must be > 0");
  if (iter < 0.0 || iter > max_iter)
    throw std::invalid_argument("poly_lr: iter outside [0, max_iter]");
  return lr0 * std::pow(1.0 - iter / max_iter, kPolyPower);
}

// Schedule values at clock t, plus the fixed loss weights.
struct ScheduleState {
  int64_t t = 0;
  int64_t t_max = 1;
  double beta = 0.0;
  double lam = 0.0;
  double lam_max = 0.1;
  double gamma = 1.0;    // certain-loss weight
  double t_mask = 0.2;   // uncertainty threshold for the pseudo-label mask

  ScheduleState() = default;
  ScheduleState(int64_t t_max_, double lam_max_ = 0.1, double gamma_ = 1.0,
                double t_mask_ = 0.2)
      : t_max(t_max_), lam_max(lam_max_), gamma(gamma_), t_mask(t_mask_) {
    if (t_max <= 0) throw std::invalid_argument("ScheduleState: t_max must be > 0");
    advance_to(0);
  }

  void advance_to(int64_t t_) {
    if (t_ < 0 || t_ > t_max)
      throw std::invalid_argument("ScheduleState: t outside [0, t_max]");
    t = t_;
    beta = beta_schedule(static_cast<double>(t), static_cast<double>(t_max));
    lam = lambda_rampup(static_cast<double>(t), static_cast<double>(t_max), lam_max);
  }
};

}  // namespace evil
