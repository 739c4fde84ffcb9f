// Variance-preserving noise schedule with log-SNR linear in time, and the
// denoising-bridge coefficients derived from it. All coefficients are in
// closed form; no numerical differentiation anywhere in this header.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace ddlab {

// All five schedule coefficients at one time.
struct ScheduleCoeffs {
  double alpha;   // signal scale, alpha^2 = sigmoid(lambda)
  double sigma;   // noise scale,  sigma^2 = 1 - alpha^2
  double lambda;  // log signal-to-noise ratio
  double f;       // drift coefficient, d log(alpha_t)/dt
  double g_sq;    // squared diffusion, -dlambda/dt * sigma^2
};

// Coefficients of the Gaussian bridge p(x_t | x_s) for s < t:
//   x_t | x_s ~ N(f_tilde * x_s, g_tilde_sq * I).
struct BridgeCoefficients {
  double f_tilde;     // alpha_t / alpha_s
  double g_tilde_sq;  // sigma_t^2 - f_tilde^2 * sigma_s^2
  double psi;         // f_tilde^2 / g_tilde_sq
  double phi;         // f_tilde / g_tilde_sq
};

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// VP schedule, lambda linear in t: lambda(t) = lambda_max + (lambda_min - lambda_max) t / T.
class NoiseSchedule {
 public:
  NoiseSchedule(double lambda_max = 10.0, double lambda_min = -10.0, double horizon = 1.0)
      : lambda_max_(lambda_max), lambda_min_(lambda_min), horizon_(horizon) {
    if (!(lambda_max > lambda_min))
      throw std::domain_error("NoiseSchedule: lambda_max must exceed lambda_min");
    if (!(horizon > 0.0)) throw std::domain_error("NoiseSchedule: horizon must be positive");
  }

  double lambda_max() const { return lambda_max_; }
  double lambda_min() const { return lambda_min_; }
  double horizon() const { return horizon_; }
  double dlambda_dt() const { return (lambda_min_ - lambda_max_) / horizon_; }

  double lambda_at(double t) const {
    check_time(t);
    return lambda_max_ + (lambda_min_ - lambda_max_) * (t / horizon_);
  }

  ScheduleCoeffs at(double t) const {
    check_time(t);
    const double lam = lambda_at(t);
    const double sigma_sq = sigmoid(-lam);
    const double dldt = dlambda_dt();
    ScheduleCoeffs c;
    c.lambda = lam;
    c.alpha = std::sqrt(sigmoid(lam));
    c.sigma = std::sqrt(sigma_sq);
    c.f = 0.5 * sigma_sq * dldt;
    c.g_sq = -dldt * sigma_sq;
    return c;
  }

  // Inverse of t -> lambda_t; exact for the linear-lambda schedule.
  double time_from_lambda(double lambda) const {
    if (lambda > lambda_max_ || lambda < lambda_min_)
      throw std::domain_error("time_from_lambda: lambda outside [lambda_min, lambda_max]");
    return horizon_ * (lambda - lambda_max_) / (lambda_min_ - lambda_max_);
  }

  // Bridge coefficients for the conditional p(x_t | x_s), s < t.
  // psi = (1/sigma_s^2) * e^{lambda_t} / (e^{lambda_s} - e^{lambda_t}),
  // evaluated as 1 / (sigma_s^2 * expm1(lambda_s - lambda_t)) for stability.
  BridgeCoefficients bridge(double s, double t) const {
    check_time(s);
    check_time(t);
    if (!(s < t)) throw std::domain_error("bridge: requires s < t");
    const ScheduleCoeffs cs = at(s);
    const ScheduleCoeffs ct = at(t);
    BridgeCoefficients b;
    b.f_tilde = ct.alpha / cs.alpha;
    // g_tilde_sq = sigma_t^2 * (1 - e^{lambda_t - lambda_s}), positive for s < t
    b.g_tilde_sq = ct.sigma * ct.sigma * (-std::expm1(ct.lambda - cs.lambda));
    b.psi = 1.0 / (cs.sigma * cs.sigma * std::expm1(cs.lambda - ct.lambda));
    b.phi = b.f_tilde / b.g_tilde_sq;
    return b;
  }

  bool operator==(const NoiseSchedule& o) const {
    return lambda_max_ == o.lambda_max_ && lambda_min_ == o.lambda_min_ && horizon_ == o.horizon_;
  }

 private:
  void check_time(double t) const {
    if (!(t >= 0.0 && t <= horizon_))
      throw std::domain_error("NoiseSchedule: t = " + std::to_string(t) + " outside [0, " +
                              std::to_string(horizon_) + "]");
  }

  double lambda_max_;
  double lambda_min_;
  double horizon_;
};

}  // namespace ddlab
