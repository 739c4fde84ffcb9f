// Isotropic Gaussian mixtures diffused by the linear VP SDE. Every quantity
// the augmented dynamics consume is available in closed form: log-density,
// score, Hessian, Laplacian and gradient of the Laplacian, plus exact
// ancestral sampling of p_0 and p_t.
//
// Diffused component i at time t is N(alpha_t * mu_i, (alpha_t^2 c_i + sigma_t^2) I).
// Responsibilities are computed in log space with max subtraction; lambda
// ranges of +-10 produce exponents that overflow otherwise.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "ddlab/rng.hpp"
#include "ddlab/schedule.hpp"

namespace ddlab {

class GaussianMixtureFamily {
 public:
  GaussianMixtureFamily(int dim, std::vector<double> weights,
                        std::vector<Eigen::VectorXd> means, std::vector<double> variances,
                        NoiseSchedule schedule)
      : dim_(dim),
        weights_(std::move(weights)),
        means_(std::move(means)),
        variances_(std::move(variances)),
        schedule_(schedule) {
    if (dim_ < 1 || dim_ > 8)
      throw std::domain_error("GaussianMixtureFamily: dim must be in [1, 8]");
    const std::size_t k = weights_.size();
    if (k == 0 || means_.size() != k || variances_.size() != k)
      throw std::domain_error("GaussianMixtureFamily: weights/means/variances size mismatch");
    double wsum = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw std::domain_error("GaussianMixtureFamily: weights must be positive");
      wsum += w;
    }
    for (double& w : weights_) w /= wsum;  // accept unnormalized weights
    for (const auto& m : means_)
      if (m.size() != dim_) throw std::domain_error("GaussianMixtureFamily: mean dim mismatch");
    for (double c : variances_)
      if (!(c > 0.0)) throw std::domain_error("GaussianMixtureFamily: variances must be positive");
    log_weights_.resize(k);
    for (std::size_t i = 0; i < k; ++i) log_weights_[i] = std::log(weights_[i]);
  }

  int dim() const { return dim_; }
  std::size_t components() const { return weights_.size(); }
  const NoiseSchedule& schedule() const { return schedule_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<double>& variances() const { return variances_; }

  // Diffused parameters of component i at time t.
  std::pair<Eigen::VectorXd, double> diffused_component(std::size_t i, double t) const {
    const ScheduleCoeffs c = schedule_.at(t);
    return {c.alpha * means_[i], c.alpha * c.alpha * variances_[i] + c.sigma * c.sigma};
  }

  double log_density(double t, const Eigen::VectorXd& x) const {
    const Local loc = local(t, x);
    return loc.log_p;
  }

  Eigen::VectorXd score(double t, const Eigen::VectorXd& x) const {
    const Local loc = local(t, x);
    return loc.score;
  }

  // score together with the Laplacian; one responsibility pass.
  std::pair<Eigen::VectorXd, double> score_and_laplacian(double t,
                                                         const Eigen::VectorXd& x) const {
    const Local loc = local(t, x);
    double lap = -loc.score.squaredNorm();
    for (std::size_t i = 0; i < components(); ++i)
      lap += loc.resp[i] * (-dim_ / loc.var[i] + loc.u[i].squaredNorm());
    return {loc.score, lap};
  }

  Eigen::MatrixXd hessian(double t, const Eigen::VectorXd& x) const {
    const Local loc = local(t, x);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
    for (std::size_t i = 0; i < components(); ++i) {
      h += loc.resp[i] * (loc.u[i] * loc.u[i].transpose());
      h.diagonal().array() -= loc.resp[i] / loc.var[i];
    }
    h -= loc.score * loc.score.transpose();
    return h;
  }

  double laplacian(double t, const Eigen::VectorXd& x) const {
    return score_and_laplacian(t, x).second;
  }

  // grad Laplacian of log p_t. With a_i = -D/v_i + |u_i|^2 and H the Hessian:
  //   sum_i rho_i a_i u_i - (sum_i rho_i a_i) s - 2 sum_i rho_i u_i / v_i - 2 H s.
  Eigen::VectorXd grad_laplacian(double t, const Eigen::VectorXd& x) const {
    const Local loc = local(t, x);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim_, dim_);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim_);
    double abar = 0.0;
    for (std::size_t i = 0; i < components(); ++i) {
      const double a_i = -dim_ / loc.var[i] + loc.u[i].squaredNorm();
      out += loc.resp[i] * (a_i * loc.u[i] - 2.0 * loc.u[i] / loc.var[i]);
      abar += loc.resp[i] * a_i;
      h += loc.resp[i] * (loc.u[i] * loc.u[i].transpose());
      h.diagonal().array() -= loc.resp[i] / loc.var[i];
    }
    h -= loc.score * loc.score.transpose();
    out -= abar * loc.score;
    out -= 2.0 * h * loc.score;
    return out;
  }

  Eigen::VectorXd sample_p0(CounterRng& rng) const {
    const int i = rng.categorical(weights_);
    return means_[i] + std::sqrt(variances_[i]) * rng.normal_vector(dim_).eval();
  }

  Eigen::VectorXd sample_pt(double t, CounterRng& rng) const {
    const int i = rng.categorical(weights_);
    const auto [m, v] = diffused_component(static_cast<std::size_t>(i), t);
    return m + std::sqrt(v) * rng.normal_vector(dim_).eval();
  }

  // Residual of the log-form Fokker-Planck equation:
  //   d/dt log p_t(x)  -  [ -f D + g^2/2 lap - score . (f x - g^2/2 score) ],
  // with the time derivative taken by a central difference of width dt_step.
  // Zero up to stencil error for any valid family; used as a self-check.
  double fokker_planck_residual(double t, const Eigen::VectorXd& x,
                                double dt_step = 1e-5) const {
    const double T = schedule_.horizon();
    if (!(t - dt_step > 0.0 && t + dt_step < T))
      throw std::domain_error("fokker_planck_residual: stencil leaves (0, T)");
    const double ddt =
        (log_density(t + dt_step, x) - log_density(t - dt_step, x)) / (2.0 * dt_step);
    const ScheduleCoeffs c = schedule_.at(t);
    const auto [s, lap] = score_and_laplacian(t, x);
    const double rhs = -c.f * dim_ + 0.5 * c.g_sq * lap -
                       s.dot(c.f * x - 0.5 * c.g_sq * s);
    return ddt - rhs;
  }

  bool operator==(const GaussianMixtureFamily& o) const {
    if (dim_ != o.dim_ || weights_.size() != o.weights_.size() || !(schedule_ == o.schedule_))
      return false;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_[i] != o.weights_[i] || variances_[i] != o.variances_[i] ||
          means_[i] != o.means_[i])
        return false;
    }
    return true;
  }

 private:
  struct Local {
    double log_p;
    Eigen::VectorXd score;
    std::vector<double> resp;           // posterior responsibilities
    std::vector<Eigen::VectorXd> u;     // per-component score (m_i - x)/v_i
    std::vector<double> var;            // diffused variances
  };

  Local local(double t, const Eigen::VectorXd& x) const {
    if (x.size() != dim_)
      throw std::domain_error("GaussianMixtureFamily: x has wrong dimension");
    const ScheduleCoeffs c = schedule_.at(t);
    const std::size_t k = components();
    Local loc;
    loc.resp.resize(k);
    loc.u.resize(k);
    loc.var.resize(k);
    std::vector<double> lw(k);
    double lw_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double v = c.alpha * c.alpha * variances_[i] + c.sigma * c.sigma;
      const Eigen::VectorXd d = c.alpha * means_[i] - x;
      loc.var[i] = v;
      loc.u[i] = d / v;
      lw[i] = log_weights_[i] - 0.5 * dim_ * std::log(2.0 * std::numbers::pi * v) -
              0.5 * d.squaredNorm() / v;
      lw_max = std::max(lw_max, lw[i]);
    }
    double z = 0.0;
    for (std::size_t i = 0; i < k; ++i) z += std::exp(lw[i] - lw_max);
    loc.log_p = lw_max + std::log(z);
    loc.score = Eigen::VectorXd::Zero(dim_);
    for (std::size_t i = 0; i < k; ++i) {
      loc.resp[i] = std::exp(lw[i] - loc.log_p);
      loc.score += loc.resp[i] * loc.u[i];
    }
    return loc;
  }

  int dim_;
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<double> variances_;
  std::vector<double> log_weights_;
  NoiseSchedule schedule_;
};

// Fixtures used throughout the tests and as CLI defaults.
inline GaussianMixtureFamily stationary_fixture(NoiseSchedule sched = {}) {
  return {1, {1.0}, {Eigen::VectorXd::Zero(1)}, {1.0}, sched};
}

inline GaussianMixtureFamily bimodal_fixture(NoiseSchedule sched = {}) {
  Eigen::VectorXd m1(1), m2(1);
  m1 << -2.0;
  m2 << 2.0;
  return {1, {0.5, 0.5}, {m1, m2}, {0.25, 0.25}, sched};
}

// Three-component 1D mixture exhibiting a discontinuous denoising-mode curve.
// Published weights sum to 0.998; the constructor renormalizes.
inline GaussianMixtureFamily trimodal_fixture(NoiseSchedule sched = {}) {
  Eigen::VectorXd m1(1), m2(1), m3(1);
  m1 << -2.5;
  m2 << -1.5;
  m3 << 1.0;
  return {1, {0.274, 0.274, 0.45}, {m1, m2, m3}, {0.1, 0.1, 0.1}, sched};
}

}  // namespace ddlab
