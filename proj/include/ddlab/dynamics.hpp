// Right-hand sides of every augmented system: the density-tracking reverse
// and forward SDEs, the probability-flow ODE, their approximate-score
// variants, the beta-parameterized continuum, the mode-tracking ODE and the
// high-probability ODE with its density evolution.
//
// Augmented SDE rates share one Brownian increment between the state and the
// auxiliary channel: the x rows scale the increment by noise_scale, the aux
// row by noise_scale * aux_loading^T.
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "ddlab/errors.hpp"
#include "ddlab/gaussian_mixture.hpp"
#include "ddlab/schedule.hpp"
#include "ddlab/score_model.hpp"

namespace ddlab {

struct AugmentedState {
  Eigen::VectorXd x;
  double aux = 0.0;
};

struct AugmentedRate {
  Eigen::VectorXd dx;
  double daux = 0.0;
};

struct SdeRate {
  Eigen::VectorXd drift_x;
  double drift_aux = 0.0;
  double noise_scale = 0.0;      // multiplies I_D on x and the loading on aux
  Eigen::VectorXd aux_loading;   // row the aux channel applies to the shared draw
};

enum class SystemKind {
  rev_sde_aug,         // Theorem 1: exact score, tracks log p_t(x_t)
  fwd_sde_aug,         // Theorem 2
  pf_ode_aug,          // probability-flow ODE, exact or approximate score
  approx_rev_sde_aug,  // Theorem 3: r channel
  approx_fwd_sde_aug,  // Theorem 4: omega channel
  beta_fwd_aug,        // general-SDE continuum, forward direction
  beta_rev_aug,        // general-SDE continuum, reverse direction
  mode_ode,            // Theorem 5 (no aux channel)
  hp_ode_aug,          // reverse-SDE drift followed deterministically + density
};

// General instantaneous change of variables: log-density rate of a particle
// moving with f2 against the flow f1 that transports p_t.
inline double cov_rate(const Eigen::VectorXd& f1_rate, const Eigen::VectorXd& f2_rate,
                       double div_f1, const Eigen::VectorXd& score) {
  if (f1_rate.size() != f2_rate.size() || f1_rate.size() != score.size())
    throw std::domain_error("cov_rate: dimension mismatch");
  return -div_f1 + (f2_rate - f1_rate).dot(score);
}

class SystemSpec {
 public:
  SystemSpec(SystemKind kind, NoiseSchedule schedule, ScoreModel model)
      : kind_(kind), schedule_(schedule), model_(std::move(model)) {
    if (requires_exact_score(kind_) && !model_.is_exact())
      throw std::domain_error("SystemSpec: this system requires the exact score");
  }

  static SystemSpec beta_system(SystemKind kind, NoiseSchedule schedule, ScoreModel model,
                                std::function<double(double)> beta) {
    if (kind != SystemKind::beta_fwd_aug && kind != SystemKind::beta_rev_aug)
      throw std::domain_error("beta_system: kind must be a beta variant");
    SystemSpec s(kind, schedule, std::move(model));
    s.beta_ = std::move(beta);
    return s;
  }

  static SystemSpec anchored(SystemKind kind, NoiseSchedule schedule, ScoreModel model,
                             double t_anchor, Eigen::VectorXd x_anchor) {
    if (kind != SystemKind::mode_ode && kind != SystemKind::hp_ode_aug)
      throw std::domain_error("anchored: kind must be mode_ode or hp_ode_aug");
    if (!(t_anchor > 0.0 && t_anchor <= schedule.horizon()))
      throw std::domain_error("anchored: t_anchor must lie in (0, T]");
    SystemSpec s(kind, schedule, std::move(model));
    s.anchor_t_ = t_anchor;
    s.anchor_x_ = std::move(x_anchor);
    return s;
  }

  SystemKind kind() const { return kind_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const ScoreModel& model() const { return model_; }
  double anchor_t() const { return anchor_t_.value(); }
  const Eigen::VectorXd& anchor_x() const { return anchor_x_; }

  // Loading field of the aux channel and its divergence; the integrator's
  // strong-order-1 correction evaluates these at perturbed points.
  Eigen::VectorXd aux_loading(double t, const Eigen::VectorXd& x) const {
    return model_.score(t, x);
  }
  double aux_loading_divergence(double t, const Eigen::VectorXd& x) const {
    return model_.divergence(t, x);
  }

  SdeRate sde_rate(double t, const AugmentedState& state) const {
    switch (kind_) {
      case SystemKind::rev_sde_aug:
      case SystemKind::approx_rev_sde_aug:
        return reverse_rate(t, state);
      case SystemKind::fwd_sde_aug:
      case SystemKind::approx_fwd_sde_aug:
        return forward_rate(t, state);
      case SystemKind::beta_fwd_aug:
      case SystemKind::beta_rev_aug:
        return beta_rate(t, state);
      default:
        throw std::domain_error("sde_rate: system is deterministic");
    }
  }

  AugmentedRate ode_rate(double t, const AugmentedState& state) const {
    switch (kind_) {
      case SystemKind::pf_ode_aug:
        return pf_ode(t, state);
      case SystemKind::hp_ode_aug:
        return hp_ode(t, state);
      case SystemKind::mode_ode:
        return {mode_rhs(t, state.x), 0.0};
      default:
        throw std::domain_error("ode_rate: system is stochastic");
    }
  }

  // dy/ds = f y - g^2 score - g^2/2 * A^{-1} grad_laplacian,
  // A = hessian - psi(s) I, solved symmetrically with condition monitoring.
  // At s == t_anchor the third-order term vanishes in the limit and the rate
  // equals the high-probability ODE drift.
  Eigen::VectorXd mode_rhs(double s, const Eigen::VectorXd& y) const {
    const ScheduleCoeffs c = schedule_.at(s);
    const GaussianMixtureFamily& fam = model_.family();
    Eigen::VectorXd rate = c.f * y - c.g_sq * fam.score(s, y);
    if (s == anchor_t()) return rate;
    if (!(s < anchor_t())) throw std::domain_error("mode_rhs: requires s <= t_anchor");
    const double psi = schedule_.bridge(s, anchor_t()).psi;
    Eigen::MatrixXd a = fam.hessian(s, y);
    a.diagonal().array() -= psi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    const Eigen::VectorXd ev = eig.eigenvalues();
    const double emax = ev.cwiseAbs().maxCoeff();
    const double emin = ev.cwiseAbs().minCoeff();
    if (!(emin > 0.0) || emax / emin > 1e12)
      throw SingularModeError(s, y, emin > 0.0 ? emax / emin
                                               : std::numeric_limits<double>::infinity());
    const Eigen::VectorXd rhs = fam.grad_laplacian(s, y);
    const Eigen::VectorXd solved =
        eig.eigenvectors() * (eig.eigenvectors().transpose() * rhs).cwiseQuotient(ev).eval();
    rate -= 0.5 * c.g_sq * solved;
    return rate;
  }

 private:
  static bool requires_exact_score(SystemKind k) {
    switch (k) {
      case SystemKind::rev_sde_aug:
      case SystemKind::fwd_sde_aug:
      case SystemKind::beta_fwd_aug:
      case SystemKind::beta_rev_aug:
      case SystemKind::mode_ode:
      case SystemKind::hp_ode_aug:
        return true;
      default:
        return false;
    }
  }

  // Theorems 1 and 3 share one form; with the exact score the aux channel is
  // log p_t(x_t), otherwise it is the r estimate.
  SdeRate reverse_rate(double t, const AugmentedState& state) const {
    const ScheduleCoeffs c = schedule_.at(t);
    const Eigen::VectorXd s = model_.score(t, state.x);
    SdeRate r;
    r.drift_x = c.f * state.x - c.g_sq * s;
    r.drift_aux = -c.f * state.x.size() - 0.5 * c.g_sq * s.squaredNorm();
    r.noise_scale = std::sqrt(c.g_sq);
    r.aux_loading = s;
    return r;
  }

  // Theorems 2 and 4. With the exact score the aux drift is
  //   F = -div(f x - g^2 score) + g^2/2 |score|^2
  // which is identical to the omega-channel drift of Theorem 4.
  SdeRate forward_rate(double t, const AugmentedState& state) const {
    const ScheduleCoeffs c = schedule_.at(t);
    const auto [s, div_s] = model_.score_and_divergence(t, state.x);
    SdeRate r;
    r.drift_x = c.f * state.x;
    r.drift_aux =
        -c.f * state.x.size() + c.g_sq * (div_s + 0.5 * s.squaredNorm());
    r.noise_scale = std::sqrt(c.g_sq);
    r.aux_loading = s;
    return r;
  }

  // Marginal-preserving continuum: for any beta >= 0,
  //  forward: dx = (f x - (1/2 - beta) g^2 score) dt + sqrt(2 beta) g dW
  //  reverse: dx = (f x - (1/2 + beta) g^2 score) dt + sqrt(2 beta) g dWbar
  // with the matching log-density rates; beta = 1/2 reverse reproduces
  // Theorem 1 and beta = 0 forward is the PF-ODE with zero diffusion.
  SdeRate beta_rate(double t, const AugmentedState& state) const {
    const double beta = beta_(t);
    if (!(beta >= 0.0)) throw std::domain_error("beta_rate: beta(t) must be >= 0");
    const ScheduleCoeffs c = schedule_.at(t);
    const auto [s, lap] = model_.score_and_divergence(t, state.x);
    const double d = static_cast<double>(state.x.size());
    SdeRate r;
    r.noise_scale = std::sqrt(2.0 * beta * c.g_sq);
    r.aux_loading = s;
    if (kind_ == SystemKind::beta_fwd_aug) {
      r.drift_x = c.f * state.x - (0.5 - beta) * c.g_sq * s;
      r.drift_aux = -c.f * d + (0.5 + beta) * c.g_sq * lap + beta * c.g_sq * s.squaredNorm();
    } else {
      r.drift_x = c.f * state.x - (0.5 + beta) * c.g_sq * s;
      r.drift_aux = -(c.f * d + (beta - 0.5) * c.g_sq * lap + beta * c.g_sq * s.squaredNorm());
    }
    return r;
  }

  AugmentedRate pf_ode(double t, const AugmentedState& state) const {
    const ScheduleCoeffs c = schedule_.at(t);
    const auto [s, div_s] = model_.score_and_divergence(t, state.x);
    AugmentedRate r;
    r.dx = c.f * state.x - 0.5 * c.g_sq * s;
    r.daux = -c.f * state.x.size() + 0.5 * c.g_sq * div_s;
    return r;
  }

  // HP-ODE: the reverse-SDE drift followed deterministically. The aux rate is
  // cov_rate with f1 = PF-ODE and f2 = this drift:
  //   -f D + g^2/2 div score - g^2/2 |score|^2.
  AugmentedRate hp_ode(double t, const AugmentedState& state) const {
    const ScheduleCoeffs c = schedule_.at(t);
    const auto [s, div_s] = model_.score_and_divergence(t, state.x);
    AugmentedRate r;
    r.dx = c.f * state.x - c.g_sq * s;
    r.daux = -c.f * state.x.size() + 0.5 * c.g_sq * div_s - 0.5 * c.g_sq * s.squaredNorm();
    return r;
  }

  SystemKind kind_;
  NoiseSchedule schedule_;
  ScoreModel model_;
  std::function<double(double)> beta_;
  std::optional<double> anchor_t_;
  Eigen::VectorXd anchor_x_;
};

// Spec-shaped free functions over a SystemSpec.
inline SdeRate rhs_reverse_sde_aug(const SystemSpec& spec, double t, const AugmentedState& st) {
  return spec.sde_rate(t, st);
}
inline SdeRate rhs_forward_sde_aug(const SystemSpec& spec, double t, const AugmentedState& st) {
  return spec.sde_rate(t, st);
}
inline AugmentedRate rhs_pf_ode_aug(const SystemSpec& spec, double t, const AugmentedState& st) {
  return spec.ode_rate(t, st);
}
inline SdeRate rhs_approx_reverse_sde_aug(const SystemSpec& spec, double t,
                                          const AugmentedState& st) {
  return spec.sde_rate(t, st);
}
inline SdeRate rhs_approx_forward_sde_aug(const SystemSpec& spec, double t,
                                          const AugmentedState& st) {
  return spec.sde_rate(t, st);
}
inline SdeRate rhs_beta_sde_aug(const SystemSpec& spec, double t, const AugmentedState& st) {
  return spec.sde_rate(t, st);
}
inline Eigen::VectorXd rhs_mode_ode(const SystemSpec& spec, double s, const Eigen::VectorXd& y) {
  return spec.mode_rhs(s, y);
}
inline AugmentedRate rhs_hp_ode_aug(const SystemSpec& spec, double s, const AugmentedState& st) {
  return spec.ode_rate(s, st);
}

}  // namespace ddlab
