// Fixed-grid integrators over the augmented state.
//
// ODEs use Heun (explicit trapezoid, order 2). SDEs use Euler-Maruyama with
// one D-dimensional standard normal draw per step, shared between the x rows
// and the aux row; the draw is a pure function of (seed, path, step).
//
// The plain Euler-Maruyama aux channel has strong order 1/2: its noise
// loading (the score) is state-dependent even though the x noise is additive.
// AuxScheme::corrected adds the Milstein term of the shared increment,
//   1/2 ( dxi . [s(t, x + dxi) - s(t, x)] - noise_scale^2 div s |dt| ),
// restoring strong order 1 at the cost of one extra loading evaluation and
// the analytic divergence per step.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "ddlab/dynamics.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/rng.hpp"
#include "ddlab/time_grid.hpp"

namespace ddlab {

struct AugmentedTrajectory {
  TimeGrid grid;
  std::vector<AugmentedState> states;  // one per node
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;

  const AugmentedState& front() const { return states.front(); }
  const AugmentedState& back() const { return states.back(); }
};

enum class AuxScheme { euler_maruyama, corrected };

namespace detail {
inline void check_finite(const AugmentedState& s, std::size_t node) {
  if (!s.x.allFinite() || !std::isfinite(s.aux))
    throw IntegrationError(node, "non-finite state at node " + std::to_string(node));
}
}  // namespace detail

// Heun steps of rhs(t, state) -> AugmentedRate over the grid.
template <class Rhs>
AugmentedTrajectory integrate_ode(Rhs&& rhs, const TimeGrid& grid, AugmentedState initial) {
  AugmentedTrajectory traj;
  traj.grid = grid;
  traj.states.reserve(grid.nodes.size());
  traj.states.push_back(std::move(initial));
  for (std::size_t k = 0; k + 1 < grid.nodes.size(); ++k) {
    const double t0 = grid.nodes[k];
    const double t1 = grid.nodes[k + 1];
    const double dt = t1 - t0;
    const AugmentedState& y = traj.states.back();
    const AugmentedRate r0 = rhs(t0, y);
    AugmentedState pred{y.x + dt * r0.dx, y.aux + dt * r0.daux};
    const AugmentedRate r1 = rhs(t1, pred);
    AugmentedState next{y.x + 0.5 * dt * (r0.dx + r1.dx),
                        y.aux + 0.5 * dt * (r0.daux + r1.daux)};
    detail::check_finite(next, k + 1);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

// Euler-Maruyama with caller-supplied standard normal increments (one per
// step). Used directly by convergence tests that couple resolutions through
// a common Brownian path.
template <class System>
AugmentedTrajectory integrate_sde_with_increments(const System& sys, const TimeGrid& grid,
                                                  AugmentedState initial,
                                                  const std::vector<Eigen::VectorXd>& z,
                                                  AuxScheme scheme = AuxScheme::euler_maruyama) {
  if (z.size() != grid.n_steps())
    throw std::domain_error("integrate_sde_with_increments: need one draw per step");
  AugmentedTrajectory traj;
  traj.grid = grid;
  traj.states.reserve(grid.nodes.size());
  traj.states.push_back(std::move(initial));
  for (std::size_t k = 0; k + 1 < grid.nodes.size(); ++k) {
    const double t0 = grid.nodes[k];
    const double dt = grid.nodes[k + 1] - t0;
    const double sdt = std::sqrt(std::abs(dt));
    const AugmentedState& y = traj.states.back();
    const SdeRate r = sys.sde_rate(t0, y);
    const Eigen::VectorXd dxi = r.noise_scale * sdt * z[k];
    AugmentedState next;
    next.x = y.x + dt * r.drift_x + dxi;
    next.aux = y.aux + dt * r.drift_aux + r.aux_loading.dot(dxi);
    if (scheme == AuxScheme::corrected && r.noise_scale > 0.0) {
      const Eigen::VectorXd loading_shift = sys.aux_loading(t0, y.x + dxi);
      const double div = sys.aux_loading_divergence(t0, y.x);
      next.aux += 0.5 * (dxi.dot(loading_shift - r.aux_loading) -
                         r.noise_scale * r.noise_scale * div * std::abs(dt));
    }
    detail::check_finite(next, k + 1);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

template <class System>
AugmentedTrajectory integrate_sde(const System& sys, const TimeGrid& grid,
                                  AugmentedState initial, std::uint64_t seed,
                                  std::uint64_t path_index = 0,
                                  AuxScheme scheme = AuxScheme::euler_maruyama) {
  const Eigen::Index d = initial.x.size();
  std::vector<Eigen::VectorXd> z;
  z.reserve(grid.n_steps());
  for (std::size_t k = 0; k < grid.n_steps(); ++k)
    z.push_back(CounterRng(seed, path_index, k).normal_vector(d));
  AugmentedTrajectory traj =
      integrate_sde_with_increments(sys, grid, std::move(initial), z, scheme);
  traj.seed = seed;
  traj.path_index = path_index;
  return traj;
}

}  // namespace ddlab
