// Fixed integration grids. Nodes are strictly monotone and include both
// endpoints exactly; direction is given by the endpoint order.
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ddlab/schedule.hpp"

namespace ddlab {

enum class GridSpacing {
  uniform_t,
  uniform_lambda,   // equidistributes log-SNR change
  refined_anchor,   // lambda-uniform, first 1% of the span from t_start at 10x density
};

struct TimeGrid {
  std::vector<double> nodes;
  GridSpacing spacing = GridSpacing::uniform_lambda;

  std::size_t n_steps() const { return nodes.size() - 1; }
  bool reverse() const { return nodes.front() > nodes.back(); }
};

inline TimeGrid make_time_grid(const NoiseSchedule& sched, double t_start, double t_end,
                               std::size_t n_steps,
                               GridSpacing spacing = GridSpacing::uniform_lambda) {
  if (n_steps < 1) throw std::domain_error("make_time_grid: n_steps must be >= 1");
  if (t_start == t_end) throw std::domain_error("make_time_grid: degenerate interval");
  TimeGrid grid;
  grid.spacing = spacing;
  grid.nodes.reserve(n_steps + 1);

  const auto lambda_nodes_to_times = [&](const std::vector<double>& ls) {
    for (double l : ls) grid.nodes.push_back(sched.time_from_lambda(l));
    grid.nodes.front() = t_start;  // pin endpoints against roundoff
    grid.nodes.back() = t_end;
  };

  switch (spacing) {
    case GridSpacing::uniform_t: {
      for (std::size_t k = 0; k <= n_steps; ++k) {
        const double a = static_cast<double>(k) / static_cast<double>(n_steps);
        grid.nodes.push_back(t_start + a * (t_end - t_start));
      }
      grid.nodes.back() = t_end;
      break;
    }
    case GridSpacing::uniform_lambda: {
      const double l0 = sched.lambda_at(t_start);
      const double l1 = sched.lambda_at(t_end);
      std::vector<double> ls(n_steps + 1);
      for (std::size_t k = 0; k <= n_steps; ++k)
        ls[k] = l0 + (l1 - l0) * static_cast<double>(k) / static_cast<double>(n_steps);
      lambda_nodes_to_times(ls);
      break;
    }
    case GridSpacing::refined_anchor: {
      // psi(s) ~ 1/(lambda_s - lambda_anchor) blows up at the anchor; pack the
      // first 1% of the lambda span with 10x node density.
      if (n_steps < 4)
        return make_time_grid(sched, t_start, t_end, n_steps, GridSpacing::uniform_lambda);
      const double l0 = sched.lambda_at(t_start);
      const double l1 = sched.lambda_at(t_end);
      const double frac = 0.01, mult = 10.0;
      std::size_t n_fine = static_cast<std::size_t>(
          std::lround(static_cast<double>(n_steps) * (mult * frac) / (mult * frac + 1.0 - frac)));
      n_fine = std::max<std::size_t>(1, std::min(n_fine, n_steps - 1));
      const std::size_t n_rest = n_steps - n_fine;
      const double l_split = l0 + frac * (l1 - l0);
      std::vector<double> ls;
      ls.reserve(n_steps + 1);
      for (std::size_t k = 0; k <= n_fine; ++k)
        ls.push_back(l0 + (l_split - l0) * static_cast<double>(k) / static_cast<double>(n_fine));
      for (std::size_t k = 1; k <= n_rest; ++k)
        ls.push_back(l_split + (l1 - l_split) * static_cast<double>(k) / static_cast<double>(n_rest));
      lambda_nodes_to_times(ls);
      break;
    }
  }

  for (std::size_t k = 0; k + 1 < grid.nodes.size(); ++k) {
    const bool ok = t_start < t_end ? grid.nodes[k] < grid.nodes[k + 1]
                                    : grid.nodes[k] > grid.nodes[k + 1];
    if (!ok) throw std::domain_error("make_time_grid: nodes not strictly monotone");
  }
  return grid;
}

}  // namespace ddlab
