// Brute-force ground truth: grid search over denoising posteriors, jump
// detection for discontinuous mode curves, and Richardson finite-difference
// checks of the analytic derivatives.
#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Dense>

#include "ddlab/gaussian_mixture.hpp"
#include "ddlab/parallel.hpp"
#include "ddlab/schedule.hpp"

namespace ddlab {

struct GridSpec {
  std::vector<std::pair<double, double>> bounds;  // per dimension
  std::vector<int> points;                        // per dimension

  static GridSpec uniform_1d(double lo, double hi, int n) { return {{{lo, hi}}, {n}}; }

  void validate() const {
    if (bounds.empty() || bounds.size() != points.size() || bounds.size() > 2)
      throw std::domain_error("GridSpec: supports 1 or 2 dimensions");
    const int limit = bounds.size() == 1 ? 20000 : 512;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (!(std::isfinite(bounds[i].first) && std::isfinite(bounds[i].second) &&
            bounds[i].first < bounds[i].second))
        throw std::domain_error("GridSpec: bounds must be finite and ordered");
      if (points[i] < 8 || points[i] > limit)
        throw std::domain_error("GridSpec: points per dimension out of range");
    }
  }

  double cell(std::size_t d = 0) const {
    return (bounds[d].second - bounds[d].first) / static_cast<double>(points[d] - 1);
  }
};

// log p(x_s | x_t) up to the -log p_t(x_t) constant: bridge kernel
// N(x_t; f_tilde x_s, g_tilde^2 I) plus log p_s(x_s).
inline double denoising_log_objective(const GaussianMixtureFamily& family,
                                      const NoiseSchedule& sched, const Eigen::VectorXd& x_t,
                                      double t, double s, const Eigen::VectorXd& x_s) {
  const BridgeCoefficients b = sched.bridge(s, t);
  const double d = static_cast<double>(x_t.size());
  return -0.5 * (x_t - b.f_tilde * x_s).squaredNorm() / b.g_tilde_sq -
         0.5 * d * std::log(2.0 * std::numbers::pi * b.g_tilde_sq) +
         family.log_density(s, x_s);
}

struct ArgmaxResult {
  Eigen::VectorXd x_star;
  double logp_star;
};

// Exhaustive grid maximization of the denoising objective. Ties break toward
// the smaller linear index, so the reduction is order-independent.
inline ArgmaxResult denoising_grid_argmax(const GaussianMixtureFamily& family,
                                          const NoiseSchedule& sched, const Eigen::VectorXd& x_t,
                                          double t, double s, const GridSpec& grid) {
  grid.validate();
  const std::size_t dims = grid.bounds.size();
  if (static_cast<int>(dims) != family.dim())
    throw std::domain_error("denoising_grid_argmax: grid dimension mismatch");
  if (!(s < t)) throw std::domain_error("denoising_grid_argmax: requires s < t");

  const auto coord = [&](std::size_t d, int i) {
    return grid.bounds[d].first + grid.cell(d) * static_cast<double>(i);
  };

  if (dims == 1) {
    ArgmaxResult best{Eigen::VectorXd(1), -std::numeric_limits<double>::infinity()};
    Eigen::VectorXd x(1);
    for (int i = 0; i < grid.points[0]; ++i) {
      x[0] = coord(0, i);
      const double v = denoising_log_objective(family, sched, x_t, t, s, x);
      if (v > best.logp_star) {
        best.logp_star = v;
        best.x_star = x;
      }
    }
    return best;
  }

  // 2D: rows are independent; reduce row maxima in index order.
  std::vector<ArgmaxResult> rows(grid.points[0]);
  parallel_for(static_cast<std::size_t>(grid.points[0]), [&](std::size_t i) {
    ArgmaxResult best{Eigen::VectorXd(2), -std::numeric_limits<double>::infinity()};
    Eigen::VectorXd x(2);
    x[0] = coord(0, static_cast<int>(i));
    for (int j = 0; j < grid.points[1]; ++j) {
      x[1] = coord(1, j);
      const double v = denoising_log_objective(family, sched, x_t, t, s, x);
      if (v > best.logp_star) {
        best.logp_star = v;
        best.x_star = x;
      }
    }
    rows[i] = std::move(best);
  });
  ArgmaxResult best = rows.front();
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].logp_star > best.logp_star) best = rows[i];
  return best;
}

struct ModeJumpResult {
  bool found = false;
  double lambda_star = 0.0;   // midpoint of the bracketing scan values
  double lambda_lo = 0.0;     // bracket below (anchor side)
  double lambda_hi = 0.0;     // bracket above (data side)
  double left_mode = 0.0;     // grid argmax at lambda_lo
  double right_mode = 0.0;    // grid argmax at lambda_hi
  double displacement = 0.0;  // largest single-step argmax movement seen
};

// Scans lambda_s (ascending), locating the largest single-step displacement
// of the grid argmax. Displacements below `threshold` yield found = false.
inline ModeJumpResult detect_mode_jump(const GaussianMixtureFamily& family,
                                       const NoiseSchedule& sched, const Eigen::VectorXd& x_t,
                                       double t, const std::vector<double>& lambda_scan,
                                       const GridSpec& grid, double threshold = 0.5) {
  if (family.dim() != 1) throw std::domain_error("detect_mode_jump: 1D families only");
  if (lambda_scan.size() < 2) throw std::domain_error("detect_mode_jump: scan too short");
  const double lambda_t = sched.lambda_at(t);
  std::vector<double> modes(lambda_scan.size());
  parallel_for(lambda_scan.size(), [&](std::size_t i) {
    const double l = lambda_scan[i];
    if (!(l > lambda_t)) throw std::domain_error("detect_mode_jump: scan must stay above lambda_t");
    const double s = sched.time_from_lambda(l);
    modes[i] = denoising_grid_argmax(family, sched, x_t, t, s, grid).x_star[0];
  });
  ModeJumpResult r;
  std::size_t at = 0;
  for (std::size_t i = 0; i + 1 < modes.size(); ++i) {
    const double d = std::abs(modes[i + 1] - modes[i]);
    if (d > r.displacement) {
      r.displacement = d;
      at = i;
    }
  }
  if (r.displacement <= threshold) return r;  // no-jump result, not an error
  r.found = true;
  r.lambda_lo = lambda_scan[at];
  r.lambda_hi = lambda_scan[at + 1];
  r.lambda_star = 0.5 * (r.lambda_lo + r.lambda_hi);
  r.left_mode = modes[at];
  r.right_mode = modes[at + 1];
  return r;
}

enum class DerivOrder { score, hessian, laplacian, grad_laplacian };

namespace detail {
// Central difference with optional Richardson extrapolation (h and h/2).
template <class Fn>
double central_diff(Fn&& fn, double h, bool richardson) {
  const auto d_h = [&](double step) { return (fn(step) - fn(-step)) / (2.0 * step); };
  if (!richardson) return d_h(h);
  const double coarse = d_h(h);
  const double fine = d_h(0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

template <class Fn>
Eigen::VectorXd central_diff_vec(Fn&& fn, double h, bool richardson) {
  const auto d_h = [&](double step) -> Eigen::VectorXd {
    return (fn(step) - fn(-step)) / (2.0 * step);
  };
  if (!richardson) return d_h(h);
  const Eigen::VectorXd coarse = d_h(h);
  const Eigen::VectorXd fine = d_h(0.5 * h);
  return (4.0 * fine - coarse) / 3.0;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}
}  // namespace detail

// Max relative (scale-guarded) error of the analytic derivative chain against
// finite differences of the next-lower quantity:
//   score <- log_density, hessian <- score, laplacian <- second differences
//   of log_density, grad_laplacian <- laplacian.
inline double finite_diff_check(const GaussianMixtureFamily& family, double t,
                                const Eigen::VectorXd& x, DerivOrder order,
                                double h_scale = 1e-4, bool richardson = true) {
  const int d = family.dim();
  const auto step = [&](int i) { return h_scale * (1.0 + std::abs(x[i])); };
  const auto shifted = [&](int i, double h) {
    Eigen::VectorXd y = x;
    y[i] += h;
    return y;
  };
  double worst = 0.0;
  switch (order) {
    case DerivOrder::score: {
      const Eigen::VectorXd sc = family.score(t, x);
      for (int i = 0; i < d; ++i) {
        const double fd = detail::central_diff(
            [&](double h) { return family.log_density(t, shifted(i, h)); }, step(i), richardson);
        worst = std::max(worst, detail::rel_err(sc[i], fd));
      }
      break;
    }
    case DerivOrder::hessian: {
      const Eigen::MatrixXd hess = family.hessian(t, x);
      for (int i = 0; i < d; ++i) {
        const Eigen::VectorXd fd = detail::central_diff_vec(
            [&](double h) -> Eigen::VectorXd { return family.score(t, shifted(i, h)); }, step(i),
            richardson);
        for (int j = 0; j < d; ++j) worst = std::max(worst, detail::rel_err(hess(j, i), fd[j]));
      }
      break;
    }
    case DerivOrder::laplacian: {
      const double lap = family.laplacian(t, x);
      double fd = 0.0;
      for (int i = 0; i < d; ++i) {
        const auto second = [&](double h) {
          return (family.log_density(t, shifted(i, h)) - 2.0 * family.log_density(t, x) +
                  family.log_density(t, shifted(i, -h))) /
                 (h * h);
        };
        if (richardson)
          fd += (4.0 * second(0.5 * step(i)) - second(step(i))) / 3.0;
        else
          fd += second(step(i));
      }
      worst = detail::rel_err(lap, fd);
      break;
    }
    case DerivOrder::grad_laplacian: {
      const Eigen::VectorXd gl = family.grad_laplacian(t, x);
      for (int i = 0; i < d; ++i) {
        const double fd = detail::central_diff(
            [&](double h) { return family.laplacian(t, shifted(i, h)); }, step(i), richardson);
        worst = std::max(worst, detail::rel_err(gl[i], fd));
      }
      break;
    }
  }
  return worst;
}

// Newton refinement of a denoising-posterior mode. The Hessian of the
// objective is exactly hessian(log p_s) - psi I, the matrix A of the mode ODE.
inline Eigen::VectorXd newton_polish_denoising_mode(const GaussianMixtureFamily& family,
                                                    const NoiseSchedule& sched,
                                                    const Eigen::VectorXd& x_t, double t,
                                                    double s, Eigen::VectorXd y, int iters = 20) {
  const BridgeCoefficients b = sched.bridge(s, t);
  for (int it = 0; it < iters; ++it) {
    const Eigen::VectorXd grad =
        family.score(s, y) + b.phi * (x_t - b.f_tilde * y);
    Eigen::MatrixXd a = family.hessian(s, y);
    a.diagonal().array() -= b.psi;
    const Eigen::VectorXd delta = a.ldlt().solve(grad);
    y -= delta;
    if (delta.norm() < 1e-13) break;
  }
  return y;
}

}  // namespace ddlab
