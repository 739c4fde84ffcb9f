// Score oracles s(t, x) with analytic divergence. Three variants:
//   exact      - the true score of a mixture family,
//   mismatched - the exact score of a *different* mixture (approximation
//                error known by construction),
//   perturbed  - exact score plus a constant vector field eps * b, which is
//                divergence-free.
#pragma once

#include <stdexcept>
#include <utility>

#include <Eigen/Core>

#include "ddlab/gaussian_mixture.hpp"

namespace ddlab {

class ScoreModel {
 public:
  enum class Kind { exact, mismatched, perturbed };

  static ScoreModel exact(GaussianMixtureFamily fam) {
    return ScoreModel(Kind::exact, std::move(fam), Eigen::VectorXd(), 0.0);
  }

  // Score of q_t, the diffusion of a different mixture under the same schedule.
  static ScoreModel mismatched(GaussianMixtureFamily q) {
    return ScoreModel(Kind::mismatched, std::move(q), Eigen::VectorXd(), 0.0);
  }

  static ScoreModel perturbed(GaussianMixtureFamily fam, Eigen::VectorXd bias, double eps) {
    if (bias.size() != fam.dim())
      throw std::domain_error("ScoreModel::perturbed: bias dimension mismatch");
    return ScoreModel(Kind::perturbed, std::move(fam), std::move(bias), eps);
  }

  Kind kind() const { return kind_; }
  bool is_exact() const { return kind_ == Kind::exact; }
  double eps() const { return eps_; }
  const Eigen::VectorXd& bias() const { return bias_; }

  // The family this model differentiates (q for the mismatched variant).
  const GaussianMixtureFamily& family() const { return family_; }

  Eigen::VectorXd score(double t, const Eigen::VectorXd& x) const {
    Eigen::VectorXd s = family_.score(t, x);
    if (kind_ == Kind::perturbed) s += eps_ * bias_;
    return s;
  }

  // div_x s(t, x); the constant perturbation contributes nothing.
  double divergence(double t, const Eigen::VectorXd& x) const {
    return family_.laplacian(t, x);
  }

  std::pair<Eigen::VectorXd, double> score_and_divergence(double t,
                                                          const Eigen::VectorXd& x) const {
    auto [s, lap] = family_.score_and_laplacian(t, x);
    if (kind_ == Kind::perturbed) s += eps_ * bias_;
    return {s, lap};
  }

 private:
  ScoreModel(Kind kind, GaussianMixtureFamily fam, Eigen::VectorXd bias, double eps)
      : kind_(kind), family_(std::move(fam)), bias_(std::move(bias)), eps_(eps) {}

  Kind kind_;
  GaussianMixtureFamily family_;
  Eigen::VectorXd bias_;
  double eps_;
};

}  // namespace ddlab
