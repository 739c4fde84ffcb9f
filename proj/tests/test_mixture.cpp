#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ddlab/gaussian_mixture.hpp"
#include "ddlab/oracles.hpp"
#include "ddlab/rng.hpp"

using namespace ddlab;

namespace {
Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}
}  // namespace

TEST_SUITE("mixture") {
  TEST_CASE("stationary standard normal stays standard normal") {
    const GaussianMixtureFamily fam = stationary_fixture();
    for (double t : {0.0, 0.3, 0.7, 1.0}) {
      CHECK(fam.log_density(t, vec1(0.0)) ==
            doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
      CHECK(fam.score(t, vec1(2.0))[0] == doctest::Approx(-2.0).epsilon(1e-12));
    }
  }

  TEST_CASE("bimodal density at t=0 matches direct evaluation and symmetry") {
    const GaussianMixtureFamily fam = bimodal_fixture();
    const auto comp = [](double x, double mu, double v) {
      return std::exp(-0.5 * (x - mu) * (x - mu) / v) / std::sqrt(2.0 * std::numbers::pi * v);
    };
    // t=0 diffused variance is alpha_0^2 c + sigma_0^2, not c exactly
    const ScheduleCoeffs c0 = fam.schedule().at(0.0);
    const double v = c0.alpha * c0.alpha * 0.25 + c0.sigma * c0.sigma;
    const double direct =
        std::log(0.5 * comp(0.0, c0.alpha * -2.0, v) + 0.5 * comp(0.0, c0.alpha * 2.0, v));
    CHECK(fam.log_density(0.0, vec1(0.0)) == doctest::Approx(direct).epsilon(1e-12));
    CounterRng rng(5, 0);
    for (int i = 0; i < 20; ++i) {
      const double x = 4.0 * (rng.uniform() - 0.5);
      const double t = rng.uniform();
      CHECK(fam.log_density(t, vec1(x)) ==
            doctest::Approx(fam.log_density(t, vec1(-x))).epsilon(1e-12));
    }
  }

  TEST_CASE("normalization by Simpson quadrature") {
    const GaussianMixtureFamily fam = bimodal_fixture();
    for (double t : {0.0, 0.4, 0.9}) {
      const double lo = -10.0, hi = 10.0;  // means +- 8 std covers the mass
      const int n = 10000;                 // even
      const double h = (hi - lo) / n;
      double acc = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * std::exp(fam.log_density(t, vec1(lo + i * h)));
      }
      acc *= h / 3.0;
      CHECK(acc == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("single gaussian closed forms") {
    NoiseSchedule sched;
    const double m = 0.7, v0 = 0.5;
    const GaussianMixtureFamily fam(1, {1.0}, {vec1(m)}, {v0}, sched);
    CounterRng rng(8, 0);
    for (int i = 0; i < 20; ++i) {
      const double t = rng.uniform();
      const double x = 3.0 * rng.normal();
      const ScheduleCoeffs c = sched.at(t);
      const double v = c.alpha * c.alpha * v0 + c.sigma * c.sigma;
      CHECK(fam.score(t, vec1(x))[0] ==
            doctest::Approx((c.alpha * m - x) / v).epsilon(1e-12));
      CHECK(fam.grad_laplacian(t, vec1(x))[0] == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(fam.laplacian(t, vec1(x)) == doctest::Approx(-1.0 / v).epsilon(1e-12));
    }
  }

  TEST_CASE("bimodal score vanishes at the symmetry point") {
    const GaussianMixtureFamily fam = bimodal_fixture();
    CHECK(fam.score(0.0, vec1(0.0))[0] == doctest::Approx(0.0).epsilon(1e-14));
  }

  TEST_CASE("derivative chain matches finite differences at random points") {
    const GaussianMixtureFamily fam = bimodal_fixture();
    CounterRng rng(9, 0);
    for (int i = 0; i < 100; ++i) {
      const double t = 0.02 + 0.96 * rng.uniform();
      const Eigen::VectorXd x = vec1(5.0 * (rng.uniform() - 0.5));
      for (DerivOrder o : {DerivOrder::score, DerivOrder::hessian, DerivOrder::laplacian,
                           DerivOrder::grad_laplacian})
        CHECK(finite_diff_check(fam, t, x, o) <= 1e-6);
    }
  }

  TEST_CASE("derivative chain in 2D with distinct component variances") {
    NoiseSchedule sched;
    Eigen::VectorXd m1(2), m2(2), m3(2);
    m1 << -1.0, 1.0;
    m2 << 2.0, 0.5;
    m3 << 0.0, -1.5;
    const GaussianMixtureFamily fam(2, {0.3, 0.5, 0.2}, {m1, m2, m3}, {0.2, 0.6, 0.35}, sched);
    CounterRng rng(10, 0);
    for (int i = 0; i < 25; ++i) {
      const double t = 0.05 + 0.9 * rng.uniform();
      const Eigen::VectorXd x = 2.0 * rng.normal_vector(2);
      for (DerivOrder o : {DerivOrder::score, DerivOrder::hessian, DerivOrder::laplacian,
                           DerivOrder::grad_laplacian})
        CHECK(finite_diff_check(fam, t, x, o) <= 1e-6);
      const Eigen::MatrixXd h = fam.hessian(t, x);
      CHECK((h - h.transpose()).norm() <= 1e-14);
      CHECK(fam.laplacian(t, x) == doctest::Approx(h.trace()).epsilon(1e-12));
    }
  }

  TEST_CASE("posterior mean identity for a single gaussian") {
    NoiseSchedule sched;
    const double m = -0.4, v0 = 0.8;
    const GaussianMixtureFamily fam(1, {1.0}, {vec1(m)}, {v0}, sched);
    CounterRng rng(11, 0);
    for (int i = 0; i < 30; ++i) {
      const double t = 0.05 + 0.9 * rng.uniform();
      const double x = 2.5 * rng.normal();
      const ScheduleCoeffs c = sched.at(t);
      // exact Bayes posterior mean of x0 | xt
      const double prec = 1.0 / v0 + c.alpha * c.alpha / (c.sigma * c.sigma);
      const double mean = (m / v0 + c.alpha * x / (c.sigma * c.sigma)) / prec;
      const double via_score =
          (x + c.sigma * c.sigma * fam.score(t, vec1(x))[0]) / c.alpha;
      CHECK(via_score == doctest::Approx(mean).epsilon(1e-10));
    }
  }

  TEST_CASE("sampling moments") {
    const GaussianMixtureFamily fam = bimodal_fixture();
    CounterRng rng(12, 0);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = fam.sample_p0(rng)[0];
      sum += x;
      sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;  // true: 0.5*(4+0.25)+0.5*(4+0.25)-0 = 4.25
    const double se_mean = std::sqrt(4.25 / n);
    CHECK(std::abs(mean - 0.0) <= 3.0 * se_mean);

    // diffused variance at lambda_min: alpha_T^2 Var(p0) + sigma_T^2
    const double T = fam.schedule().horizon();
    const ScheduleCoeffs cT = fam.schedule().at(T);
    const double vT = cT.alpha * cT.alpha * 4.25 + cT.sigma * cT.sigma;
    double sum2 = 0.0, sumsq2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = fam.sample_pt(T, rng)[0];
      sum2 += x;
      sumsq2 += x * x;
    }
    const double var2 = sumsq2 / n - (sum2 / n) * (sum2 / n);
    // SE of the sample variance of a (near) gaussian: var * sqrt(2/n)
    CHECK(std::abs(var2 - vT) <= 3.0 * vT * std::sqrt(2.0 / n));
    (void)var;
  }

  TEST_CASE("degenerate component collapses to its mean") {
    NoiseSchedule sched;
    const GaussianMixtureFamily fam(1, {1.0}, {vec1(1.5)}, {1e-12}, sched);
    CounterRng rng(13, 0);
    for (int i = 0; i < 10; ++i) CHECK(std::abs(fam.sample_p0(rng)[0] - 1.5) <= 1e-5);
  }

  TEST_CASE("fokker-planck residual") {
    const GaussianMixtureFamily stat = stationary_fixture();
    CounterRng rng(14, 0);
    for (int i = 0; i < 10; ++i) {
      const double t = 0.05 + 0.9 * rng.uniform();
      CHECK(std::abs(stat.fokker_planck_residual(t, vec1(2.0 * rng.normal()))) <= 1e-6);
    }
    const GaussianMixtureFamily fam = bimodal_fixture();
    for (int i = 0; i < 50; ++i) {
      const double t = 0.05 + 0.9 * rng.uniform();
      CHECK(std::abs(fam.fokker_planck_residual(t, vec1(4.0 * (rng.uniform() - 0.5)))) <= 1e-5);
    }
    CHECK_THROWS_AS((void)fam.fokker_planck_residual(1e-7, vec1(0.0)), std::domain_error);
  }

  TEST_CASE("fokker-planck residual is second order in the stencil width") {
    const GaussianMixtureFamily fam = bimodal_fixture();
    const Eigen::VectorXd x = vec1(0.8);
    const double t = 0.37;
    const double r1 = std::abs(fam.fokker_planck_residual(t, x, 2e-3));
    const double r2 = std::abs(fam.fokker_planck_residual(t, x, 1e-3));
    CHECK(r1 / r2 == doctest::Approx(4.0).epsilon(0.15));
  }

  TEST_CASE("construction errors") {
    NoiseSchedule sched;
    CHECK_THROWS_AS(GaussianMixtureFamily(0, {1.0}, {Eigen::VectorXd::Zero(0)}, {1.0}, sched),
                    std::domain_error);
    CHECK_THROWS_AS(GaussianMixtureFamily(9, {1.0}, {Eigen::VectorXd::Zero(9)}, {1.0}, sched),
                    std::domain_error);
    CHECK_THROWS_AS(GaussianMixtureFamily(1, {0.5, 0.5}, {vec1(0.0)}, {1.0, 1.0}, sched),
                    std::domain_error);
    CHECK_THROWS_AS(GaussianMixtureFamily(1, {1.0}, {vec1(0.0)}, {-1.0}, sched),
                    std::domain_error);
    const GaussianMixtureFamily fam = bimodal_fixture();
    CHECK_THROWS_AS((void)fam.log_density(0.5, Eigen::VectorXd::Zero(2)), std::domain_error);
  }

  TEST_CASE("weights renormalize") {
    NoiseSchedule sched;
    const GaussianMixtureFamily fam = trimodal_fixture(sched);
    double s = 0.0;
    for (double w : fam.weights()) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
}
