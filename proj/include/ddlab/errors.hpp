// Exception types shared across the library.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ddlab {

// Non-finite state or other failure inside an integrator; carries the node
// index at which the failure was detected.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(std::size_t node_index, const std::string& what)
      : std::runtime_error(what), node_index(node_index) {}
  std::size_t node_index;
};

// A(s, y) = hessian - psi*I became numerically singular along the mode ODE.
// The caller may stop integration; the mode curve need not be continuous.
class SingularModeError : public std::runtime_error {
 public:
  SingularModeError(double s, Eigen::VectorXd y, double condition)
      : std::runtime_error("mode ODE: A(s,y) singular at s=" + std::to_string(s) +
                           " (cond ~ " + std::to_string(condition) + ")"),
        s(s), y(std::move(y)), condition(condition) {}
  double s;
  Eigen::VectorXd y;
  double condition;
};

// Estimator asked to use a configuration in which the quantity it needs
// (the score of the sampler's own marginal) is not analytically known.
class UnsupportedConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Experiment configuration rejected; `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field(std::move(field)) {}
  std::string field;
};

}  // namespace ddlab
