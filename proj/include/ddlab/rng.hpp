// Counter-based random number generation. Draws are a pure function of
// (seed, stream, substream, counter), so parallel paths need no shared RNG
// state and replaying a seed reproduces every draw bit-for-bit.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>

#include <Eigen/Core>

namespace ddlab {

namespace detail {
// SplitMix64 finalizer; used both for key derivation and output mixing.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class CounterRng {
 public:
  // Reserved substream for draws that are not tied to an integrator step
  // (initial conditions, component picks).
  static constexpr std::uint64_t kInitSubstream = 0xffffffffffffffffULL;

  CounterRng(std::uint64_t seed, std::uint64_t stream = 0,
             std::uint64_t substream = kInitSubstream) {
    using detail::mix64;
    key_ = mix64(mix64(mix64(seed ^ 0x8f5c2d1aa3b7e941ULL) + stream) + substream);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller; u1 shifted into (0, 1] to keep the log finite.
    const double u1 = (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(next() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vector(Eigen::Index d) {
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z[i] = normal();
    return z;
  }

  // Index into a normalized probability vector.
  int categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

 private:
  std::uint64_t next() { return detail::mix64(key_ + 0x9e3779b97f4a7c15ULL * (++counter_)); }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ddlab
