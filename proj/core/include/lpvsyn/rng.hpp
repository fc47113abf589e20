#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

namespace lpvsyn {

/// Counter-based pseudo-random generator (splitmix64 core).
///
/// Streams are identified by a 64-bit key; drawing advances only a local
/// counter, so a stream can be split into independent substreams that do not
/// depend on how much the parent has been consumed. This is what makes
/// per-trial Monte-Carlo seeding reproducible under parallel fan-out.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed + kGamma)) {}

  /// Independent substream; deterministic in (parent key, index) only.
  [[nodiscard]] Rng split(std::uint64_t index) const {
    return Rng(mix(key_ ^ mix(index + 0x7E46'1C5B'36F9'D1A3ull)));
  }

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (two draws per sample, no cached spare).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double exponential(double mean) {
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return -mean * std::log(u);
  }

  /// Geometric dwell on {1, 2, ...} with the given mean (>= 1).
  int geometric_dwell(double mean) {
    const double p = 1.0 / std::max(1.0, mean);
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return 1 + static_cast<int>(std::floor(std::log(u) / std::log1p(-p)));
  }

  Eigen::VectorXd normal_vector(Eigen::Index dim) {
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal();
    return v;
  }

  /// Uniform over the closed Euclidean ball of the given radius.
  Eigen::VectorXd uniform_ball(Eigen::Index dim, double radius) {
    Eigen::VectorXd dir = normal_vector(dim);
    const double nrm = dir.norm();
    if (nrm == 0.0) return Eigen::VectorXd::Zero(dim);
    const double r = radius * std::pow(uniform01(), 1.0 / static_cast<double>(dim));
    return (r / nrm) * dir;
  }

  /// Flat Dirichlet weights (normalized unit exponentials).
  Eigen::VectorXd dirichlet_flat(Eigen::Index dim) {
    Eigen::VectorXd w(dim);
    for (Eigen::Index i = 0; i < dim; ++i) w[i] = exponential(1.0);
    const double s = w.sum();
    return s > 0.0 ? Eigen::VectorXd((w / s).eval()) : Eigen::VectorXd::Constant(dim, 1.0 / static_cast<double>(dim));
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E37'79B9'7F4A'7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58'476D'1CE4'E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D0'49BB'1331'11EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace lpvsyn
