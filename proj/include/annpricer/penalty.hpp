#pragma once

#include <array>
#include <cmath>

namespace annp {

/// Soft no-arbitrage constraint weights for the butterfly (index 0),
/// calendar (1) and vertical (2) conditions.
struct PenaltyConfig {
  std::array<double, 3> lambda{0.0, 0.0, 0.0};
  std::array<int, 3> power{4, 4, 4};

  static PenaltyConfig uniform(double lambda, int power) { return {{lambda, lambda, lambda}, {power, power, power}}; }
  /// lambda = 1, m = 0: counts violated conditions.
  static PenaltyConfig counting() { return uniform(1.0, 0); }

  bool active() const { return lambda[0] > 0.0 || lambda[1] > 0.0 || lambda[2] > 0.0; }
  /// Throws ConfigError on negative lambda or power.
  void validate() const;
};

/// 0 for x < 0, lambda x^m for x >= 0. Differentiable m-1 times at the origin.
inline double phi(double x, double lambda, int m) {
  if (x < 0.0) return 0.0;
  return lambda * (m == 0 ? 1.0 : std::pow(x, m));
}

/// d(phi)/dx; zero in counting mode (m = 0).
inline double phi_d1(double x, double lambda, int m) {
  if (x < 0.0 || m == 0) return 0.0;
  return lambda * m * (m == 1 ? 1.0 : std::pow(x, m - 1));
}

}  // namespace annp
