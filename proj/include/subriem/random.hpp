#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "subriem/types.hpp"

namespace subriem {

/// Seeded generator with platform-independent uniform and normal variates.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2 * std::numbers::pi * u2);
  }

  Vec unit_vector(int n) {
    Vec v(n);
    do {
      for (int i = 0; i < n; ++i) v[i] = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }

  /// Uniform point of the closed ball of radius r around the origin.
  Vec in_ball(int n, double r) { return unit_vector(n) * (r * std::pow(uniform(), 1.0 / n)); }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace subriem
