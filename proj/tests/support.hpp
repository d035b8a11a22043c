#pragma once

// Shared fixtures for the game tests.

#include <algorithm>
#include <optional>
#include <random>

#include "essl/egt.hpp"
#include "essl/error.hpp"

namespace essl::testing {

// g1=1.5, d1=1, g2=1, d2=1.5, n1=n2=0.5, unit weights: saddle at (5/6, 5/6).
inline const PayoffParams kDerivedParams{1.5, 1.0, 1.0, 1.5, 0.5, 0.5, 1.0, 1.0};

// Positive gains in [lo, hi), impacts in [0, min gain), weights in [w_lo, w_hi).
inline PayoffParams random_params(std::mt19937_64& rng, double lo = 0.1, double hi = 3.0,
                                  double w_lo = 1.0, double w_hi = 1.0) {
  std::uniform_real_distribution<double> gain(lo, hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  PayoffParams p;
  p.g1 = gain(rng);
  p.d1 = gain(rng);
  p.g2 = gain(rng);
  p.d2 = gain(rng);
  const double lim = std::min({p.g1, p.d1, p.g2, p.d2});
  p.n1 = unit(rng) * lim;
  p.n2 = unit(rng) * lim;
  p.w1 = w_lo + (w_hi - w_lo) * unit(rng);
  p.w2 = w_lo + (w_hi - w_lo) * unit(rng);
  return p;
}

// Rejection-samples until the interior point is strictly inside the square.
inline PayoffParams random_params_with_saddle(std::mt19937_64& rng, double lo = 0.1,
                                              double hi = 3.0, double w_lo = 1.0,
                                              double w_hi = 1.0) {
  for (;;) {
    auto p = random_params(rng, lo, hi, w_lo, w_hi);
    try {
      const auto s = saddle_point(p);
      if (s.x > 1e-6 && s.x < 1 - 1e-6 && s.y > 1e-6 && s.y < 1 - 1e-6) return p;
    } catch (const DomainError&) {
    }
  }
}

// Explicit Euler, the plainest possible integrator, for cross-checking.
inline PopulationState euler(const PayoffParams& p, PopulationState s, double t, double h) {
  const auto n = static_cast<long long>(t / h + 0.5);
  for (long long k = 0; k < n; ++k) {
    const double x = s.x;
    const double y = s.y;
    const double a = p.g2 + p.w2 * p.d2;
    const double b = p.w2 * p.d1 + p.g2 + p.n2 + p.w2 * p.n1;
    const double c = p.w1 * p.g1 + p.d1;
    const double e = p.d1 + p.w1 * p.g2 + p.w1 * p.n2 + p.n1;
    s.x = x + h * x * (1 - x) * (a - b * y);
    s.y = y + h * y * (1 - y) * (c - e * x);
  }
  return s;
}

}  // namespace essl::testing
