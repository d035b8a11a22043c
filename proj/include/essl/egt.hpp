#pragma once

// Two-population replicator game between discriminability models (share x
// adopting strategy A) and generalizability models (share y adopting A).

#include <array>

#include "essl/metrics.hpp"

namespace essl {

inline constexpr double kZeroTol = 1e-9;

struct PopulationState {
  double x = 0.0;
  double y = 0.0;

  bool in_unit_square(double slack = 0.0) const noexcept {
    return x >= -slack && x <= 1.0 + slack && y >= -slack && y <= 1.0 + slack;
  }

  bool operator==(const PopulationState&) const = default;
};

// Row-major 2x2 matrix.
struct Matrix2x2 {
  std::array<double, 4> v{};

  double operator()(int r, int c) const noexcept { return v[static_cast<std::size_t>(2 * r + c)]; }
  double& operator()(int r, int c) noexcept { return v[static_cast<std::size_t>(2 * r + c)]; }

  double det() const noexcept { return v[0] * v[3] - v[1] * v[2]; }
  double trace() const noexcept { return v[0] + v[3]; }

  bool operator==(const Matrix2x2&) const = default;
};

// Income of the generalizability player, rows = own strategy (A, U), columns
// = opponent strategy (A, U).
Matrix2x2 income_matrix_gen(const PayoffParams& p) noexcept;
// Income of the discriminability player, in the same (gen row, dis column)
// layout as the shared payoff table.
Matrix2x2 income_matrix_dis(const PayoffParams& p) noexcept;

struct Utilities {
  double adopt = 0.0;    // expected utility of strategy A
  double average = 0.0;  // population-average expected utility
};

// u_A = e H (x, 1-x)^T, u_bar = (y, 1-y) H (x, 1-x)^T.
Utilities expected_utility_gen(const PayoffParams& p, PopulationState s) noexcept;
// Mirror image for the x population, read through K^T.
Utilities expected_utility_dis(const PayoffParams& p, PopulationState s) noexcept;

struct Velocity {
  double dx = 0.0;
  double dy = 0.0;
};

// The coupled replicator equations. Brackets are linear in the other
// population's share; see growth_brackets().
Velocity replicator_rhs(const PayoffParams& p, PopulationState s) noexcept;

// dx/dt = x(1-x)(a - b y), dy/dt = y(1-y)(c - e x).
struct GrowthBrackets {
  double a = 0.0;  // g2 + w2 d2
  double b = 0.0;  // w2 d1 + g2 + n2 + w2 n1
  double c = 0.0;  // w1 g1 + d1
  double e = 0.0;  // d1 + w1 g2 + w1 n2 + n1
};
GrowthBrackets growth_brackets(const PayoffParams& p) noexcept;

// Interior fixed point (c/e, a/b) without any range check. Throws
// DegenerateGameError when a denominator vanishes.
PopulationState saddle_point_unchecked(const PayoffParams& p);

// As above, but throws OutOfSimplexError (carrying the raw coordinates) when
// the point falls outside [0,1]^2.
PopulationState saddle_point(const PayoffParams& p);

// Stability test for a one-dimensional replicator equation: F = 0, F' <= 0.
bool is_ess(double f_value, double f_derivative, double zero_tol = kZeroTol) noexcept;

}  // namespace essl
