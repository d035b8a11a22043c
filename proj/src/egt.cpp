#include "essl/egt.hpp"

#include <cmath>

#include "essl/error.hpp"

namespace essl {

Matrix2x2 income_matrix_gen(const PayoffParams& p) noexcept {
  return {{p.w1 * (p.g1 - p.n2) + (p.d2 - p.n1), p.w1 * p.g1 + p.d1,  //
           p.w1 * p.g2 + p.d2, 0.0}};
}

Matrix2x2 income_matrix_dis(const PayoffParams& p) noexcept {
  return {{(p.g1 - p.n2) + p.w2 * (p.d2 - p.n1), p.g1 + p.w2 * p.d1,  //
           p.g2 + p.w2 * p.d2, 0.0}};
}

Utilities expected_utility_gen(const PayoffParams& p, PopulationState s) noexcept {
  const auto h = income_matrix_gen(p);
  const double row_a = h(0, 0) * s.x + h(0, 1) * (1.0 - s.x);
  const double row_u = h(1, 0) * s.x + h(1, 1) * (1.0 - s.x);
  return {row_a, s.y * row_a + (1.0 - s.y) * row_u};
}

Utilities expected_utility_dis(const PayoffParams& p, PopulationState s) noexcept {
  const auto k = income_matrix_dis(p);
  // Rows of K^T: the discriminability player's own strategy.
  const double row_a = k(0, 0) * s.y + k(1, 0) * (1.0 - s.y);
  const double row_u = k(0, 1) * s.y + k(1, 1) * (1.0 - s.y);
  return {row_a, s.x * row_a + (1.0 - s.x) * row_u};
}

GrowthBrackets growth_brackets(const PayoffParams& p) noexcept {
  return {p.g2 + p.w2 * p.d2, p.w2 * p.d1 + p.g2 + p.n2 + p.w2 * p.n1,  //
          p.w1 * p.g1 + p.d1, p.d1 + p.w1 * p.g2 + p.w1 * p.n2 + p.n1};
}

Velocity replicator_rhs(const PayoffParams& p, PopulationState s) noexcept {
  const auto g = growth_brackets(p);
  return {s.x * (1.0 - s.x) * (g.a - g.b * s.y), s.y * (1.0 - s.y) * (g.c - g.e * s.x)};
}

PopulationState saddle_point_unchecked(const PayoffParams& p) {
  const auto g = growth_brackets(p);
  if (g.e == 0.0 || g.b == 0.0 || !std::isfinite(g.e) || !std::isfinite(g.b)) {
    throw DegenerateGameError("interior fixed point undefined: zero denominator");
  }
  return {g.c / g.e, g.a / g.b};
}

PopulationState saddle_point(const PayoffParams& p) {
  auto s = saddle_point_unchecked(p);
  if (!s.in_unit_square()) throw OutOfSimplexError(s.x, s.y);
  return s;
}

bool is_ess(double f_value, double f_derivative, double zero_tol) noexcept {
  return std::abs(f_value) <= zero_tol && f_derivative <= zero_tol;
}

}  // namespace essl
