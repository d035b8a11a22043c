#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "essl/egt.hpp"

namespace essl {

enum class StabilityClass { UnstablePoint, StablePoint, SaddlePoint, Degenerate };

std::string_view to_string(StabilityClass c) noexcept;

struct Equilibrium {
  PopulationState point;
  double det = 0.0;
  double trace = 0.0;
  StabilityClass cls = StabilityClass::Degenerate;
};

// Corners (0,0), (0,1), (1,0), (1,1) in that order, then the interior point
// when it exists inside the closed unit square and is not already a corner.
std::vector<PopulationState> enumerate_equilibria(const PayoffParams& p);

Matrix2x2 jacobian(const PayoffParams& p, PopulationState s) noexcept;

// Determinant/trace rule: det < 0 saddle; det > 0 with trace > 0 unstable,
// trace < 0 stable; anything within zero_tol of the boundary is Degenerate.
// Throws ContractViolation if `point` is not a fixed point.
Equilibrium classify(const PayoffParams& p, PopulationState point, double zero_tol = kZeroTol);

// Independent route through the closed-form eigenvalues of the Jacobian.
Equilibrium classify_by_eigen(const PayoffParams& p, PopulationState point,
                              double zero_tol = kZeroTol);
StabilityClass classify_matrix_by_eigen(const Matrix2x2& j, double zero_tol = kZeroTol) noexcept;

std::vector<Equilibrium> classify_all(const PayoffParams& p);

// `x,y,det,trace,class` with a header row.
std::string equilibria_csv(const std::vector<Equilibrium>& eqs);
// Column-aligned text for terminals.
std::string equilibria_table(const std::vector<Equilibrium>& eqs);

}  // namespace essl
