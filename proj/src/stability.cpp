#include "essl/stability.hpp"

#include <cmath>
#include <cstdio>

#include "essl/error.hpp"
#include "essl/text_io.hpp"

namespace essl {

namespace {

void require_fixed_point(const PayoffParams& p, PopulationState s, double tol) {
  const auto v = replicator_rhs(p, s);
  if (!(std::abs(v.dx) <= tol && std::abs(v.dy) <= tol)) {
    throw ContractViolation("(" + format_double(s.x) + ", " + format_double(s.y) +
                            ") is not an equilibrium: rhs = (" + format_double(v.dx) + ", " +
                            format_double(v.dy) + ")");
  }
}

}  // namespace

std::string_view to_string(StabilityClass c) noexcept {
  switch (c) {
    case StabilityClass::UnstablePoint: return "unstable";
    case StabilityClass::StablePoint: return "stable";
    case StabilityClass::SaddlePoint: return "saddle";
    case StabilityClass::Degenerate: return "degenerate";
  }
  return "degenerate";
}

std::vector<PopulationState> enumerate_equilibria(const PayoffParams& p) {
  std::vector<PopulationState> out{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  try {
    auto s = saddle_point(p);
    bool is_corner = (s.x == 0.0 || s.x == 1.0) && (s.y == 0.0 || s.y == 1.0);
    if (!is_corner) out.push_back(s);
  } catch (const DomainError&) {
    // No interior equilibrium in the closed square.
  }
  return out;
}

Matrix2x2 jacobian(const PayoffParams& p, PopulationState s) noexcept {
  const auto g = growth_brackets(p);
  return {{(1.0 - 2.0 * s.x) * (g.a - g.b * s.y), -s.x * (1.0 - s.x) * g.b,  //
           -s.y * (1.0 - s.y) * g.e, (1.0 - 2.0 * s.y) * (g.c - g.e * s.x)}};
}

Equilibrium classify(const PayoffParams& p, PopulationState point, double zero_tol) {
  require_fixed_point(p, point, zero_tol);
  const auto j = jacobian(p, point);
  Equilibrium eq{point, j.det(), j.trace(), StabilityClass::Degenerate};
  if (std::abs(eq.det) <= zero_tol) return eq;
  if (eq.det < 0) {
    eq.cls = StabilityClass::SaddlePoint;
  } else if (eq.trace > zero_tol) {
    eq.cls = StabilityClass::UnstablePoint;
  } else if (eq.trace < -zero_tol) {
    eq.cls = StabilityClass::StablePoint;
  }
  return eq;
}

StabilityClass classify_matrix_by_eigen(const Matrix2x2& j, double zero_tol) noexcept {
  // lambda = m +- sqrt(q), m = (j00 + j11)/2, q = ((j00 - j11)/2)^2 + j01 j10.
  const double m = 0.5 * (j(0, 0) + j(1, 1));
  const double half_diff = 0.5 * (j(0, 0) - j(1, 1));
  const double q = half_diff * half_diff + j(0, 1) * j(1, 0);
  double re1 = m;
  double re2 = m;
  if (q >= 0) {
    const double r = std::sqrt(q);
    re1 = m + r;
    re2 = m - r;
  }
  if (std::abs(re1) <= zero_tol || std::abs(re2) <= zero_tol) return StabilityClass::Degenerate;
  if (re1 < 0 && re2 < 0) return StabilityClass::StablePoint;
  if (re1 > 0 && re2 > 0) return StabilityClass::UnstablePoint;
  return StabilityClass::SaddlePoint;
}

Equilibrium classify_by_eigen(const PayoffParams& p, PopulationState point, double zero_tol) {
  require_fixed_point(p, point, zero_tol);
  const auto j = jacobian(p, point);
  return {point, j.det(), j.trace(), classify_matrix_by_eigen(j, zero_tol)};
}

std::vector<Equilibrium> classify_all(const PayoffParams& p) {
  std::vector<Equilibrium> out;
  for (auto s : enumerate_equilibria(p)) out.push_back(classify(p, s));
  return out;
}

std::string equilibria_csv(const std::vector<Equilibrium>& eqs) {
  std::string out = "x,y,det,trace,class\n";
  for (const auto& e : eqs) {
    out += format_double(e.point.x) + "," + format_double(e.point.y) + "," +
           format_double(e.det) + "," + format_double(e.trace) + "," +
           std::string(to_string(e.cls)) + "\n";
  }
  return out;
}

std::string equilibria_table(const std::vector<Equilibrium>& eqs) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%10s %10s %14s %14s  %s\n", "x", "y", "det(J)", "tr(J)",
                "class");
  out += buf;
  // + 0.0 turns a negative zero into a plain one.
  for (const auto& e : eqs) {
    std::snprintf(buf, sizeof(buf), "%10.6f %10.6f %14.6g %14.6g  %s\n", e.point.x, e.point.y,
                  e.det + 0.0, e.trace + 0.0, std::string(to_string(e.cls)).c_str());
    out += buf;
  }
  return out;
}

}  // namespace essl
