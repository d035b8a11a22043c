#include "essl/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "essl/error.hpp"
#include "essl/stability.hpp"
#include "essl/text_io.hpp"

namespace essl {

namespace {

constexpr int kMaxHalvings = 40;

PopulationState rk4_raw(const PayoffParams& p, PopulationState s, double h) {
  const auto k1 = replicator_rhs(p, s);
  const auto k2 = replicator_rhs(p, {s.x + 0.5 * h * k1.dx, s.y + 0.5 * h * k1.dy});
  const auto k3 = replicator_rhs(p, {s.x + 0.5 * h * k2.dx, s.y + 0.5 * h * k2.dy});
  const auto k4 = replicator_rhs(p, {s.x + h * k3.dx, s.y + h * k3.dy});
  return {s.x + h / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx),
          s.y + h / 6.0 * (k1.dy + 2.0 * k2.dy + 2.0 * k3.dy + k4.dy)};
}

PopulationState step_guarded(const PayoffParams& p, PopulationState s, double h, double clamp_tol,
                             int depth) {
  auto next = rk4_raw(p, s, h);
  if (next.in_unit_square(clamp_tol)) {
    return {std::clamp(next.x, 0.0, 1.0), std::clamp(next.y, 0.0, 1.0)};
  }
  if (depth >= kMaxHalvings) {
    throw Error("RK4 step keeps leaving the unit square after " + std::to_string(kMaxHalvings) +
                " halvings");
  }
  auto mid = step_guarded(p, s, 0.5 * h, clamp_tol, depth + 1);
  return step_guarded(p, mid, 0.5 * h, clamp_tol, depth + 1);
}

bool is_corner(PopulationState s) noexcept {
  return (s.x == 0.0 || s.x == 1.0) && (s.y == 0.0 || s.y == 1.0);
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  if (!(t_max >= dt) || !std::isfinite(t_max)) throw ValidationError("t_max must be at least dt");
  if (!(stop_tol > 0.0)) throw ValidationError("stop_tol must be positive");
  if (!(clamp_tol >= 0.0)) throw ValidationError("clamp_tol must be nonnegative");
}

PopulationState step_rk4(const PayoffParams& p, PopulationState s, double dt, double clamp_tol) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive");
  return step_guarded(p, s, dt, clamp_tol, 0);
}

Trajectory simulate(const PayoffParams& p, PopulationState start, const IntegratorConfig& cfg) {
  cfg.validate();
  if (!start.in_unit_square()) throw ValidationError("start outside the unit square");

  std::vector<PopulationState> targets;
  for (const auto& eq : classify_all(p)) {
    if (eq.cls == StabilityClass::StablePoint) targets.push_back(eq.point);
  }
  const auto near_target = [&](PopulationState s) -> std::optional<PopulationState> {
    for (auto t : targets) {
      if (std::hypot(s.x - t.x, s.y - t.y) <= cfg.stop_tol) return t;
    }
    return std::nullopt;
  };

  Trajectory traj;
  traj.samples.push_back({0.0, start});
  if (is_corner(start)) {
    traj.converged_to = start;
    return traj;
  }
  if (auto hit = near_target(start)) {
    traj.converged_to = hit;
    return traj;
  }

  const auto n_full = static_cast<long long>(std::floor(cfg.t_max / cfg.dt));
  traj.samples.reserve(static_cast<std::size_t>(std::min<long long>(n_full + 2, 1 << 20)));
  auto s = start;
  double t = 0.0;
  for (long long k = 1; t < cfg.t_max; ++k) {
    double t_next = k <= n_full ? static_cast<double>(k) * cfg.dt : cfg.t_max;
    if (t_next <= t) break;
    s = step_rk4(p, s, t_next - t, cfg.clamp_tol);
    t = t_next;
    traj.samples.push_back({t, s});
    if (auto hit = near_target(s)) {
      traj.converged_to = hit;
      break;
    }
  }
  return traj;
}

std::vector<Trajectory> phase_portrait(const PayoffParams& p,
                                       std::span<const PopulationState> starts,
                                       const IntegratorConfig& cfg) {
  if (starts.empty()) throw ValidationError("phase portrait needs at least one start");
  cfg.validate();
  for (auto s : starts) {
    if (!s.in_unit_square()) throw ValidationError("start outside the unit square");
  }
  std::vector<Trajectory> out;
  out.reserve(starts.size());
  for (auto s : starts) out.push_back(simulate(p, s, cfg));
  return out;
}

std::string trajectories_csv(std::span<const Trajectory> trajectories) {
  std::string out = "trajectory_id,t,x,y\n";
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto id = std::to_string(i);
    for (const auto& smp : trajectories[i].samples) {
      out += id;
      out += ',';
      out += format_double(smp.t);
      out += ',';
      out += format_double(smp.state.x);
      out += ',';
      out += format_double(smp.state.y);
      out += '\n';
    }
  }
  return out;
}

}  // namespace essl
