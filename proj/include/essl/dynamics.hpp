#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "essl/egt.hpp"

namespace essl {

struct IntegratorConfig {
  double dt = 0.01;
  double t_max = 500.0;
  double stop_tol = 1e-3;
  double clamp_tol = 1e-9;

  void validate() const;  // throws ValidationError
};

struct TrajectorySample {
  double t = 0.0;
  PopulationState state;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  // Set when the run ended next to a stable equilibrium (or started on a
  // corner); empty when t_max was reached first.
  std::optional<PopulationState> converged_to;

  bool converged() const noexcept { return converged_to.has_value(); }
  const PopulationState& final_state() const { return samples.back().state; }
};

// One classical RK4 step of length dt. If the result leaves [0,1]^2 by more
// than clamp_tol the step is retried as two half steps (recursively);
// overshoot within clamp_tol is clamped back onto the square.
PopulationState step_rk4(const PayoffParams& p, PopulationState s, double dt,
                         double clamp_tol = 1e-9);

// Integrates from `start` until within stop_tol of a stable equilibrium or
// until t_max. A start exactly on a corner is already terminal.
Trajectory simulate(const PayoffParams& p, PopulationState start, const IntegratorConfig& cfg);

std::vector<Trajectory> phase_portrait(const PayoffParams& p,
                                       std::span<const PopulationState> starts,
                                       const IntegratorConfig& cfg);

// `trajectory_id,t,x,y` rows with a header.
std::string trajectories_csv(std::span<const Trajectory> trajectories);

}  // namespace essl
