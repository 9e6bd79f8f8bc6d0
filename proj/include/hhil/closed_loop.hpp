#pragma once

// Plant + automation closed loop: settling, shutdown and start-up trajectories.

#include "hhil/automation.hpp"
#include "hhil/plant.hpp"

namespace hhil::plant {

using automation::ControllerState;
using automation::ControlMode;
using automation::LoopGains;
using automation::Reported;
using automation::Setpoints;

/// The closed loop failed to settle within its horizon.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, PlantState last) : Error(what), last_(last) {}
  const PlantState& last_state() const noexcept { return last_; }

 private:
  PlantState last_;
};

/// Setpoints outside the physical envelope of the plant.
class Unreachable : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct LoopConfig {
  PlantParams params;
  Setpoints setpoints;
  LoopGains gains;
};

struct LoopState {
  PlantState plant;
  ControllerState controller;
  ControlMode mode = ControlMode::Monitoring;
};

/// Normalization scale per channel: setpoints for regulated variables,
/// 1e-4 m^3/s for flows, 1 for valve openings.
double channel_scale(ChannelId c, const Setpoints& sp);

/// Reported values equal to the plant truth.
Reported truthful(const PlantState& s);

/// Controller tick on `reported`, then one plant step.
LoopState tick(const LoopState& state, const Reported& reported, const LoopConfig& cfg);

/// Number of integration steps per 1 Hz sample.
std::size_t steps_per_sample(const PlantParams& p);

struct SettleCriteria {
  double band = 0.01;        // |S - setpoint| / setpoint for S1, S5, S6
  double rate = 1e-4;        // per-second change / channel_scale, every channel
  double hold = 30.0;        // s the criteria must hold continuously
  double horizon = 7200.0;   // s before giving up
};

/// Analytic equilibrium valve openings for the setpoints, if they exist in (0, 1].
std::optional<ValveVector> equilibrium_valves(const PlantParams& p, const Setpoints& sp);

struct SettledState {
  PlantState plant;
  ControllerState controller;
};

/// Closed-loop settling under Monitoring. Starts from the analytic equilibrium
/// when one exists and integrates until every channel's rate of change is
/// below 1e-6 of its scale per second.
/// Throws Unreachable for setpoints outside the plant envelope and
/// NonConvergence when the loop cannot settle (including a pump that cannot
/// drive the inlet pressure setpoint).
SettledState steady_state(const PlantParams& p, const Setpoints& sp, const LoopGains& gains = {},
                          double horizon = 20000.0);

struct ShutdownResult {
  Trace trace;        // 1 Hz, first sample = entry state
  PlantState final;
  std::size_t seconds = 0;  // trace.size() - 1
};

/// AV1 closed, AV2 and AV3 fully open until the tank is empty (h < level_tolerance)
/// and vented (|P - P_atm| < pressure_tolerance). Checked at 1 Hz samples.
ShutdownResult shutdown_trajectory(const PlantState& state, const PlantParams& p);

struct StartupResult {
  Trace trace;  // 1 Hz, first sample = entry state, last = settled state
  LoopState final;
};

/// Runs automation (Monitoring) from `from` until settled per `criteria`.
/// Throws NonConvergence past the horizon.
StartupResult startup_trajectory(const LoopState& from, const LoopConfig& cfg,
                                 const SettleCriteria& criteria = {});
/// Start-up from the empty, vented plant with freshly reset controllers.
StartupResult startup_trajectory(const LoopConfig& cfg, const SettleCriteria& criteria = {});

}  // namespace hhil::plant
