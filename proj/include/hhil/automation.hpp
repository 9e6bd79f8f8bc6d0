#pragma once

// Discrete PID loops and the three human-automation interaction modes.
//
// Loop pairing: AV1 <- S1 (ejector inlet pressure), AV2 <- S6 (tank level),
// AV3 <- S5 (tank pressure). Errors are normalized by the setpoint so the
// gains are dimensionless. The controller only ever sees *reported* values.

#include <array>
#include <optional>
#include <string>

#include "hhil/plant.hpp"

namespace hhil::automation {

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double out_min = 0.0;
  double out_max = 1.0;
  bool anti_windup = true;
};

void validate(const PidGains& g);

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  double prev_output = 0.0;

  friend bool operator==(const PidState&, const PidState&) = default;
};

struct PidOutput {
  double command;
  PidState state;
};

/// command = clamp(Kp*e + Ki*(I + e*dt) + Kd*(e - e_prev)/dt). With anti-windup
/// the integral is not advanced on a step whose unclamped output is saturated
/// in the direction the error pushes.
PidOutput pid_step(const PidState& state, const PidGains& gains, double error, double dt);

enum class ControlMode { Monitoring, Empowering, Exclusivity };

std::string_view to_string(ControlMode m);
std::optional<ControlMode> parse_mode(std::string_view s);
constexpr bool is_automated(ControlMode m) { return m != ControlMode::Exclusivity; }

struct Setpoints {
  double inlet_pressure = 3.0e5;  // S1 [Pa abs]
  double level = 0.8;             // S6 [m]
  double tank_pressure = 1.5e5;   // S5 [Pa abs]

  friend bool operator==(const Setpoints&, const Setpoints&) = default;
};

/// Geometric reachability: P_atm < S5 < S1, 0 < S6 < H_t. Throws ValidationError.
void validate(const Setpoints& sp, const plant::PlantParams& p);

struct LoopGains {
  PidGains inlet{1.0, 0.5, 0.0};  // AV1 <- S1
  PidGains level{8.0, 0.18, 0.0};  // AV2 <- S6
  PidGains vent{20.0, 0.6, 0.0};  // AV3 <- S5
};

/// Reported sensor values; an empty slot means the sample never arrived.
using Reported = std::array<std::optional<double>, plant::kChannelCount>;

struct ControllerState {
  std::array<PidState, 3> pid{};
  plant::ValveVector last_command{};
  plant::ValveVector manual{};  // operator's commands in Exclusivity

  friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

struct AutomationOutput {
  plant::ValveVector commands;
  ControllerState state;
};

/// One controller tick. Monitoring / Empowering: three independent PID loops.
/// Exclusivity: the operator's manual commands pass through untouched and the
/// PID states are left alone. A missing reported value holds that loop's last
/// command.
AutomationOutput automation_step(const Reported& reported, const Setpoints& setpoints,
                                 ControlMode mode, const ControllerState& state,
                                 const LoopGains& gains, double dt);

struct ModeEvent {
  double t;
  ControlMode from;
  ControlMode to;
  std::string description;
};

struct ModeTransition {
  ControlMode mode;
  std::optional<ModeEvent> event;  // empty for an idempotent request
  bool reset_pid = false;          // true when entering automation from Exclusivity
};

ModeTransition set_mode(ControlMode current, ControlMode request, double t);

/// Applies a transition to a controller state (PID reset on entry into automation).
ControllerState apply(const ModeTransition& tr, ControllerState state);

/// PID states that reproduce `valves` at zero error (bumpless start).
ControllerState preload(const plant::ValveVector& valves, const LoopGains& gains);

}  // namespace hhil::automation
