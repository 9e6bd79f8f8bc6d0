#include "hhil/automation.hpp"

#include <algorithm>
#include <cmath>

namespace hhil::automation {

void validate(const PidGains& g) {
  if (!std::isfinite(g.kp) || !std::isfinite(g.ki) || !std::isfinite(g.kd)) {
    throw ValidationError("PID gains must be finite");
  }
  if (!(g.out_min < g.out_max)) throw ValidationError("PID output limits must satisfy min < max");
}

PidOutput pid_step(const PidState& state, const PidGains& gains, double error, double dt) {
  if (!std::isfinite(error)) throw ValidationError("PID error input must be finite");
  if (!(dt > 0.0)) throw ValidationError("PID step requires dt > 0");

  const double derivative = (error - state.prev_error) / dt;
  const double integral = state.integral + error * dt;
  const double raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;
  const double command = std::clamp(raw, gains.out_min, gains.out_max);

  PidState next = state;
  const bool pushing_high = raw > gains.out_max && gains.ki * error > 0.0;
  const bool pushing_low = raw < gains.out_min && gains.ki * error < 0.0;
  if (!(gains.anti_windup && (pushing_high || pushing_low))) next.integral = integral;
  next.prev_error = error;
  next.prev_output = command;
  return {command, next};
}

std::string_view to_string(ControlMode m) {
  switch (m) {
    case ControlMode::Monitoring: return "monitoring";
    case ControlMode::Empowering: return "empowering";
    case ControlMode::Exclusivity: return "exclusivity";
  }
  return "?";
}

std::optional<ControlMode> parse_mode(std::string_view s) {
  if (s == "monitoring") return ControlMode::Monitoring;
  if (s == "empowering") return ControlMode::Empowering;
  if (s == "exclusivity") return ControlMode::Exclusivity;
  return std::nullopt;
}

void validate(const Setpoints& sp, const plant::PlantParams& p) {
  if (!(sp.level > 0.0) || sp.level > p.tank_height) {
    throw ValidationError("level setpoint must lie in (0, tank_height]");
  }
  if (sp.level == p.tank_height) throw ValidationError("level setpoint at the tank rim is not regulable");
  if (!(sp.tank_pressure > p.atmospheric_pressure)) {
    throw ValidationError("tank pressure setpoint must exceed atmospheric pressure");
  }
  if (!(sp.inlet_pressure > sp.tank_pressure)) {
    throw ValidationError("inlet pressure setpoint must exceed the tank pressure setpoint");
  }
}

AutomationOutput automation_step(const Reported& reported, const Setpoints& setpoints,
                                 ControlMode mode, const ControllerState& state,
                                 const LoopGains& gains, double dt) {
  AutomationOutput out{state.last_command, state};
  if (mode == ControlMode::Exclusivity) {
    out.commands = state.manual;
    out.state.last_command = state.manual;
    return out;
  }

  using plant::ChannelId;
  using plant::index;
  struct Loop {
    ChannelId sensor;
    double setpoint;
    double sign;  // +1: value above target opens the valve
    const PidGains* gains;
  };
  const std::array<Loop, 3> loops{{
      {ChannelId::S1, setpoints.inlet_pressure, -1.0, &gains.inlet},
      {ChannelId::S6, setpoints.level, +1.0, &gains.level},
      {ChannelId::S5, setpoints.tank_pressure, +1.0, &gains.vent},
  }};
  for (std::size_t i = 0; i < loops.size(); ++i) {
    const auto& value = reported[index(loops[i].sensor)];
    if (!value) continue;
    const double error = loops[i].sign * (*value - loops[i].setpoint) / loops[i].setpoint;
    const auto r = pid_step(state.pid[i], *loops[i].gains, error, dt);
    out.commands[i] = r.command;
    out.state.pid[i] = r.state;
  }
  out.state.last_command = out.commands;
  return out;
}

ModeTransition set_mode(ControlMode current, ControlMode request, double t) {
  if (current == request) return {current, std::nullopt, false};
  std::string what;
  switch (request) {
    case ControlMode::Exclusivity: what = "automation disabled"; break;
    case ControlMode::Monitoring: what = "automation enabled"; break;
    case ControlMode::Empowering: what = "human empowering"; break;
  }
  const bool reset = !is_automated(current) && is_automated(request);
  return {request, ModeEvent{t, current, request, what}, reset};
}

ControllerState apply(const ModeTransition& tr, ControllerState state) {
  if (tr.reset_pid) state.pid = {};
  return state;
}

ControllerState preload(const plant::ValveVector& valves, const LoopGains& gains) {
  ControllerState s;
  const std::array<const PidGains*, 3> g{&gains.inlet, &gains.level, &gains.vent};
  for (std::size_t i = 0; i < 3; ++i) {
    s.pid[i].integral = g[i]->ki != 0.0 ? valves[i] / g[i]->ki : 0.0;
    s.pid[i].prev_output = valves[i];
  }
  s.last_command = valves;
  s.manual = valves;
  return s;
}

}  // namespace hhil::automation
