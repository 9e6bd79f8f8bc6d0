#include "hhil/closed_loop.hpp"

#include <cmath>

namespace hhil::plant {

double channel_scale(ChannelId c, const Setpoints& sp) {
  switch (c) {
    case ChannelId::S1: return sp.inlet_pressure;
    case ChannelId::S5: return sp.tank_pressure;
    case ChannelId::S6: return sp.level;
    case ChannelId::S2:
    case ChannelId::S7:
    case ChannelId::QOUT: return 1e-4;
    case ChannelId::AV1:
    case ChannelId::AV2:
    case ChannelId::AV3: return 1.0;
  }
  return 1.0;
}

Reported truthful(const PlantState& s) {
  Reported r;
  for (std::size_t i = 0; i < kChannelCount; ++i) r[i] = s.readings[i];
  return r;
}

LoopState tick(const LoopState& state, const Reported& reported, const LoopConfig& cfg) {
  const auto out = automation::automation_step(reported, cfg.setpoints, state.mode, state.controller,
                                               cfg.gains, cfg.params.time_step);
  return {step(state.plant, out.commands, cfg.params), out.state, state.mode};
}

std::size_t steps_per_sample(const PlantParams& p) {
  const double n = 1.0 / p.time_step;
  const auto rounded = static_cast<std::size_t>(std::llround(n));
  if (rounded == 0 || std::abs(n - static_cast<double>(rounded)) > 1e-9 * n) {
    throw ValidationError("time_step must divide the 1 s sample period");
  }
  return rounded;
}

std::optional<ValveVector> equilibrium_valves(const PlantParams& p, const Setpoints& sp) {
  const double inlet = std::sqrt((sp.inlet_pressure - sp.tank_pressure) / p.ejector_loss);
  const double pump_drop = p.pump_pressure - sp.inlet_pressure;
  const double head = sp.tank_pressure + p.water_density * kGravity * sp.level - p.atmospheric_pressure;
  const double suction =
      p.suction_gain * inlet - p.backpressure_coeff * (sp.tank_pressure - p.atmospheric_pressure);
  const double vent_dp = sp.tank_pressure - p.atmospheric_pressure;
  if (!(pump_drop > 0.0) || !(head > 0.0) || !(suction > 0.0) || !(vent_dp > 0.0)) return std::nullopt;
  const double vent_flow = p.atmospheric_pressure * suction / sp.tank_pressure;
  ValveVector u{inlet / (p.cv_inlet * std::sqrt(pump_drop)), inlet / (p.cv_outlet * std::sqrt(head)),
                vent_flow / (p.cv_vent * std::sqrt(vent_dp))};
  for (double v : u) {
    if (!(v > 0.0 && v <= 1.0)) return std::nullopt;
  }
  return u;
}

namespace {

double max_rate(const PlantState& a, const PlantState& b, const Setpoints& sp) {
  double worst = 0.0;
  for (auto c : kAllChannels) {
    worst = std::max(worst, std::abs(b.value(c) - a.value(c)) / channel_scale(c, sp));
  }
  return worst;
}

bool within_band(const PlantState& s, const Setpoints& sp, double band) {
  return std::abs(s.value(ChannelId::S1) - sp.inlet_pressure) <= band * sp.inlet_pressure &&
         std::abs(s.value(ChannelId::S5) - sp.tank_pressure) <= band * sp.tank_pressure &&
         std::abs(s.value(ChannelId::S6) - sp.level) <= band * sp.level;
}

LoopState advance_sample(LoopState s, const LoopConfig& cfg, std::size_t steps) {
  for (std::size_t i = 0; i < steps; ++i) s = tick(s, truthful(s.plant), cfg);
  return s;
}

}  // namespace

SettledState steady_state(const PlantParams& p, const Setpoints& sp, const LoopGains& gains,
                          double horizon) {
  try {
    automation::validate(sp, p);
  } catch (const ValidationError& e) {
    throw Unreachable(e.what());
  }
  if (!(p.pump_pressure > sp.inlet_pressure)) {
    throw NonConvergence("pump pressure cannot drive the inlet pressure setpoint",
                         make_state(p, 0.0, {0.0, 0.0, 0.0}, sp.level, sp.tank_pressure));
  }
  validate(p);

  const auto eq = equilibrium_valves(p, sp);
  const ValveVector start_valves = eq.value_or(ValveVector{0.5, 0.5, 0.5});
  LoopConfig cfg{p, sp, gains};
  LoopState s{make_state(p, 0.0, start_valves, sp.level, sp.tank_pressure),
              automation::preload(start_valves, gains), ControlMode::Monitoring};

  const std::size_t steps = steps_per_sample(p);
  constexpr double kRate = 1e-6;
  constexpr int kHoldSamples = 10;
  int quiet = 0;
  for (double t = 0.0; t < horizon; t += 1.0) {
    LoopState next = advance_sample(s, cfg, steps);
    const bool settled = max_rate(s.plant, next.plant, sp) < kRate && within_band(next.plant, sp, 0.01);
    s = next;
    quiet = settled ? quiet + 1 : 0;
    if (quiet >= kHoldSamples) {
      s.plant.t = 0.0;
      return {s.plant, s.controller};
    }
  }
  throw NonConvergence("closed loop did not settle within the horizon", s.plant);
}

ShutdownResult shutdown_trajectory(const PlantState& state, const PlantParams& p) {
  const std::size_t steps = steps_per_sample(p);
  const ValveVector commands{0.0, 1.0, 1.0};
  auto done = [&](const PlantState& s) {
    return s.level < p.level_tolerance &&
           std::abs(s.tank_pressure - p.atmospheric_pressure) < p.pressure_tolerance;
  };
  ShutdownResult r;
  r.trace = Trace(state.t, 1.0);
  PlantState s = state;
  r.trace.append(s);
  // Drain time is bounded by Torricelli from a full tank; the cap only guards
  // against pathological parameter sets.
  constexpr std::size_t kCap = 1'000'000;
  while (!done(s)) {
    for (std::size_t i = 0; i < steps; ++i) s = step(s, commands, p);
    r.trace.append(s);
    if (r.trace.size() > kCap) throw Error("shutdown did not terminate");
  }
  r.final = s;
  r.seconds = r.trace.size() - 1;
  return r;
}

StartupResult startup_trajectory(const LoopState& from, const LoopConfig& cfg,
                                 const SettleCriteria& criteria) {
  const std::size_t steps = steps_per_sample(cfg.params);
  StartupResult r;
  r.trace = Trace(from.plant.t, 1.0);
  LoopState s = from;
  s.mode = ControlMode::Monitoring;
  r.trace.append(s.plant);
  const int hold = static_cast<int>(std::ceil(criteria.hold));
  // A state that already satisfies the criteria is a fixed point.
  if (within_band(s.plant, cfg.setpoints, criteria.band) &&
      max_rate(s.plant, advance_sample(s, cfg, steps).plant, cfg.setpoints) < criteria.rate) {
    r.final = s;
    return r;
  }
  int quiet = 0;
  for (double t = 0.0; t < criteria.horizon; t += 1.0) {
    LoopState next = advance_sample(s, cfg, steps);
    const bool ok = within_band(next.plant, cfg.setpoints, criteria.band) &&
                    max_rate(s.plant, next.plant, cfg.setpoints) < criteria.rate;
    s = next;
    r.trace.append(s.plant);
    quiet = ok ? quiet + 1 : 0;
    if (quiet >= hold) {
      r.final = s;
      return r;
    }
  }
  throw NonConvergence("start-up did not settle within the horizon", s.plant);
}

StartupResult startup_trajectory(const LoopConfig& cfg, const SettleCriteria& criteria) {
  LoopState from{empty_state(cfg.params), ControllerState{}, ControlMode::Monitoring};
  return startup_trajectory(from, cfg, criteria);
}

}  // namespace hhil::plant
