#include "hhil/plant.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hhil::plant {

namespace {

constexpr std::array<std::string_view, kChannelCount> kNames{"S1",  "S2",  "S5",  "S6",  "S7",
                                                             "AV1", "AV2", "AV3", "QOUT"};

struct Flows {
  double inlet = 0.0;        // S2
  double ejector_p = 0.0;    // S1
  double suction = 0.0;      // S7
  double outlet = 0.0;       // QOUT, limited to what the tank can deliver this step
  double vent = 0.0;         // signed volumetric vent flow, positive outward
};

Flows compute_flows(const PlantParams& p, const ValveVector& u, double level, double pressure) {
  Flows f;
  const double c = p.cv_inlet * u[0];
  const double drive = p.pump_pressure - pressure;
  if (c > 0.0 && drive > 0.0) {
    // Closed form of S2 = c*sqrt(P_pump - P_tank - k_ej*S2^2).
    f.inlet = c * std::sqrt(drive / (1.0 + c * c * p.ejector_loss));
  }
  f.ejector_p = pressure + p.ejector_loss * f.inlet * f.inlet;
  if (f.inlet > 0.0) {
    f.suction = std::max(
        0.0, p.suction_gain * f.inlet - p.backpressure_coeff * (pressure - p.atmospheric_pressure));
  }
  const double head = pressure + p.water_density * kGravity * level - p.atmospheric_pressure;
  if (head > 0.0) f.outlet = p.cv_outlet * u[1] * std::sqrt(head);
  const double available = f.inlet + p.tank_area * level / p.time_step;
  f.outlet = std::min(f.outlet, available);
  const double dp = pressure - p.atmospheric_pressure;
  f.vent = std::copysign(p.cv_vent * u[2] * std::sqrt(std::abs(dp)), dp);
  return f;
}

void refresh_readings(PlantState& s, const PlantParams& p) {
  const Flows f = compute_flows(p, s.valves, s.level, s.tank_pressure);
  s.readings[index(ChannelId::S1)] = f.ejector_p;
  s.readings[index(ChannelId::S2)] = f.inlet;
  s.readings[index(ChannelId::S5)] = s.tank_pressure;
  s.readings[index(ChannelId::S6)] = s.level;
  s.readings[index(ChannelId::S7)] = f.suction;
  s.readings[index(ChannelId::AV1)] = s.valves[0];
  s.readings[index(ChannelId::AV2)] = s.valves[1];
  s.readings[index(ChannelId::AV3)] = s.valves[2];
  s.readings[index(ChannelId::QOUT)] = f.outlet;
}

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ValidationError(std::string("plant parameter '") + name + "' must be positive and finite");
  }
}

}  // namespace

std::string_view to_string(ChannelId c) { return kNames[index(c)]; }

std::optional<ChannelId> parse_channel(std::string_view name) {
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    if (kNames[i] == name) return static_cast<ChannelId>(i);
  }
  return std::nullopt;
}

void validate(const PlantParams& p) {
  require_positive(p.pump_pressure, "pump_pressure");
  require_positive(p.cv_inlet, "cv_inlet");
  require_positive(p.cv_outlet, "cv_outlet");
  require_positive(p.cv_vent, "cv_vent");
  require_positive(p.ejector_loss, "ejector_loss");
  require_positive(p.suction_gain, "suction_gain");
  require_positive(p.backpressure_coeff, "backpressure_coeff");
  require_positive(p.tank_area, "tank_area");
  require_positive(p.tank_height, "tank_height");
  require_positive(p.headspace_volume, "headspace_volume");
  require_positive(p.water_density, "water_density");
  require_positive(p.atmospheric_pressure, "atmospheric_pressure");
  require_positive(p.gas_temperature, "gas_temperature");
  require_positive(p.valve_lag, "valve_lag");
  require_positive(p.time_step, "time_step");
  require_positive(p.level_tolerance, "level_tolerance");
  require_positive(p.pressure_tolerance, "pressure_tolerance");
  if (p.time_step > p.valve_lag / 5.0) {
    throw ValidationError("time_step must not exceed valve_lag / 5");
  }
}

double gas_volume(const PlantParams& p, double level) {
  return p.tank_area * (p.tank_height - level) + p.headspace_volume;
}

PlantState make_state(const PlantParams& p, double t, const ValveVector& valves, double level,
                      double tank_pressure) {
  PlantState s;
  s.t = t;
  for (std::size_t i = 0; i < 3; ++i) s.valves[i] = std::clamp(valves[i], 0.0, 1.0);
  s.level = std::clamp(level, 0.0, p.tank_height);
  s.overflow = s.level >= p.tank_height;
  s.tank_pressure = tank_pressure;
  s.gas_moles = tank_pressure * gas_volume(p, s.level) / (kGasConstant * p.gas_temperature);
  refresh_readings(s, p);
  return s;
}

PlantState empty_state(const PlantParams& p, double t) {
  return make_state(p, t, {0.0, 0.0, 0.0}, 0.0, p.atmospheric_pressure);
}

PlantState step(const PlantState& state, const ValveVector& commands, const PlantParams& p) {
  const double dt = p.time_step;
  const double rt = kGasConstant * p.gas_temperature;
  const Flows f = compute_flows(p, state.valves, state.level, state.tank_pressure);

  PlantState next = state;
  next.t = state.t + dt;

  // Water balance. Excess above the rim spills over.
  double level = state.level + dt * (f.inlet - f.outlet) / p.tank_area;
  level = std::clamp(level, 0.0, p.tank_height);
  next.level = level;
  next.overflow = level >= p.tank_height;
  const double volume = gas_volume(p, level);

  // Gas balance: ejector suction brings atmospheric air in, the vent moves
  // gas toward atmospheric pressure but never past it within one step.
  double moles = state.gas_moles + dt * p.atmospheric_pressure * f.suction / rt;
  const double vent_moles =
      dt * (f.vent > 0.0 ? state.tank_pressure : p.atmospheric_pressure) * f.vent / rt;
  const double equilibrium = p.atmospheric_pressure * volume / rt;
  if (vent_moles > 0.0 && moles > equilibrium) {
    moles = std::max(equilibrium, moles - vent_moles);
  } else if (vent_moles < 0.0 && moles < equilibrium) {
    moles = std::min(equilibrium, moles - vent_moles);
  }
  next.gas_moles = moles;
  next.tank_pressure = moles * rt / volume;

  for (std::size_t i = 0; i < 3; ++i) {
    const double cmd = std::clamp(commands[i], 0.0, 1.0);
    next.valves[i] = std::clamp(state.valves[i] + dt / p.valve_lag * (cmd - state.valves[i]), 0.0, 1.0);
  }
  refresh_readings(next, p);
  return next;
}

void Trace::append(const PlantState& s) { append(s.readings); }

void Trace::append(const std::array<double, kChannelCount>& row) {
  for (std::size_t i = 0; i < kChannelCount; ++i) channels_[i].push_back(row[i]);
}

void Trace::extend(const Trace& other, std::size_t skip) {
  if (empty()) {
    start_time_ = other.time_at(std::min(skip, other.size()));
    period_ = other.period_;
  } else if (other.period_ != period_) {
    throw ValidationError("cannot extend a trace with a different sample period");
  }
  for (std::size_t i = 0; i < kChannelCount; ++i) {
    const auto& src = other.channels_[i];
    if (skip < src.size()) channels_[i].insert(channels_[i].end(), src.begin() + skip, src.end());
  }
}

std::array<double, kChannelCount> Trace::row(std::size_t k) const {
  std::array<double, kChannelCount> r{};
  for (std::size_t i = 0; i < kChannelCount; ++i) r[i] = channels_[i][k];
  return r;
}

std::string format_fixed(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 12);
  std::string s(buf, res.ptr);
  if (s == "-0.000000000000") s = "0.000000000000";
  return s;
}

std::string to_csv(const Trace& trace) {
  std::string out = "t";
  for (auto c : kAllChannels) {
    out += ',';
    out += to_string(c);
  }
  out += '\n';
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out += format_fixed(trace.time_at(k));
    for (auto c : kAllChannels) {
      out += ',';
      out += format_fixed(trace.channel(c)[k]);
    }
    out += '\n';
  }
  return out;
}

namespace {

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line) + ": malformed number '" + std::string(field) + "'",
                     line);
  }
  return v;
}

}  // namespace

Trace trace_from_csv(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& out) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    out = text.substr(pos, end - pos);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line) || line != "t,S1,S2,S5,S6,S7,AV1,AV2,AV3,QOUT") {
    throw ParseError("trace CSV: missing or unexpected header", 1);
  }
  std::vector<double> times;
  Trace trace;
  std::vector<std::array<double, kChannelCount>> rows;
  while (next_line(line)) {
    if (line.empty()) continue;
    std::array<double, kChannelCount + 1> fields{};
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      if (count >= fields.size()) throw ParseError("line " + std::to_string(line_no) + ": too many fields", line_no);
      fields[count++] = parse_double(field, line_no);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (count != fields.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 10 fields", line_no);
    }
    times.push_back(fields[0]);
    std::array<double, kChannelCount> row{};
    std::copy(fields.begin() + 1, fields.end(), row.begin());
    rows.push_back(row);
  }
  const double start = times.empty() ? 0.0 : times.front();
  const double period = times.size() > 1 ? times[1] - times[0] : 1.0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double expected = start + period * static_cast<double>(k);
    if (std::abs(times[k] - expected) > 1e-6 * std::max(1.0, std::abs(expected))) {
      throw ParseError("trace CSV: non-uniform sampling at row " + std::to_string(k + 2), k + 2);
    }
  }
  trace = Trace(start, period);
  for (const auto& r : rows) trace.append(r);
  return trace;
}

void write_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << to_csv(trace);
}

Trace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return trace_from_csv(ss.str());
}

Trace quantize(const Trace& trace) {
  Trace out(trace.start_time(), trace.period());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    auto row = trace.row(k);
    for (double& v : row) {
      const std::string s = format_fixed(v);
      std::from_chars(s.data(), s.data() + s.size(), v);
    }
    out.append(row);
  }
  return out;
}

}  // namespace hhil::plant
