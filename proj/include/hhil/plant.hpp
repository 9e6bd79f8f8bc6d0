#pragma once

// Reduced-order digital twin of the pump / ejector / separator plant.
//
// The pump pushes water through the inlet valve AV1 into the ejector. The
// motive flow S2 draws air S7 through the ejector suction port, and the
// two-phase mixture discharges into a vertical separator tank. Water leaves
// the tank bottom through AV2 (flow QOUT), air leaves the headspace through
// the vent valve AV3.
//
//   S2   = Cv1*u1*sqrt(max(P_pump - S1, 0)),   S1 = P_tank + k_ej*S2^2
//   S7   = max(0, k_s*S2 - k_b*(P_tank - P_atm))            (zero if S2 == 0)
//   QOUT = Cv2*u2*sqrt(max(P_tank + rho*g*h - P_atm, 0))
//   A_t*dh/dt   = S2 - QOUT
//   dn_g/dt     = (P_atm*S7 - P_up*q_vent) / (R*T),  q_vent = Cv3*u3*sqrt(|P_tank - P_atm|)
//   P_tank*V_gas = n_g*R*T,                         V_gas = A_t*(H_t - h) + V_head
//
// Explicit Euler with fixed step; valve openings follow their commands with
// a first-order lag.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hhil/error.hpp"

namespace hhil::plant {

enum class ChannelId : std::uint8_t { S1, S2, S5, S6, S7, AV1, AV2, AV3, QOUT };

inline constexpr std::size_t kChannelCount = 9;
inline constexpr std::array<ChannelId, kChannelCount> kAllChannels{
    ChannelId::S1,  ChannelId::S2,  ChannelId::S5,  ChannelId::S6,  ChannelId::S7,
    ChannelId::AV1, ChannelId::AV2, ChannelId::AV3, ChannelId::QOUT};

constexpr std::size_t index(ChannelId c) { return static_cast<std::size_t>(c); }
std::string_view to_string(ChannelId c);
std::optional<ChannelId> parse_channel(std::string_view name);
/// Physical sensors S1..S7. AV channels are actuator positions and QOUT is derived.
constexpr bool is_sensor(ChannelId c) { return c <= ChannelId::S7; }

inline constexpr double kGasConstant = 8.314462618;  // J/(mol K)
inline constexpr double kGravity = 9.80665;          // m/s^2

struct PlantParams {
  double pump_pressure = 4.0e5;          // Pa abs
  double cv_inlet = 1.265e-6;            // Cv1, m^3/(s sqrt(Pa))
  double cv_outlet = 5.6e-6;             // Cv2
  double cv_vent = 3.7e-6;               // Cv3
  double ejector_loss = 3.75e12;         // k_ej, Pa s^2/m^6
  double suction_gain = 2.25;            // k_s
  double backpressure_coeff = 3.08e-9;   // k_b, m^3/(s Pa)
  double tank_area = 0.15;               // m^2
  double tank_height = 1.6;              // m
  double headspace_volume = 0.015;       // m^3 of gas space above the overflow rim
  double water_density = 1000.0;         // kg/m^3
  double atmospheric_pressure = 101325.0;
  double gas_temperature = 293.15;       // K
  double valve_lag = 2.0;                // s
  double time_step = 0.1;                // s
  double level_tolerance = 1e-3;         // m, "empty" threshold for shutdown
  double pressure_tolerance = 100.0;     // Pa, "vented" threshold for shutdown
};

/// Throws ValidationError unless every parameter is strictly positive and
/// time_step <= valve_lag / 5.
void validate(const PlantParams& p);

using ValveVector = std::array<double, 3>;  // AV1, AV2, AV3 in [0, 1]

struct PlantState {
  double t = 0.0;
  ValveVector valves{};       // actual openings u1..u3
  double level = 0.0;         // h [m]
  double tank_pressure = 0.0; // P_tank [Pa abs]
  double gas_moles = 0.0;     // n_g [mol]
  std::array<double, kChannelCount> readings{};
  bool overflow = false;      // level is clamped at the tank rim

  double value(ChannelId c) const { return readings[index(c)]; }
};

double gas_volume(const PlantParams& p, double level);

/// Builds a consistent state: gas inventory from the ideal-gas law and all
/// channel readings derived from (valves, level, pressure).
PlantState make_state(const PlantParams& p, double t, const ValveVector& valves, double level,
                      double tank_pressure);

/// Empty, vented plant with every valve closed.
PlantState empty_state(const PlantParams& p, double t = 0.0);

/// One explicit Euler step of length p.time_step. Pure.
PlantState step(const PlantState& state, const ValveVector& commands, const PlantParams& p);

/// Uniformly sampled multichannel record of plant readings.
class Trace {
 public:
  Trace() = default;
  Trace(double start_time, double period) : start_time_(start_time), period_(period) {}

  double start_time() const { return start_time_; }
  double period() const { return period_; }
  std::size_t size() const { return channels_[0].size(); }
  bool empty() const { return size() == 0; }
  double time_at(std::size_t k) const { return start_time_ + period_ * static_cast<double>(k); }

  void append(const PlantState& s);
  void append(const std::array<double, kChannelCount>& row);
  /// Appends all samples of `other` (periods must match), skipping the first
  /// `skip` samples of it.
  void extend(const Trace& other, std::size_t skip = 0);

  std::span<const double> channel(ChannelId c) const { return channels_[index(c)]; }
  std::vector<double>& mutable_channel(ChannelId c) { return channels_[index(c)]; }
  std::array<double, kChannelCount> row(std::size_t k) const;
  double last(ChannelId c) const { return channels_[index(c)].back(); }

  friend bool operator==(const Trace&, const Trace&) = default;

 private:
  double start_time_ = 0.0;
  double period_ = 1.0;
  std::array<std::vector<double>, kChannelCount> channels_;
};

/// CSV with header `t,S1,S2,S5,S6,S7,AV1,AV2,AV3,QOUT`, fixed-point decimals.
std::string to_csv(const Trace& trace);
Trace trace_from_csv(std::string_view text);
void write_trace(const Trace& trace, const std::string& path);
Trace read_trace(const std::string& path);
/// Rounds every sample to the CSV representation, so in-memory results match
/// what a later reload of the CSV would produce.
Trace quantize(const Trace& trace);

/// Fixed-point formatting used by every CSV writer (12 decimals).
std::string format_fixed(double v);

}  // namespace hhil::plant
