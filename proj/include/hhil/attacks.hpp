#pragma once

// Sensor-channel transforms that sit between plant truth and every consumer.
//
// FDI is modeled as FixedValue / Offset, a man-in-the-middle freeze as
// HoldLast and denial of service as Drop. Transforms never touch the plant
// state; they only rewrite what the controller and the console see.

#include <array>
#include <bitset>
#include <optional>
#include <string>
#include <vector>

#include "hhil/automation.hpp"
#include "hhil/plant.hpp"

namespace hhil::attacks {

using plant::ChannelId;

enum class TransformKind { Passthrough, FixedValue, Offset, HoldLast, Drop };

std::string_view to_string(TransformKind k);
std::optional<TransformKind> parse_kind(std::string_view s);

struct ChannelTransform {
  TransformKind kind = TransformKind::Passthrough;
  double magnitude = 0.0;             // FixedValue: v, Offset: delta (channel units)
  double start = 0.0;                 // activation interval [start, end)
  std::optional<double> end;          // open-ended when empty

  bool active_at(double t) const { return t >= start && (!end || t < *end); }
  friend bool operator==(const ChannelTransform&, const ChannelTransform&) = default;
};

/// Reported value for one channel. Outside the activation interval the
/// transform behaves as Passthrough. Drop yields no value.
std::optional<double> apply_channel(const ChannelTransform& transform, double true_value, double t,
                                    std::optional<double> last_reported);

struct AttackScenario {
  std::string id;
  ChannelId channel = ChannelId::S6;
  TransformKind kind = TransformKind::FixedValue;
  double magnitude = 0.0;   // absolute, in channel units
  double start = 600.0;     // t1 [s]
  std::vector<int> ucas;
  std::string description;
};

/// Throws ValidationError for non-sensor channels or t1 <= 0.
void validate(const AttackScenario& s);

using TransformSet = std::array<ChannelTransform, plant::kChannelCount>;

/// Active transform per channel at time t (recalibration not considered).
TransformSet scenario_schedule(const AttackScenario& scenario, double t);

/// Reference values used to resolve relative spoof magnitudes: setpoints for
/// S1/S5/S6, nominal steady values for S2/S7.
struct ReferenceValues {
  std::array<double, plant::kChannelCount> values{};
  double operator[](ChannelId c) const { return values[plant::index(c)]; }
};

ReferenceValues reference_values(const automation::Setpoints& sp, const plant::PlantState& nominal);

/// False low tank level: S6 reported at `fraction` of its setpoint from t1.
AttackScenario scenario1(const ReferenceValues& ref, double t1 = 600.0, double fraction = 0.2);
/// False low tank pressure: S5 reported at `fraction` of its setpoint from t1.
AttackScenario scenario2(const ReferenceValues& ref, double t1 = 600.0, double fraction = 0.2);
AttackScenario preset(int number, const ReferenceValues& ref, double t1 = 600.0,
                      double fraction = 0.2);

/// Scenario definition file (INI):
///
///   [scenario]
///   id = scenario1
///   channel = S6          ; S1 S2 S5 S6 S7
///   kind = fixed          ; passthrough fixed offset hold drop
///   magnitude = 0.2       ; fraction of the channel reference (fixed / offset)
///   t1 = 600
///   ucas = 3              ; comma separated
///   description = ...
AttackScenario parse_scenario(const std::string& ini_text, const ReferenceValues& ref);
AttackScenario load_scenario(const std::string& path, const ReferenceValues& ref);

/// Per-episode reporting path: the scenario schedule, recalibration state and
/// the last value each consumer received per channel.
class ReportingPath {
 public:
  ReportingPath() = default;
  explicit ReportingPath(std::optional<AttackScenario> scenario) : scenario_(std::move(scenario)) {}

  automation::Reported report(const plant::PlantState& truth, double t);

  /// Clears the channel's transform for the rest of the episode. Returns
  /// false when the channel was clean (no-op).
  bool recalibrate(ChannelId c);
  bool recalibrated(ChannelId c) const { return recalibrated_[plant::index(c)]; }
  /// True when the attack is active on its channel at time t.
  bool compromised(ChannelId c, double t) const;
  const std::optional<AttackScenario>& scenario() const { return scenario_; }

 private:
  std::optional<AttackScenario> scenario_;
  std::bitset<plant::kChannelCount> recalibrated_;
  std::array<std::optional<double>, plant::kChannelCount> last_{};
};

}  // namespace hhil::attacks
