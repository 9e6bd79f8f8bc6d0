#pragma once

// Workbench configuration: plant parameters, setpoints, loop gains, settling
// criteria, anomaly thresholds and episode knobs, read from one INI file.

#include <string>

#include "hhil/automation.hpp"
#include "hhil/closed_loop.hpp"
#include "hhil/plant.hpp"
#include "hhil/resilience.hpp"

namespace hhil {

struct EpisodeSettings {
  double attack_start = 600.0;     // t1, seconds after the settled start
  double spoof_fraction = 0.2;     // FixedValue magnitude as a fraction of the channel reference
  double nominal_duration = 7200.0;
  double max_detection = 900.0;    // longest under-attack segment kept in a splice library
};

struct WorkbenchConfig {
  int version = 1;
  plant::PlantParams params;
  automation::Setpoints setpoints;
  automation::LoopGains gains;
  plant::SettleCriteria settle;
  resilience::AnomalyConfig anomaly;
  EpisodeSettings episode;
};

/// Missing keys keep their defaults; unknown keys are rejected.
WorkbenchConfig parse_config(const std::string& ini_text);
WorkbenchConfig load_config(const std::string& path);
std::string to_ini(const WorkbenchConfig& cfg);

/// Throws ValidationError for any invalid section.
void validate(const WorkbenchConfig& cfg);

}  // namespace hhil
