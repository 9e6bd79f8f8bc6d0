#pragma once

// Operator behavior as data: pelvis trajectories contextualized into dwell
// tables, persona samplers over five-point quantile anchors, and the
// detection / restoration durations that drive an episode.

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace hhil::operators {

struct ControlVolume {
  std::string id;
  std::array<double, 3> origin{};
  std::array<double, 3> extents{};

  /// Closed-interval containment: points on a face count as inside.
  bool contains(double x, double y, double z) const;
};

/// Throws ValidationError for non-positive extents or a pair of volumes that
/// overlap with positive volume.
void validate(const std::vector<ControlVolume>& volumes);

struct PelvisSample {
  double t, x, y, z;
};

struct PelvisTrajectory {
  double rate = 90.0;  // Hz
  std::vector<PelvisSample> samples;
};

/// Parses `t,x,y,z` rows (an optional header line is skipped). The rate is
/// inferred from the span and each interval must match it within 1%.
/// Throws ParseError with the line number for malformed rows or time that
/// does not strictly increase.
PelvisTrajectory ingest_trajectory(std::string_view csv);

struct DwellRow {
  std::string volume_id;
  double entry_t = 0.0;
  double persistence = 0.0;

  friend bool operator==(const DwellRow&, const DwellRow&) = default;
};

enum class Phase { Detection, Restoration };
std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

struct DwellTable {
  Phase phase = Phase::Detection;
  std::vector<DwellRow> rows;

  friend bool operator==(const DwellTable&, const DwellTable&) = default;
};

/// One row per maximal run of consecutive frames inside the same volume.
/// persistence = frames / rate, entry time = timestamp of the run's first frame.
DwellTable contextualize(const PelvisTrajectory& traj, const std::vector<ControlVolume>& volumes,
                         Phase phase = Phase::Detection);

/// Sum of the persistence column. An empty table yields 0 and a warning on stderr.
double activity_duration(const DwellTable& table);

/// `# phase: detection` header line, then `volume_id,entry_t,persistence` rows.
std::string to_csv(const DwellTable& table);
DwellTable dwell_table_from_csv(std::string_view text);

enum class Persona { Expert, Novice };
std::string_view to_string(Persona p);
Persona parse_persona(std::string_view s);

/// (min, q25, q50, q75, max)
using Anchors = std::array<double, 5>;

struct PersonaSpec {
  Persona persona = Persona::Expert;
  int scenario = 1;
  Phase phase = Phase::Detection;
  Anchors anchors{};
};

/// Piecewise-linear inverse CDF through (0,min) (.25,q25) (.5,q50) (.75,q75) (1,max).
class PersonaSampler {
 public:
  explicit PersonaSampler(const Anchors& anchors);
  double quantile(double u) const;
  /// Mean of the fitted distribution (exact for the piecewise-linear quantile function).
  double mean() const;
  const Anchors& anchors() const { return anchors_; }

 private:
  Anchors anchors_;
};

/// Throws ValidationError when the anchors decrease.
PersonaSampler fit_persona(const Anchors& anchors);

/// Uniform on [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);
double sample_persona(const PersonaSampler& sampler, std::mt19937_64& rng);

enum class Provenance { PersonaDraw, DwellTables, LiveSession };
std::string_view to_string(Provenance p);

struct OperatorTimes {
  double detection = 0.0;
  double restoration = 0.0;
  Provenance provenance = Provenance::PersonaDraw;
};

/// Throws ValidationError unless both durations are finite and positive.
void validate(const OperatorTimes& t);

OperatorTimes from_dwell_tables(const DwellTable& detection, const DwellTable& restoration);

/// Anchor sets keyed by persona, scenario and phase.
class PersonaLibrary {
 public:
  /// The eight published anchor sets (two personas x two scenarios x two phases).
  static PersonaLibrary defaults();
  /// INI file with one section per set, e.g. `[expert.scenario1.detection]`
  /// holding `anchors = min, q25, q50, q75, max`.
  static PersonaLibrary parse(const std::string& ini_text);
  static PersonaLibrary load(const std::string& path);

  void set(const PersonaSpec& spec);
  const PersonaSpec& get(Persona persona, int scenario, Phase phase) const;
  std::vector<PersonaSpec> all() const;

 private:
  std::map<std::tuple<Persona, int, Phase>, PersonaSpec> specs_;
};

}  // namespace hhil::operators
