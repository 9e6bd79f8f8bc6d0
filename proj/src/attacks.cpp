#include "hhil/attacks.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

namespace hhil::attacks {

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::Passthrough: return "passthrough";
    case TransformKind::FixedValue: return "fixed";
    case TransformKind::Offset: return "offset";
    case TransformKind::HoldLast: return "hold";
    case TransformKind::Drop: return "drop";
  }
  return "?";
}

std::optional<TransformKind> parse_kind(std::string_view s) {
  for (auto k : {TransformKind::Passthrough, TransformKind::FixedValue, TransformKind::Offset,
                 TransformKind::HoldLast, TransformKind::Drop}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<double> apply_channel(const ChannelTransform& transform, double true_value, double t,
                                    std::optional<double> last_reported) {
  if (!transform.active_at(t)) return true_value;
  switch (transform.kind) {
    case TransformKind::Passthrough: return true_value;
    case TransformKind::FixedValue: return transform.magnitude;
    case TransformKind::Offset: return true_value + transform.magnitude;
    case TransformKind::HoldLast: return last_reported ? last_reported : std::optional<double>(true_value);
    case TransformKind::Drop: return std::nullopt;
  }
  return true_value;
}

void validate(const AttackScenario& s) {
  if (!plant::is_sensor(s.channel)) {
    throw ValidationError("attack scenario '" + s.id + "': channel " +
                          std::string(plant::to_string(s.channel)) + " is not a sensor");
  }
  if (!(s.start > 0.0)) throw ValidationError("attack scenario '" + s.id + "': t1 must be positive");
}

TransformSet scenario_schedule(const AttackScenario& scenario, double t) {
  TransformSet set{};
  if (t >= scenario.start) {
    set[plant::index(scenario.channel)] = {scenario.kind, scenario.magnitude, scenario.start, std::nullopt};
  }
  return set;
}

ReferenceValues reference_values(const automation::Setpoints& sp, const plant::PlantState& nominal) {
  ReferenceValues r;
  r.values = nominal.readings;
  r.values[plant::index(ChannelId::S1)] = sp.inlet_pressure;
  r.values[plant::index(ChannelId::S5)] = sp.tank_pressure;
  r.values[plant::index(ChannelId::S6)] = sp.level;
  return r;
}

AttackScenario scenario1(const ReferenceValues& ref, double t1, double fraction) {
  return {"scenario1", ChannelId::S6, TransformKind::FixedValue, fraction * ref[ChannelId::S6], t1, {3},
          "false low reading of tank level"};
}

AttackScenario scenario2(const ReferenceValues& ref, double t1, double fraction) {
  return {"scenario2", ChannelId::S5, TransformKind::FixedValue, fraction * ref[ChannelId::S5], t1, {1, 2},
          "false low reading of tank pressure"};
}

AttackScenario preset(int number, const ReferenceValues& ref, double t1, double fraction) {
  switch (number) {
    case 1: return scenario1(ref, t1, fraction);
    case 2: return scenario2(ref, t1, fraction);
    default: throw ValidationError("unknown scenario preset " + std::to_string(number));
  }
}

AttackScenario parse_scenario(const std::string& ini_text, const ReferenceValues& ref) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("scenario file: " + e.message(), e.line());
  }
  AttackScenario s;
  try {
    s.id = tree.get<std::string>("scenario.id");
    const auto channel_name = tree.get<std::string>("scenario.channel");
    const auto channel = plant::parse_channel(channel_name);
    if (!channel) throw ValidationError("scenario file: unknown channel id '" + channel_name + "'");
    s.channel = *channel;
    const auto kind_name = tree.get<std::string>("scenario.kind");
    const auto kind = parse_kind(kind_name);
    if (!kind) throw ValidationError("scenario file: unknown transform kind '" + kind_name + "'");
    s.kind = *kind;
    s.magnitude = tree.get<double>("scenario.magnitude", 0.0) * ref[s.channel];
    s.start = tree.get<double>("scenario.t1");
    s.description = tree.get<std::string>("scenario.description", "");
    std::istringstream ucas(tree.get<std::string>("scenario.ucas", ""));
    for (std::string item; std::getline(ucas, item, ',');) {
      if (!item.empty()) s.ucas.push_back(std::stoi(item));
    }
  } catch (const pt::ptree_error& e) {
    throw ValidationError(std::string("scenario file: ") + e.what());
  }
  validate(s);
  return s;
}

AttackScenario load_scenario(const std::string& path, const ReferenceValues& ref) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), ref);
}

automation::Reported ReportingPath::report(const plant::PlantState& truth, double t) {
  automation::Reported out;
  for (std::size_t i = 0; i < plant::kChannelCount; ++i) {
    ChannelTransform transform;
    if (scenario_ && !recalibrated_[i] && plant::index(scenario_->channel) == i) {
      transform = scenario_schedule(*scenario_, t)[i];
    }
    out[i] = apply_channel(transform, truth.readings[i], t, last_[i]);
    if (out[i]) last_[i] = out[i];
  }
  return out;
}

bool ReportingPath::recalibrate(ChannelId c) {
  const auto i = plant::index(c);
  if (!scenario_ || scenario_->channel != c || recalibrated_[i]) return false;
  recalibrated_[i] = true;
  return true;
}

bool ReportingPath::compromised(ChannelId c, double t) const {
  return scenario_ && scenario_->channel == c && !recalibrated_[plant::index(c)] && t >= scenario_->start;
}

}  // namespace hhil::attacks
