#include "hhil/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace hhil {

namespace {

struct Binding {
  std::string key;  // section.name
  std::function<std::string(const WorkbenchConfig&)> get;
  std::function<void(WorkbenchConfig&, const std::string&)> set;
};

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ValidationError("config: '" + key + "' is not a number: '" + text + "'");
  }
  return v;
}

std::string number_text(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename Member>
Binding real(std::string key, Member member) {
  return {key, [member](const WorkbenchConfig& c) { return number_text(member(const_cast<WorkbenchConfig&>(c))); },
          [key, member](WorkbenchConfig& c, const std::string& s) { member(c) = to_double(key, s); }};
}

template <typename Member>
Binding count(std::string key, Member member) {
  return {key, [member](const WorkbenchConfig& c) { return std::to_string(member(const_cast<WorkbenchConfig&>(c))); },
          [key, member](WorkbenchConfig& c, const std::string& s) {
            const double v = to_double(key, s);
            if (v < 0 || v != std::floor(v)) throw ValidationError("config: '" + key + "' must be a whole number");
            member(c) = static_cast<std::size_t>(v);
          }};
}

void add_pid(std::vector<Binding>& out, const std::string& section,
             automation::PidGains& (*pick)(WorkbenchConfig&)) {
  out.push_back(real(section + ".kp", [pick](WorkbenchConfig& c) -> double& { return pick(c).kp; }));
  out.push_back(real(section + ".ki", [pick](WorkbenchConfig& c) -> double& { return pick(c).ki; }));
  out.push_back(real(section + ".kd", [pick](WorkbenchConfig& c) -> double& { return pick(c).kd; }));
  out.push_back({section + ".anti_windup",
                 [pick](const WorkbenchConfig& c) {
                   return std::string(pick(const_cast<WorkbenchConfig&>(c)).anti_windup ? "true" : "false");
                 },
                 [pick, section](WorkbenchConfig& c, const std::string& s) {
                   if (s != "true" && s != "false") {
                     throw ValidationError("config: '" + section + ".anti_windup' must be true or false");
                   }
                   pick(c).anti_windup = s == "true";
                 }});
}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b;
#define HHIL_REAL(key, expr) b.push_back(real(key, [](WorkbenchConfig& c) -> double& { return expr; }))
    b.push_back(count("config.version", [](WorkbenchConfig& c) -> int& { return c.version; }));
    HHIL_REAL("plant.pump_pressure", c.params.pump_pressure);
    HHIL_REAL("plant.cv_inlet", c.params.cv_inlet);
    HHIL_REAL("plant.cv_outlet", c.params.cv_outlet);
    HHIL_REAL("plant.cv_vent", c.params.cv_vent);
    HHIL_REAL("plant.ejector_loss", c.params.ejector_loss);
    HHIL_REAL("plant.suction_gain", c.params.suction_gain);
    HHIL_REAL("plant.backpressure_coeff", c.params.backpressure_coeff);
    HHIL_REAL("plant.tank_area", c.params.tank_area);
    HHIL_REAL("plant.tank_height", c.params.tank_height);
    HHIL_REAL("plant.headspace_volume", c.params.headspace_volume);
    HHIL_REAL("plant.water_density", c.params.water_density);
    HHIL_REAL("plant.atmospheric_pressure", c.params.atmospheric_pressure);
    HHIL_REAL("plant.gas_temperature", c.params.gas_temperature);
    HHIL_REAL("plant.valve_lag", c.params.valve_lag);
    HHIL_REAL("plant.time_step", c.params.time_step);
    HHIL_REAL("plant.level_tolerance", c.params.level_tolerance);
    HHIL_REAL("plant.pressure_tolerance", c.params.pressure_tolerance);
    HHIL_REAL("setpoints.inlet_pressure", c.setpoints.inlet_pressure);
    HHIL_REAL("setpoints.level", c.setpoints.level);
    HHIL_REAL("setpoints.tank_pressure", c.setpoints.tank_pressure);
    add_pid(b, "gains.inlet", [](WorkbenchConfig& c) -> automation::PidGains& { return c.gains.inlet; });
    add_pid(b, "gains.level", [](WorkbenchConfig& c) -> automation::PidGains& { return c.gains.level; });
    add_pid(b, "gains.vent", [](WorkbenchConfig& c) -> automation::PidGains& { return c.gains.vent; });
    HHIL_REAL("settle.band", c.settle.band);
    HHIL_REAL("settle.rate", c.settle.rate);
    HHIL_REAL("settle.hold", c.settle.hold);
    HHIL_REAL("settle.horizon", c.settle.horizon);
    HHIL_REAL("anomaly.threshold", c.anomaly.threshold);
    b.push_back(count("anomaly.min_run", [](WorkbenchConfig& c) -> std::size_t& { return c.anomaly.min_run; }));
    b.push_back(count("anomaly.quiet_run", [](WorkbenchConfig& c) -> std::size_t& { return c.anomaly.quiet_run; }));
    HHIL_REAL("anomaly.floor", c.anomaly.floor);
    HHIL_REAL("episode.attack_start", c.episode.attack_start);
    HHIL_REAL("episode.spoof_fraction", c.episode.spoof_fraction);
    HHIL_REAL("episode.nominal_duration", c.episode.nominal_duration);
    HHIL_REAL("episode.max_detection", c.episode.max_detection);
#undef HHIL_REAL
    return b;
  }();
  return table;
}

}  // namespace

void validate(const WorkbenchConfig& cfg) {
  if (cfg.version != 1) throw ValidationError("config: unsupported version " + std::to_string(cfg.version));
  plant::validate(cfg.params);
  automation::validate(cfg.setpoints, cfg.params);
  automation::validate(cfg.gains.inlet);
  automation::validate(cfg.gains.level);
  automation::validate(cfg.gains.vent);
  const auto& s = cfg.settle;
  if (!(s.band > 0) || !(s.rate > 0) || !(s.hold >= 0) || !(s.horizon > 0)) {
    throw ValidationError("config: settle criteria must be positive");
  }
  const auto& a = cfg.anomaly;
  if (!(a.threshold > 0) || a.min_run == 0 || a.quiet_run == 0 || !(a.floor > 0)) {
    throw ValidationError("config: anomaly thresholds must be positive");
  }
  const auto& e = cfg.episode;
  if (!(e.attack_start > 0) || !(e.spoof_fraction >= 0) || !(e.nominal_duration >= 1) || !(e.max_detection > 0)) {
    throw ValidationError("config: episode settings out of range");
  }
}

WorkbenchConfig parse_config(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message(), e.line());
  }
  WorkbenchConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ValidationError("config: key '" + section + "' outside any section");
    }
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      const Binding* match = nullptr;
      for (const auto& b : bindings()) {
        if (b.key == key) match = &b;
      }
      if (!match) throw ValidationError("config: unknown key '" + key + "'");
      match->set(cfg, value.data());
    }
  }
  validate(cfg);
  return cfg;
}

WorkbenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_ini(const WorkbenchConfig& cfg) {
  std::string out;
  std::string current;
  for (const auto& b : bindings()) {
    const auto dot = b.key.rfind('.');
    const auto section = b.key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out += '\n';
      out += '[' + section + "]\n";
      current = section;
    }
    out += b.key.substr(dot + 1) + " = " + b.get(cfg) + '\n';
  }
  return out;
}

}  // namespace hhil
