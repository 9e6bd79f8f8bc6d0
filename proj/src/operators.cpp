#include "hhil/operators.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hhil/error.hpp"

namespace hhil::operators {

namespace {

struct LineReader {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line_no = 0;

  bool next(std::string_view& out) {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    out = text.substr(pos, end - pos);
    if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  }
};

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto at = line.find(sep, start);
    out.push_back(line.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double number(std::string_view field, std::size_t line) {
  field = trim(field);
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc{} || res.ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line) + ": malformed number '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace

bool ControlVolume::contains(double x, double y, double z) const {
  const std::array<double, 3> p{x, y, z};
  for (int i = 0; i < 3; ++i) {
    if (p[i] < origin[i] || p[i] > origin[i] + extents[i]) return false;
  }
  return true;
}

void validate(const std::vector<ControlVolume>& volumes) {
  for (const auto& v : volumes) {
    for (double e : v.extents) {
      if (!(e > 0.0)) throw ValidationError("control volume '" + v.id + "': extents must be positive");
    }
  }
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    for (std::size_t j = i + 1; j < volumes.size(); ++j) {
      const auto& a = volumes[i];
      const auto& b = volumes[j];
      bool overlap = true;
      for (int k = 0; k < 3; ++k) {
        const double lo = std::max(a.origin[k], b.origin[k]);
        const double hi = std::min(a.origin[k] + a.extents[k], b.origin[k] + b.extents[k]);
        if (!(hi > lo)) overlap = false;
      }
      if (overlap) throw ValidationError("control volumes '" + a.id + "' and '" + b.id + "' overlap");
    }
  }
}

PelvisTrajectory ingest_trajectory(std::string_view csv) {
  LineReader reader{csv};
  PelvisTrajectory traj;
  std::string_view line;
  std::size_t header_line = 0;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    if (traj.samples.empty() && header_line == 0 && trim(line).starts_with("t")) {
      header_line = reader.line_no;
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != 4) {
      throw ParseError("line " + std::to_string(reader.line_no) + ": expected 4 fields t,x,y,z",
                       reader.line_no);
    }
    PelvisSample s{number(fields[0], reader.line_no), number(fields[1], reader.line_no),
                   number(fields[2], reader.line_no), number(fields[3], reader.line_no)};
    if (!traj.samples.empty() && !(s.t > traj.samples.back().t)) {
      throw ParseError("line " + std::to_string(reader.line_no) + ": time does not increase", reader.line_no);
    }
    traj.samples.push_back(s);
  }
  const auto n = traj.samples.size();
  if (n >= 2) {
    const double span = traj.samples.back().t - traj.samples.front().t;
    traj.rate = static_cast<double>(n - 1) / span;
    const double period = 1.0 / traj.rate;
    for (std::size_t k = 1; k < n; ++k) {
      const double dt = traj.samples[k].t - traj.samples[k - 1].t;
      if (std::abs(dt - period) > 0.01 * period) {
        throw ParseError("sample " + std::to_string(k) + ": sample rate not constant within 1%", 0);
      }
    }
  }
  return traj;
}

std::string_view to_string(Phase p) { return p == Phase::Detection ? "detection" : "restoration"; }

Phase parse_phase(std::string_view s) {
  if (s == "detection") return Phase::Detection;
  if (s == "restoration") return Phase::Restoration;
  throw ValidationError("unknown phase '" + std::string(s) + "'");
}

DwellTable contextualize(const PelvisTrajectory& traj, const std::vector<ControlVolume>& volumes,
                         Phase phase) {
  DwellTable table{phase, {}};
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t current = kNone;
  std::size_t run_start = 0;
  auto close = [&](std::size_t end) {
    if (current == kNone) return;
    const auto frames = static_cast<double>(end - run_start);
    table.rows.push_back({volumes[current].id, traj.samples[run_start].t, frames / traj.rate});
  };
  for (std::size_t k = 0; k < traj.samples.size(); ++k) {
    const auto& s = traj.samples[k];
    std::size_t inside = kNone;
    for (std::size_t v = 0; v < volumes.size(); ++v) {
      if (volumes[v].contains(s.x, s.y, s.z)) {
        inside = v;
        break;
      }
    }
    if (inside != current) {
      close(k);
      current = inside;
      run_start = k;
    }
  }
  close(traj.samples.size());
  return table;
}

double activity_duration(const DwellTable& table) {
  if (table.rows.empty()) {
    std::cerr << "warning: empty dwell table, activity duration is 0\n";
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& r : table.rows) sum += r.persistence;
  return sum;
}

std::string to_csv(const DwellTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "# phase: " << to_string(table.phase) << "\nvolume_id,entry_t,persistence\n";
  for (const auto& r : table.rows) out << r.volume_id << ',' << r.entry_t << ',' << r.persistence << '\n';
  return out.str();
}

DwellTable dwell_table_from_csv(std::string_view text) {
  LineReader reader{text};
  DwellTable table;
  std::string_view line;
  bool have_phase = false;
  bool have_header = false;
  while (reader.next(line)) {
    if (trim(line).empty()) continue;
    if (line.starts_with("#")) {
      auto body = trim(line.substr(1));
      if (body.starts_with("phase:")) {
        table.phase = parse_phase(trim(body.substr(6)));
        have_phase = true;
      }
      continue;
    }
    if (!have_header) {
      if (trim(line) != "volume_id,entry_t,persistence") {
        throw ParseError("line " + std::to_string(reader.line_no) + ": expected dwell-table header",
                         reader.line_no);
      }
      have_header = true;
      continue;
    }
    const auto fields = split(line);
    if (fields.size() != 3) {
      throw ParseError("line " + std::to_string(reader.line_no) + ": expected 3 fields", reader.line_no);
    }
    DwellRow row{std::string(trim(fields[0])), number(fields[1], reader.line_no),
                 number(fields[2], reader.line_no)};
    if (!(row.persistence > 0.0)) {
      throw ParseError("line " + std::to_string(reader.line_no) + ": persistence must be positive",
                       reader.line_no);
    }
    if (!table.rows.empty() && row.entry_t < table.rows.back().entry_t) {
      throw ParseError("line " + std::to_string(reader.line_no) + ": rows not time-ordered", reader.line_no);
    }
    table.rows.push_back(std::move(row));
  }
  if (!have_phase) throw ParseError("dwell table: missing '# phase:' header", 1);
  return table;
}

std::string_view to_string(Persona p) { return p == Persona::Expert ? "expert" : "novice"; }

Persona parse_persona(std::string_view s) {
  if (s == "expert") return Persona::Expert;
  if (s == "novice") return Persona::Novice;
  throw ValidationError("unknown persona '" + std::string(s) + "'");
}

PersonaSampler::PersonaSampler(const Anchors& anchors) : anchors_(anchors) {
  for (double a : anchors_) {
    if (!std::isfinite(a)) throw ValidationError("persona anchors must be finite");
  }
  for (std::size_t i = 1; i < anchors_.size(); ++i) {
    if (anchors_[i] < anchors_[i - 1]) throw ValidationError("persona anchors must be non-decreasing");
  }
}

double PersonaSampler::quantile(double u) const {
  u = std::clamp(u, 0.0, 1.0);
  const double pos = u * 4.0;
  const auto seg = std::min<std::size_t>(static_cast<std::size_t>(pos), 3);
  const double frac = pos - static_cast<double>(seg);
  return anchors_[seg] + frac * (anchors_[seg + 1] - anchors_[seg]);
}

double PersonaSampler::mean() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) sum += 0.125 * (anchors_[i] + anchors_[i + 1]);
  return sum;
}

PersonaSampler fit_persona(const Anchors& anchors) { return PersonaSampler(anchors); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double sample_persona(const PersonaSampler& sampler, std::mt19937_64& rng) {
  return sampler.quantile(uniform01(rng));
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::PersonaDraw: return "persona draw";
    case Provenance::DwellTables: return "dwell tables";
    case Provenance::LiveSession: return "live session";
  }
  return "?";
}

void validate(const OperatorTimes& t) {
  if (!(t.detection > 0.0) || !std::isfinite(t.detection)) {
    throw ValidationError("detection time must be positive");
  }
  if (!(t.restoration > 0.0) || !std::isfinite(t.restoration)) {
    throw ValidationError("restoration time must be positive");
  }
}

OperatorTimes from_dwell_tables(const DwellTable& detection, const DwellTable& restoration) {
  if (detection.phase != Phase::Detection || restoration.phase != Phase::Restoration) {
    throw ValidationError("dwell tables carry the wrong phase tags");
  }
  OperatorTimes t{activity_duration(detection), activity_duration(restoration), Provenance::DwellTables};
  validate(t);
  return t;
}

PersonaLibrary PersonaLibrary::defaults() {
  PersonaLibrary lib;
  using P = Persona;
  using Ph = Phase;
  lib.set({P::Expert, 1, Ph::Detection, {143, 220, 254, 301, 417}});
  lib.set({P::Novice, 1, Ph::Detection, {184, 358.5, 426.5, 509, 709}});
  lib.set({P::Expert, 1, Ph::Restoration, {28, 29, 30, 32, 33}});
  lib.set({P::Novice, 1, Ph::Restoration, {28, 29, 30, 32, 33}});
  lib.set({P::Expert, 2, Ph::Detection, {193, 225.75, 240, 252, 280}});
  lib.set({P::Novice, 2, Ph::Detection, {207, 257, 283, 315, 392}});
  lib.set({P::Expert, 2, Ph::Restoration, {1429, 1442, 1606, 1737, 1739}});
  lib.set({P::Novice, 2, Ph::Restoration, {1429, 1442, 1606, 1737, 1739}});
  return lib;
}

PersonaLibrary PersonaLibrary::parse(const std::string& ini_text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(ini_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("persona file: " + e.message(), e.line());
  }
  PersonaLibrary lib;
  for (const auto& [section, body] : tree) {
    const auto parts = split(section, '.');
    if (parts.size() != 3 || !parts[1].starts_with("scenario")) {
      throw ValidationError("persona file: bad section name '" + section + "'");
    }
    PersonaSpec spec;
    spec.persona = parse_persona(parts[0]);
    const auto digits = parts[1].substr(8);
    if (std::from_chars(digits.data(), digits.data() + digits.size(), spec.scenario).ec != std::errc{}) {
      throw ValidationError("persona file: bad scenario in '" + section + "'");
    }
    spec.phase = parse_phase(parts[2]);
    const auto text = body.get<std::string>("anchors", "");
    const auto fields = split(text);
    if (fields.size() != 5) throw ValidationError("persona file: [" + section + "] needs five anchors");
    for (std::size_t i = 0; i < 5; ++i) spec.anchors[i] = number(fields[i], 0);
    fit_persona(spec.anchors);
    lib.set(spec);
  }
  return lib;
}

PersonaLibrary PersonaLibrary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open persona file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void PersonaLibrary::set(const PersonaSpec& spec) {
  specs_[{spec.persona, spec.scenario, spec.phase}] = spec;
}

const PersonaSpec& PersonaLibrary::get(Persona persona, int scenario, Phase phase) const {
  auto it = specs_.find({persona, scenario, phase});
  if (it == specs_.end()) {
    throw ValidationError("no persona anchors for " + std::string(to_string(persona)) + " scenario " +
                          std::to_string(scenario) + " " + std::string(to_string(phase)));
  }
  return it->second;
}

std::vector<PersonaSpec> PersonaLibrary::all() const {
  std::vector<PersonaSpec> out;
  for (const auto& [key, spec] : specs_) out.push_back(spec);
  return out;
}

}  // namespace hhil::operators
