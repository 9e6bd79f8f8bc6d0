#include "hhil/telemetry.hpp"

#include <algorithm>
#include <cmath>

namespace hhil::telemetry {

using automation::ControlMode;
using plant::ChannelId;

std::string_view to_string(FrameKind k) {
  switch (k) {
    case FrameKind::Telemetry: return "telemetry";
    case FrameKind::Event: return "event";
    case FrameKind::Command: return "command";
    case FrameKind::Ack: return "ack";
  }
  return "?";
}

std::optional<FrameKind> parse_kind(std::string_view s) {
  for (auto k : {FrameKind::Telemetry, FrameKind::Event, FrameKind::Command, FrameKind::Ack}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Actor a) {
  switch (a) {
    case Actor::Human: return "human";
    case Actor::Automation: return "automation";
    case Actor::Attack: return "attack";
    case Actor::Plant: return "plant";
  }
  return "?";
}

std::optional<Actor> parse_actor(std::string_view s) {
  for (auto a : {Actor::Human, Actor::Automation, Actor::Attack, Actor::Plant}) {
    if (to_string(a) == s) return a;
  }
  return std::nullopt;
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Steady: return "steady";
    case Phase::UnderAttack: return "under-attack";
    case Phase::Shutdown: return "shutdown";
    case Phase::PlantOff: return "plant-off";
    case Phase::Startup: return "start-up";
    case Phase::Settled: return "settled";
  }
  return "?";
}

bool known_topic(std::string_view topic) {
  static const std::vector<std::string_view> fixed{
      "plant/truth",   "plant/phase",  "attack/start",   "op/mode",        "op/valve",    "op/setpoint",
      "op/shutdown",   "op/recalibrate", "op/restart",   "op/ack-anomaly", "op/malformed", "session/hello"};
  if (std::find(fixed.begin(), fixed.end(), topic) != fixed.end()) return true;
  if (topic.starts_with("plant/sensor/")) {
    const auto c = plant::parse_channel(topic.substr(13));
    return c && plant::is_sensor(*c);
  }
  if (topic.starts_with("plant/actuator/")) {
    const auto c = plant::parse_channel(topic.substr(15));
    return c == ChannelId::AV1 || c == ChannelId::AV2 || c == ChannelId::AV3;
  }
  return false;
}

namespace {

json frame_json(const Frame& f) {
  return json{{"kind", std::string(to_string(f.kind))}, {"topic", f.topic}, {"t", f.t}, {"payload", f.payload}};
}

Frame frame_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("frame is not a JSON object", 0);
  for (const char* key : {"kind", "topic", "t", "payload"}) {
    if (!j.contains(key)) throw ParseError(std::string("frame without '") + key + "'", 0);
  }
  if (!j["kind"].is_string() || !j["topic"].is_string() || !j["t"].is_number()) {
    throw ParseError("frame field has the wrong type", 0);
  }
  const auto kind = parse_kind(j["kind"].get<std::string>());
  if (!kind) throw ParseError("unknown frame kind '" + j["kind"].get<std::string>() + "'", 0);
  Frame f;
  f.kind = *kind;
  f.topic = j["topic"].get<std::string>();
  if (!known_topic(f.topic)) throw ParseError("unknown topic '" + f.topic + "'", 0);
  f.t = j["t"].get<double>();
  f.payload = j["payload"];
  return f;
}

}  // namespace

std::string encode(const Frame& f) { return frame_json(f).dump(); }

Frame decode(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed frame: ") + e.what(), 0);
  }
  return frame_from_json(j);
}

std::string serialize(const SessionEvent& e) {
  json j = frame_json(e.frame);
  j["seq"] = e.seq;
  j["wall"] = e.wall;
  j["actor"] = std::string(to_string(e.actor));
  return j.dump();
}

std::string serialize_log(const std::vector<SessionEvent>& log) {
  std::string out;
  for (const auto& e : log) {
    out += serialize(e);
    out += '\n';
  }
  return out;
}

std::vector<SessionEvent> parse_log(std::string_view text) {
  std::vector<SessionEvent> out;
  std::size_t pos = 0;
  std::size_t line = 0;
  while (pos < text.size()) {
    ++line;
    const auto end = text.find('\n', pos);
    const auto where = "session log line " + std::to_string(line) + " (byte " + std::to_string(pos) + "): ";
    if (end == std::string_view::npos) throw ParseError(where + "truncated record", line, pos);
    const auto body = text.substr(pos, end - pos);
    try {
      const json j = json::parse(body);
      SessionEvent e;
      e.frame = frame_from_json(j);
      if (!j.contains("seq") || !j["seq"].is_number_unsigned() || !j.contains("wall") || !j["wall"].is_number() ||
          !j.contains("actor") || !j["actor"].is_string()) {
        throw ParseError("record without seq, wall or actor", 0);
      }
      e.seq = j["seq"].get<std::uint64_t>();
      e.wall = j["wall"].get<double>();
      const auto actor = parse_actor(j["actor"].get<std::string>());
      if (!actor) throw ParseError("unknown actor", 0);
      e.actor = *actor;
      out.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError(where + ex.what(), line, pos);
    } catch (const ParseError& ex) {
      throw ParseError(where + ex.what(), line, pos);
    }
    pos = end + 1;
  }
  return out;
}

Session::Session(const runner::EpisodeSetup& setup, SessionOptions options)
    : setup_(setup),
      loop_config_{setup.config.params, setup.config.setpoints, setup.config.gains},
      options_(std::move(options)),
      path_(setup.attack) {
  if (!options_.wall_clock) {
    options_.wall_clock = [] {
      return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
    };
  }
  steps_ = plant::steps_per_sample(setup_.config.params);
  loop_ = {setup_.settled.plant, setup_.settled.controller, ControlMode::Monitoring};
  loop_.plant.t = 0.0;
  last_commands_ = loop_.controller.last_command;
  previous_ = loop_.plant;
  truth_.append(loop_.plant);
  std::vector<Frame> ignored;
  record(Actor::Plant, {FrameKind::Event, "plant/phase", 0.0, {{"phase", "steady"}}}, ignored);
  json truth = json::object();
  for (auto c : plant::kAllChannels) truth[std::string(plant::to_string(c))] = loop_.plant.value(c);
  record(Actor::Plant, {FrameKind::Telemetry, "plant/truth", 0.0, truth}, ignored, false);
}

void Session::record(Actor actor, const Frame& f, std::vector<Frame>& out, bool broadcast) {
  log_.push_back({seq_++, options_.wall_clock(), actor, f});
  if (broadcast) out.push_back(f);
}

void Session::submit(const Frame& command, bool from_operator) {
  queue_.push_back({command, from_operator, std::nullopt});
}

void Session::submit_malformed(const std::string& error) {
  queue_.push_back({Frame{FrameKind::Command, "op/malformed", t(), json::object()}, true, error});
}

void Session::enter(Phase p, std::vector<Frame>& out) {
  phase_ = p;
  settled_for_ = 0;
  record(Actor::Plant, {FrameKind::Event, "plant/phase", t(), {{"phase", std::string(to_string(p))}}}, out);
}

void Session::change_mode(ControlMode to, std::vector<Frame>& out) {
  const auto tr = automation::set_mode(loop_.mode, to, t());
  if (!tr.event) return;
  if (to == ControlMode::Exclusivity) loop_.controller.manual = last_commands_;
  loop_.controller = automation::apply(tr, loop_.controller);
  loop_.mode = tr.mode;
  record(Actor::Human,
         {FrameKind::Event, "op/mode", t(),
          {{"from", std::string(automation::to_string(tr.event->from))},
           {"to", std::string(automation::to_string(tr.event->to))},
           {"description", tr.event->description}}},
         out);
}

std::vector<Frame> Session::snapshot() const {
  return {{FrameKind::Event, "plant/phase", t(), {{"phase", std::string(to_string(phase_))}}},
          {FrameKind::Event, "op/mode", t(), {{"to", std::string(automation::to_string(loop_.mode))}}}};
}

void Session::apply(const Pending& p, std::vector<Frame>& out) {
  Frame cmd = p.frame;
  cmd.t = t();
  const json id = cmd.payload.is_object() && cmd.payload.contains("id") ? cmd.payload["id"] : json();
  auto ack = [&](bool ok, const std::string& error = {}) {
    json payload{{"ok", ok}};
    if (!ok) payload["error"] = error;
    if (!id.is_null()) payload["id"] = id;
    record(Actor::Plant, {FrameKind::Ack, cmd.topic, t(), payload}, out);
  };
  record(Actor::Human, cmd, out, false);
  if (p.malformed) return ack(false, *p.malformed);
  if (cmd.kind != FrameKind::Command || !cmd.topic.starts_with("op/")) return ack(false, "not a command");
  if (!p.from_operator) return ack(false, "observers are read-only");
  const json& body = cmd.payload;

  try {
    if (cmd.topic == "op/ack-anomaly") return ack(true);

    if (cmd.topic == "op/mode") {
      const auto mode = automation::parse_mode(body.value("mode", std::string()));
      if (!mode) return ack(false, "unknown mode");
      if (automation::is_automated(*mode) && (phase_ == Phase::Shutdown || phase_ == Phase::PlantOff)) {
        return ack(false, "automation returns only through op/restart");
      }
      change_mode(*mode, out);
      return ack(true);
    }

    if (cmd.topic == "op/valve") {
      if (loop_.mode != ControlMode::Exclusivity) return ack(false, "automation holds the valves");
      if (phase_ == Phase::Shutdown) return ack(false, "shutdown sequence holds the valves");
      const auto valve = plant::parse_channel(body.value("valve", std::string()));
      if (!valve || !(valve == ChannelId::AV1 || valve == ChannelId::AV2 || valve == ChannelId::AV3)) {
        return ack(false, "unknown valve");
      }
      if (!body.contains("value") || !body["value"].is_number()) return ack(false, "missing value");
      const double v = body["value"].get<double>();
      if (!(v >= 0.0 && v <= 1.0)) return ack(false, "valve command outside [0, 1]");
      loop_.controller.manual[plant::index(*valve) - plant::index(ChannelId::AV1)] = v;
      return ack(true);
    }

    if (cmd.topic == "op/setpoint") {
      if (loop_.mode != ControlMode::Empowering) return ack(false, "setpoints are editable in empowering mode only");
      const auto channel = plant::parse_channel(body.value("channel", std::string()));
      if (!body.contains("value") || !body["value"].is_number()) return ack(false, "missing value");
      auto sp = loop_config_.setpoints;
      const double v = body["value"].get<double>();
      if (channel == ChannelId::S1) {
        sp.inlet_pressure = v;
      } else if (channel == ChannelId::S5) {
        sp.tank_pressure = v;
      } else if (channel == ChannelId::S6) {
        sp.level = v;
      } else {
        return ack(false, "no setpoint for that channel");
      }
      automation::validate(sp, loop_config_.params);
      loop_config_.setpoints = sp;
      return ack(true);
    }

    if (cmd.topic == "op/shutdown") {
      if (phase_ != Phase::Steady && phase_ != Phase::UnderAttack && phase_ != Phase::Settled) {
        return ack(false, "shutdown not available in phase " + std::string(to_string(phase_)));
      }
      change_mode(ControlMode::Exclusivity, out);
      loop_.controller.manual = {0.0, 1.0, 1.0};
      ack(true);
      enter(Phase::Shutdown, out);
      const auto& s = loop_.plant;
      if (s.level < loop_config_.params.level_tolerance &&
          std::abs(s.tank_pressure - loop_config_.params.atmospheric_pressure) < loop_config_.params.pressure_tolerance) {
        enter(Phase::PlantOff, out);
      }
      return;
    }

    if (cmd.topic == "op/recalibrate") {
      if (phase_ != Phase::PlantOff) return ack(false, "recalibration requires the plant to be off");
      const auto channel = plant::parse_channel(body.value("channel", std::string()));
      if (!channel || !plant::is_sensor(*channel)) return ack(false, "unknown sensor");
      const bool cleared = path_.recalibrate(*channel);
      json payload{{"ok", true}, {"cleared", cleared}};
      if (!id.is_null()) payload["id"] = id;
      record(Actor::Plant, {FrameKind::Ack, cmd.topic, t(), payload}, out);
      return;
    }

    if (cmd.topic == "op/restart") {
      if (phase_ != Phase::PlantOff) return ack(false, "restart requires the plant to be off");
      change_mode(ControlMode::Monitoring, out);
      loop_.controller = automation::ControllerState{};
      ack(true);
      record(Actor::Human, {FrameKind::Event, "op/restart", t(), json::object()}, out);
      enter(Phase::Startup, out);
      return;
    }
  } catch (const std::exception& e) {
    return ack(false, e.what());
  }
  ack(false, "unsupported command topic");
}

void Session::publish(std::vector<Frame>& out) {
  const auto reported = path_.report(loop_.plant, t());
  for (auto c : {ChannelId::S1, ChannelId::S2, ChannelId::S5, ChannelId::S6, ChannelId::S7}) {
    const auto& v = reported[plant::index(c)];
    if (v) record(Actor::Plant, {FrameKind::Telemetry, "plant/sensor/" + std::string(plant::to_string(c)), t(), *v}, out);
  }
  for (auto c : {ChannelId::AV1, ChannelId::AV2, ChannelId::AV3}) {
    record(Actor::Plant,
           {FrameKind::Telemetry, "plant/actuator/" + std::string(plant::to_string(c)), t(), loop_.plant.value(c)},
           out);
  }
  json truth = json::object();
  for (auto c : plant::kAllChannels) truth[std::string(plant::to_string(c))] = loop_.plant.value(c);
  record(Actor::Plant, {FrameKind::Telemetry, "plant/truth", t(), truth}, out, false);
}

std::vector<Frame> Session::tick() {
  std::vector<Frame> out;
  if (phase_ == Phase::Steady && setup_.attack.start <= t()) {
    record(Actor::Attack,
           {FrameKind::Event, "attack/start", setup_.attack.start,
            {{"channel", std::string(plant::to_string(setup_.attack.channel))},
             {"kind", std::string(attacks::to_string(setup_.attack.kind))}}},
           out, false);
    phase_ = Phase::UnderAttack;
  }
  while (!queue_.empty()) {
    const auto p = queue_.front();
    queue_.pop_front();
    apply(p, out);
  }

  previous_ = loop_.plant;
  const double dt = loop_config_.params.time_step;
  for (std::size_t i = 0; i < steps_; ++i) {
    const double time = static_cast<double>(sample_) + static_cast<double>(i) * dt;
    const auto reported = path_.report(loop_.plant, time);
    const auto a = automation::automation_step(reported, loop_config_.setpoints, loop_.mode, loop_.controller,
                                               loop_config_.gains, dt);
    loop_.controller = a.state;
    last_commands_ = a.commands;
    loop_.plant = plant::step(loop_.plant, a.commands, loop_config_.params);
  }
  ++sample_;
  truth_.append(loop_.plant);
  publish(out);

  const auto& p = loop_config_.params;
  const auto& s = loop_.plant;
  if (phase_ == Phase::Shutdown && s.level < p.level_tolerance &&
      std::abs(s.tank_pressure - p.atmospheric_pressure) < p.pressure_tolerance) {
    enter(Phase::PlantOff, out);
  } else if (phase_ == Phase::Startup) {
    const auto& sp = loop_config_.setpoints;
    const auto& crit = setup_.config.settle;
    bool ok = std::abs(s.value(ChannelId::S1) - sp.inlet_pressure) <= crit.band * sp.inlet_pressure &&
              std::abs(s.value(ChannelId::S5) - sp.tank_pressure) <= crit.band * sp.tank_pressure &&
              std::abs(s.value(ChannelId::S6) - sp.level) <= crit.band * sp.level;
    for (auto c : plant::kAllChannels) {
      ok = ok && std::abs(s.value(c) - previous_.value(c)) / plant::channel_scale(c, sp) < crit.rate;
    }
    settled_for_ = ok ? settled_for_ + 1 : 0;
    if (settled_for_ >= static_cast<int>(std::ceil(crit.hold))) enter(Phase::Settled, out);
  }
  return out;
}

void Session::run_until(double t_target) {
  while (t() < t_target) tick();
}

namespace {

bool is_exclusivity_event(const SessionEvent& e) {
  return e.frame.kind == FrameKind::Event && e.frame.topic == "op/mode" && e.frame.payload.is_object() &&
         e.frame.payload.value("to", std::string()) == "exclusivity";
}

std::optional<double> first_time(const std::vector<SessionEvent>& log,
                                 const std::function<bool(const SessionEvent&)>& pred) {
  for (const auto& e : log) {
    if (pred(e)) return e.frame.t;
  }
  return std::nullopt;
}

bool phase_event(const SessionEvent& e, std::string_view phase) {
  return e.frame.kind == FrameKind::Event && e.frame.topic == "plant/phase" && e.frame.payload.is_object() &&
         e.frame.payload.value("phase", std::string()) == phase;
}

}  // namespace

operators::OperatorTimes extract_operator_times(const std::vector<SessionEvent>& log, double t1) {
  const auto detected = first_time(log, [](const SessionEvent& e) {
    return (e.frame.kind == FrameKind::Command && e.frame.topic == "op/ack-anomaly") || is_exclusivity_event(e);
  });
  if (!detected) throw IncompleteSession("session log has no anomaly acknowledgement or switch to exclusivity");
  const auto off = first_time(log, [](const SessionEvent& e) { return phase_event(e, "plant-off"); });
  if (!off) throw IncompleteSession("session log has no end of shutdown");
  const auto restart = first_time(log, [](const SessionEvent& e) {
    return e.frame.kind == FrameKind::Event && e.frame.topic == "op/restart";
  });
  if (!restart) throw IncompleteSession("session log has no restart");
  operators::OperatorTimes times{*detected - t1, *restart - *off, operators::Provenance::LiveSession};
  operators::validate(times);
  return times;
}

operators::OperatorTimes extract_operator_times(const std::vector<SessionEvent>& log) {
  const auto t1 = first_time(log, [](const SessionEvent& e) { return e.frame.topic == "attack/start"; });
  if (!t1) throw IncompleteSession("session log has no attack start");
  return extract_operator_times(log, *t1);
}

Replay replay(const std::vector<SessionEvent>& log) {
  Replay r;
  r.trace = plant::Trace(0.0, 1.0);
  double last_t = -1.0;
  for (const auto& e : log) {
    if (e.frame.topic != "plant/truth") continue;
    if (e.frame.t != last_t + 1.0) {
      throw ParseError("session log: plant/truth records are not contiguous at t=" + std::to_string(e.frame.t), 0);
    }
    last_t = e.frame.t;
    std::array<double, plant::kChannelCount> row{};
    for (auto c : plant::kAllChannels) {
      const auto key = std::string(plant::to_string(c));
      if (!e.frame.payload.contains(key) || !e.frame.payload[key].is_number()) {
        throw ParseError("session log: plant/truth record without " + key, 0);
      }
      row[plant::index(c)] = e.frame.payload[key].get<double>();
    }
    r.trace.append(row);
  }
  if (r.trace.empty()) throw IncompleteSession("session log has no plant/truth records");
  const auto times = extract_operator_times(log);
  const auto t1 = first_time(log, [](const SessionEvent& e) { return e.frame.topic == "attack/start"; });
  const auto off = first_time(log, [](const SessionEvent& e) { return phase_event(e, "plant-off"); });
  const auto settled = first_time(log, [](const SessionEvent& e) { return phase_event(e, "settled"); });
  r.timeline.t1 = *t1;
  r.timeline.detection = times.detection;
  r.timeline.t3 = *off;
  r.timeline.restoration = times.restoration;
  r.timeline.t_end = settled ? *settled : last_t;
  return r;
}

Replay replay(std::string_view log_text) { return replay(parse_log(log_text)); }

}  // namespace hhil::telemetry
