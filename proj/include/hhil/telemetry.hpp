#pragma once

// Live session: one plant episode ticked at 1 Hz, operator commands applied at
// tick boundaries, every frame written to an append-only JSONL log.
//
// Topic grammar (closed set):
//
//   plant/sensor/<S1|S2|S5|S6|S7>     telemetry  reported value (post attack transform)
//   plant/actuator/<AV1|AV2|AV3>      telemetry  actual valve opening
//   plant/truth                       telemetry  all nine true channel values (log only)
//   plant/phase                       event      {"phase": steady|under-attack|shutdown|plant-off|start-up|settled}
//   attack/start                      event      {"channel", "kind"} (log only)
//   op/mode                           command    {"mode": monitoring|empowering|exclusivity}
//   op/valve                          command    {"valve": AV1|AV2|AV3, "value": 0..1}  Exclusivity only
//   op/setpoint                       command    {"channel": S1|S5|S6, "value"}       Empowering only
//   op/shutdown                       command    {}
//   op/recalibrate                    command    {"channel"}                           plant off only
//   op/restart                        command    {}                                    plant off only
//   op/ack-anomaly                    command    {}
//   op/malformed                      ack        answer to a frame that could not be decoded
//   session/hello                     event      {"role": operator|observer} (sent on connect)
//
// Every command is answered by an `ack` frame on the same topic carrying
// {"ok": true} or {"ok": false, "error": ...} and echoing the command's "id".

#include <chrono>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hhil/attacks.hpp"
#include "hhil/closed_loop.hpp"
#include "hhil/config.hpp"
#include "hhil/operators.hpp"
#include "hhil/runner.hpp"

namespace hhil::telemetry {

using json = nlohmann::json;

enum class FrameKind { Telemetry, Event, Command, Ack };
std::string_view to_string(FrameKind k);
std::optional<FrameKind> parse_kind(std::string_view s);

enum class Actor { Human, Automation, Attack, Plant };
std::string_view to_string(Actor a);
std::optional<Actor> parse_actor(std::string_view s);

struct Frame {
  FrameKind kind = FrameKind::Telemetry;
  std::string topic;
  double t = 0.0;
  json payload = json::object();

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// True for topics of the documented closed set.
bool known_topic(std::string_view topic);

/// One JSON object per frame, no trailing newline.
std::string encode(const Frame& f);
/// Throws ParseError for malformed JSON, a missing field or an unknown topic.
Frame decode(std::string_view text);

struct SessionEvent {
  std::uint64_t seq = 0;
  double wall = 0.0;  // seconds since the Unix epoch
  Actor actor = Actor::Plant;
  Frame frame;

  friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

std::string serialize(const SessionEvent& e);  // one line, no newline
std::string serialize_log(const std::vector<SessionEvent>& log);
/// Throws ParseError carrying the 1-based line and the byte offset of the
/// offending line; a final line without its newline counts as truncated.
std::vector<SessionEvent> parse_log(std::string_view text);

enum class Phase { Steady, UnderAttack, Shutdown, PlantOff, Startup, Settled };
std::string_view to_string(Phase p);

struct SessionOptions {
  std::function<double()> wall_clock;  // defaults to the system clock
};

/// The tick loop's state. Not thread-safe: the server serializes access.
class Session {
 public:
  Session(const runner::EpisodeSetup& setup, SessionOptions options = {});

  /// Queues a command for the next tick boundary. Observer commands and
  /// malformed frames are answered at that boundary with a negative ack.
  void submit(const Frame& command, bool from_operator = true);
  void submit_malformed(const std::string& error);

  /// Applies queued commands in arrival order, advances the plant one 1 Hz
  /// sample and returns every frame produced (acks, events, telemetry).
  std::vector<Frame> tick();

  /// Ticks until `t` (sample count) without commands.
  void run_until(double t);

  double t() const { return static_cast<double>(sample_); }
  Phase phase() const { return phase_; }
  automation::ControlMode mode() const { return loop_.mode; }
  const plant::PlantState& plant() const { return loop_.plant; }
  /// Valve commands handed to the plant on the most recent integration step.
  const plant::ValveVector& last_commands() const { return last_commands_; }
  const std::vector<SessionEvent>& log() const { return log_; }
  const plant::Trace& truth() const { return truth_; }
  bool complete() const { return phase_ == Phase::Settled; }

  /// Frames a newly attached client receives first (mode and phase snapshot).
  std::vector<Frame> snapshot() const;

 private:
  struct Pending {
    Frame frame;
    bool from_operator;
    std::optional<std::string> malformed;
  };

  void record(Actor actor, const Frame& f, std::vector<Frame>& out, bool broadcast = true);
  void apply(const Pending& p, std::vector<Frame>& out);
  void change_mode(automation::ControlMode to, std::vector<Frame>& out);
  void enter(Phase p, std::vector<Frame>& out);
  void publish(std::vector<Frame>& out);

  runner::EpisodeSetup setup_;
  plant::LoopConfig loop_config_;
  SessionOptions options_;
  plant::LoopState loop_;
  attacks::ReportingPath path_;
  automation::Reported last_reported_{};
  plant::ValveVector last_commands_{};
  Phase phase_ = Phase::Steady;
  std::size_t sample_ = 0;
  std::size_t steps_ = 10;
  int settled_for_ = 0;
  plant::PlantState previous_;
  std::deque<Pending> queue_;
  std::vector<SessionEvent> log_;
  plant::Trace truth_{0.0, 1.0};
  std::uint64_t seq_ = 0;
};

class IncompleteSession : public Error {
 public:
  using Error::Error;
};

/// detection = first of {op/ack-anomaly, switch to Exclusivity} - t1;
/// restoration = op/restart - entry into plant off.
operators::OperatorTimes extract_operator_times(const std::vector<SessionEvent>& log, double t1);
/// Same, with t1 taken from the log's attack/start event.
operators::OperatorTimes extract_operator_times(const std::vector<SessionEvent>& log);

struct Replay {
  plant::Trace trace;
  runner::EpisodeTimeline timeline;
};

/// Rebuilds the true-value trace from plant/truth records and the timeline
/// from the log's events.
Replay replay(const std::vector<SessionEvent>& log);
Replay replay(std::string_view log_text);

}  // namespace hhil::telemetry
