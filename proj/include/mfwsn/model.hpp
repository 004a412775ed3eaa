#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mfwsn/channel.hpp"

namespace mfwsn {

enum class ActionType { Capture, Failure, Send, Receive, Internal };

struct ActionKind {
  ActionType type = ActionType::Internal;
  std::string message;  // Send / Receive payload type
  std::string name;     // label for Internal actions ("generate", "timeout", ...)

  bool operator==(const ActionKind&) const = default;
  std::string label() const;
};

// One edge of the per-node transition system. rate is absent (bottom) iff
// the action is a Receive: its rate is induced by the senders.
struct Transition {
  int from = 0;
  int to = 0;
  ActionKind action;
  std::optional<double> rate;

  bool operator==(const Transition&) const = default;
};

// Per-node labeled transition system. State indices follow declaration
// order, which is also the occupancy-vector ordering.
struct Component {
  std::vector<std::string> states;
  std::vector<Transition> transitions;

  bool operator==(const Component&) const = default;
  int state_index(const std::string& name) const;  // -1 if unknown
  bool uses_send_receive() const;
  bool uses_capture_failure() const;
};

// Local-broadcast parameters: p is the fraction of nodes within range of a
// sender, interference maps each message type m to the set I_m of message
// types whose sends interfere with m (always containing m itself).
struct BroadcastConfig {
  double p = 1.0;
  std::map<std::string, std::set<std::string>> interference;
  long long N = 1;

  bool operator==(const BroadcastConfig&) const = default;
  double d() const { return p * static_cast<double>(N); }
};

struct ModelBundle {
  Component component;
  std::map<std::string, double> initial;  // state name -> fraction
  ChannelModel channel;
  std::optional<BroadcastConfig> broadcast;
  long long N = 1;

  bool operator==(const ModelBundle&) const = default;
};

// Parses and fully validates a model file. Unknown fields are rejected;
// syntax errors carry line/column, semantic errors name the violated rule.
ModelBundle parse_model(const std::string& text);
ModelBundle parse_model_file(const std::string& path);
std::string serialize_model(const ModelBundle& bundle);

// Occupancy vector over the component's states; unmentioned states get 0.
// The fractions must be nonnegative and sum to 1 within 1e-12.
std::vector<double> initial_occupancy(const std::map<std::string, double>& assignments,
                                      const Component& component);

struct BroadcastDiagnostic {
  std::string state;
  std::string message_type;
  std::string text;
};

// Empty iff no state has both an outgoing send(m) and an outgoing
// receive(m) for the same message type m. Throws ModelError when handed a
// component that does not use send/receive actions at all.
std::vector<BroadcastDiagnostic> validate_broadcast_restriction(const Component& component);

}  // namespace mfwsn
