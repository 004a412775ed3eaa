#include "mfwsn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mfwsn/errors.hpp"

namespace mfwsn {

using nlohmann::json;

std::string ActionKind::label() const {
  switch (type) {
    case ActionType::Capture:  return "capture";
    case ActionType::Failure:  return "failure";
    case ActionType::Send:     return "send(" + message + ")";
    case ActionType::Receive:  return "receive(" + message + ")";
    case ActionType::Internal: return name;
  }
  return "?";
}

int Component::state_index(const std::string& name) const {
  auto it = std::find(states.begin(), states.end(), name);
  return it == states.end() ? -1 : static_cast<int>(it - states.begin());
}

bool Component::uses_send_receive() const {
  return std::any_of(transitions.begin(), transitions.end(), [](const Transition& t) {
    return t.action.type == ActionType::Send || t.action.type == ActionType::Receive;
  });
}

bool Component::uses_capture_failure() const {
  return std::any_of(transitions.begin(), transitions.end(), [](const Transition& t) {
    return t.action.type == ActionType::Capture || t.action.type == ActionType::Failure;
  });
}

namespace {

[[noreturn]] void semantic_error(const std::string& what) {
  throw ModelError("model: " + what);
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key))
      semantic_error("unknown field \"" + key + "\" in " + where);
}

// Line/column of a byte offset, for parse errors.
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

ActionKind parse_action(const json& j) {
  if (!j.is_object()) semantic_error("transition action must be an object");
  reject_unknown_keys(j, {"kind", "message", "name"}, "action");
  const std::string kind = j.value("kind", "");
  ActionKind a;
  if (kind == "capture") {
    a.type = ActionType::Capture;
  } else if (kind == "failure") {
    a.type = ActionType::Failure;
  } else if (kind == "send" || kind == "receive") {
    a.type = kind == "send" ? ActionType::Send : ActionType::Receive;
    if (!j.contains("message") || !j["message"].is_string())
      semantic_error(kind + " action requires a \"message\" type");
    a.message = j["message"].get<std::string>();
  } else if (kind == "internal") {
    a.type = ActionType::Internal;
    if (!j.contains("name") || !j["name"].is_string())
      semantic_error("internal action requires a \"name\"");
    a.name = j["name"].get<std::string>();
  } else {
    semantic_error("unknown action kind \"" + kind + "\"");
  }
  if (a.type != ActionType::Send && a.type != ActionType::Receive && j.contains("message"))
    semantic_error("\"message\" is only valid on send/receive actions");
  if (a.type != ActionType::Internal && j.contains("name"))
    semantic_error("\"name\" is only valid on internal actions");
  return a;
}

ChannelModel parse_channel(const json& j) {
  if (!j.is_object()) semantic_error("\"channel\" must be an object");
  reject_unknown_keys(j, {"beta", "z", "spatial"}, "channel");
  if (!j.contains("beta") || !j.contains("z") || !j.contains("spatial"))
    semantic_error("channel requires beta, z and spatial");
  const double beta = j["beta"].get<double>();
  const double z = j["z"].get<double>();
  const json& sp = j["spatial"];
  try {
    if (sp.is_string()) {
      if (sp.get<std::string>() != "uniform")
        semantic_error("spatial must be \"uniform\" or {\"lognormal\": {...}}");
      return ChannelModel::uniform(beta, z);
    }
    if (sp.is_object()) {
      reject_unknown_keys(sp, {"lognormal"}, "channel.spatial");
      if (!sp.contains("lognormal") || !sp["lognormal"].is_object())
        semantic_error("spatial object must contain \"lognormal\"");
      reject_unknown_keys(sp["lognormal"], {"sigma_d"}, "channel.spatial.lognormal");
      if (!sp["lognormal"].contains("sigma_d"))
        semantic_error("lognormal spatial requires sigma_d");
      return ChannelModel::log_normal(beta, z, sp["lognormal"]["sigma_d"].get<double>());
    }
  } catch (const ParameterError& e) {
    semantic_error(e.what());
  }
  semantic_error("spatial must be \"uniform\" or {\"lognormal\": {...}}");
}

}  // namespace

ModelBundle parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ModelError("syntax error at line " + std::to_string(line) + ", column " +
                     std::to_string(col) + ": " + e.what());
  }
  if (!j.is_object()) semantic_error("top level must be an object");
  reject_unknown_keys(j, {"states", "initial", "transitions", "channel", "broadcast", "N"},
                      "model");

  ModelBundle b;

  if (!j.contains("states") || !j["states"].is_array() || j["states"].empty())
    semantic_error("\"states\" must be a non-empty array of names");
  for (const auto& s : j["states"]) {
    if (!s.is_string()) semantic_error("state names must be strings");
    const std::string name = s.get<std::string>();
    if (b.component.state_index(name) >= 0)
      semantic_error("duplicate state name \"" + name + "\"");
    b.component.states.push_back(name);
  }

  if (!j.contains("transitions") || !j["transitions"].is_array())
    semantic_error("\"transitions\" must be an array");
  for (const auto& t : j["transitions"]) {
    if (!t.is_object()) semantic_error("each transition must be an object");
    reject_unknown_keys(t, {"from", "to", "action", "rate"}, "transition");
    if (!t.contains("from") || !t.contains("to") || !t.contains("action") ||
        !t.contains("rate"))
      semantic_error("transition requires from, to, action and rate");
    Transition tr;
    tr.from = b.component.state_index(t["from"].get<std::string>());
    tr.to = b.component.state_index(t["to"].get<std::string>());
    if (tr.from < 0)
      semantic_error("transition references undeclared state \"" +
                     t["from"].get<std::string>() + "\"");
    if (tr.to < 0)
      semantic_error("transition references undeclared state \"" +
                     t["to"].get<std::string>() + "\"");
    tr.action = parse_action(t["action"]);
    const json& r = t["rate"];
    if (r.is_null()) {
      tr.rate = std::nullopt;
    } else if (r.is_number()) {
      tr.rate = r.get<double>();
      if (!(*tr.rate > 0.0) || !std::isfinite(*tr.rate))
        semantic_error("transition rate must be positive and finite");
    } else {
      semantic_error("transition rate must be a number or null");
    }
    // bottom rate <=> receive action
    if (tr.action.type == ActionType::Receive && tr.rate.has_value())
      semantic_error("receive transitions must have null rate (their rate is induced)");
    if (tr.action.type != ActionType::Receive && !tr.rate.has_value())
      semantic_error("only receive transitions may have null rate");
    b.component.transitions.push_back(tr);
  }

  if (b.component.uses_send_receive() && b.component.uses_capture_failure())
    semantic_error("a model cannot mix send/receive with capture/failure actions");

  if (!j.contains("channel")) semantic_error("model requires a \"channel\" object");
  b.channel = parse_channel(j["channel"]);

  if (j.contains("N")) {
    if (!j["N"].is_number_integer() || j["N"].get<long long>() < 1)
      semantic_error("\"N\" must be an integer >= 1");
    b.N = j["N"].get<long long>();
  }

  if (j.contains("broadcast")) {
    const json& bc = j["broadcast"];
    if (!bc.is_object()) semantic_error("\"broadcast\" must be an object");
    reject_unknown_keys(bc, {"p", "interference"}, "broadcast");
    if (!bc.contains("p") || !bc["p"].is_number())
      semantic_error("broadcast requires a numeric \"p\"");
    BroadcastConfig cfg;
    cfg.p = bc["p"].get<double>();
    cfg.N = b.N;
    if (!(cfg.p > 0.0) || cfg.p > 1.0)
      semantic_error("broadcast p must lie in (0, 1]");
    if (bc.contains("interference")) {
      if (!bc["interference"].is_object())
        semantic_error("\"interference\" must map message types to arrays");
      for (const auto& [m, arr] : bc["interference"].items()) {
        if (!arr.is_array()) semantic_error("interference sets must be arrays");
        for (const auto& e : arr) {
          if (!e.is_string()) semantic_error("interference sets contain message names");
          cfg.interference[m].insert(e.get<std::string>());
        }
        if (!cfg.interference[m].count(m))
          semantic_error("interference set for \"" + m + "\" must contain \"" + m + "\"");
      }
    }
    // Message types without an explicit set interfere only with themselves.
    for (const auto& t : b.component.transitions)
      if (t.action.type == ActionType::Send || t.action.type == ActionType::Receive)
        cfg.interference.emplace(t.action.message,
                                 std::set<std::string>{t.action.message});
    b.broadcast = cfg;
  } else if (b.component.uses_send_receive()) {
    semantic_error("models with send/receive actions require a \"broadcast\" object");
  }

  if (!j.contains("initial") || !j["initial"].is_object())
    semantic_error("model requires an \"initial\" occupancy object");
  for (const auto& [name, frac] : j["initial"].items()) {
    if (b.component.state_index(name) < 0)
      semantic_error("initial occupancy references undeclared state \"" + name + "\"");
    if (!frac.is_number()) semantic_error("initial fractions must be numbers");
    b.initial[name] = frac.get<double>();
  }
  initial_occupancy(b.initial, b.component);  // validates the fractions

  return b;
}

ModelBundle parse_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_model(const ModelBundle& b) {
  json j;
  j["states"] = b.component.states;
  j["initial"] = json::object();
  for (const auto& [name, frac] : b.initial) j["initial"][name] = frac;
  j["transitions"] = json::array();
  for (const auto& t : b.component.transitions) {
    json a;
    switch (t.action.type) {
      case ActionType::Capture:  a = {{"kind", "capture"}}; break;
      case ActionType::Failure:  a = {{"kind", "failure"}}; break;
      case ActionType::Send:     a = {{"kind", "send"}, {"message", t.action.message}}; break;
      case ActionType::Receive:  a = {{"kind", "receive"}, {"message", t.action.message}}; break;
      case ActionType::Internal: a = {{"kind", "internal"}, {"name", t.action.name}}; break;
    }
    j["transitions"].push_back({{"from", b.component.states[t.from]},
                                {"to", b.component.states[t.to]},
                                {"action", a},
                                {"rate", t.rate ? json(*t.rate) : json(nullptr)}});
  }
  j["channel"]["beta"] = b.channel.beta;
  j["channel"]["z"] = b.channel.z;
  if (b.channel.spatial == SpatialKind::Uniform)
    j["channel"]["spatial"] = "uniform";
  else
    j["channel"]["spatial"] = {{"lognormal", {{"sigma_d", b.channel.sigma_d}}}};
  if (b.broadcast) {
    j["broadcast"]["p"] = b.broadcast->p;
    for (const auto& [m, set] : b.broadcast->interference)
      j["broadcast"]["interference"][m] = std::vector<std::string>(set.begin(), set.end());
  }
  j["N"] = b.N;
  return j.dump(2);
}

std::vector<double> initial_occupancy(const std::map<std::string, double>& assignments,
                                      const Component& component) {
  std::vector<double> x(component.states.size(), 0.0);
  double sum = 0.0;
  for (const auto& [name, frac] : assignments) {
    const int idx = component.state_index(name);
    if (idx < 0)
      throw ParameterError("initial occupancy references unknown state \"" + name + "\"");
    if (frac < 0.0 || !std::isfinite(frac))
      throw ParameterError("initial occupancy fractions must be >= 0");
    x[static_cast<std::size_t>(idx)] = frac;
    sum += frac;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw ParameterError("invalid initial condition: fractions sum to " +
                         std::to_string(sum) + ", expected 1");
  return x;
}

std::vector<BroadcastDiagnostic> validate_broadcast_restriction(const Component& component) {
  if (!component.uses_send_receive())
    throw ModelError("broadcast restriction check is inapplicable: "
                     "component has no send/receive actions");
  std::vector<BroadcastDiagnostic> diags;
  for (std::size_t s = 0; s < component.states.size(); ++s) {
    std::set<std::string> sends, receives;
    for (const auto& t : component.transitions) {
      if (t.from != static_cast<int>(s)) continue;
      if (t.action.type == ActionType::Send) sends.insert(t.action.message);
      if (t.action.type == ActionType::Receive) receives.insert(t.action.message);
    }
    for (const auto& m : sends)
      if (receives.count(m))
        diags.push_back({component.states[s], m,
                         "state \"" + component.states[s] +
                             "\" can both send and receive message type \"" + m + "\""});
  }
  return diags;
}

}  // namespace mfwsn
