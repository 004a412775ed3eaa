#include "mfwsn/pctmc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "mfwsn/errors.hpp"

namespace mfwsn {

namespace {

double nonneg(double v) { return v > 0.0 ? v : 0.0; }

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string sum_text(const std::vector<std::string>& names, const std::vector<int>& idx) {
  if (idx.empty()) return "0";
  std::ostringstream os;
  if (idx.size() > 1) os << "(";
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k) os << "+";
    os << "x_" << names[idx[k]];
  }
  if (idx.size() > 1) os << ")";
  return os.str();
}

void check_x0(const std::vector<double>& x0, std::size_t n) {
  if (x0.size() != n) throw ParameterError("initial occupancy has wrong dimension");
  double sum = 0.0;
  for (double v : x0) {
    if (v < 0.0) throw ParameterError("initial occupancy entries must be >= 0");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ParameterError("initial occupancy must sum to 1");
}

}  // namespace

std::string to_string(QArgConvention c) {
  return c == QArgConvention::SenderCount ? "sender-count" : "interference-total";
}

QArgConvention q_arg_convention_from_string(const std::string& s) {
  if (s == "sender-count") return QArgConvention::SenderCount;
  if (s == "interference-total") return QArgConvention::InterferenceTotal;
  throw ParameterError("unknown q-argument convention \"" + s +
                       "\" (expected sender-count or interference-total)");
}

Pctmc transform_single_receiver(const Component& component, long long N,
                                std::shared_ptr<const QFunction> q,
                                std::vector<double> x0) {
  if (N < 1) throw ParameterError("system size N must be >= 1");
  if (component.uses_send_receive())
    throw ModelError("single-receiver transformation does not accept send/receive actions");
  check_x0(x0, component.states.size());

  // Every sending state needs exactly one capture and one failure edge
  // sharing a rate constant.
  std::map<int, std::vector<const Transition*>> captures, failures;
  for (const auto& t : component.transitions) {
    if (t.action.type == ActionType::Capture) captures[t.from].push_back(&t);
    if (t.action.type == ActionType::Failure) failures[t.from].push_back(&t);
  }
  for (const auto& [s, list] : captures) {
    if (list.size() != 1 || !failures.count(s) || failures[s].size() != 1)
      throw ModelError("state \"" + component.states[s] +
                       "\" must have exactly one capture and one failure transition");
    if (*list[0]->rate != *failures[s][0]->rate)
      throw ModelError("capture and failure rates differ in state \"" +
                       component.states[s] + "\"");
  }
  for (const auto& [s, list] : failures)
    if (!captures.count(s))
      throw ModelError("state \"" + component.states[s] +
                       "\" has a failure transition without a capture partner");

  Pctmc p;
  p.n = component.states.size();
  p.N = N;
  p.state_names = component.states;
  p.x0 = std::move(x0);
  p.q_description = q->describe();
  const double Nd = static_cast<double>(N);

  for (const auto& t : component.transitions) {
    if (t.from == t.to) continue;  // zero state-change
    PctmcTransition f;
    f.from = t.from;
    f.to = t.to;
    f.label = t.action.label();
    const int i = t.from;
    const double r = *t.rate;
    const std::string xi = "x_" + component.states[i];
    switch (t.action.type) {
      case ActionType::Capture:
        f.rate = [r, i, Nd, q](std::span<const double> x) {
          return r * (*q)(Nd * nonneg(x[i]));
        };
        f.rate_text = num(r) + "*q(N*" + xi + ")";
        f.term_text = "(1/N)*" + num(r) + "*q(N*" + xi + ")";
        break;
      case ActionType::Failure:
        f.rate = [r, i, Nd, q](std::span<const double> x) {
          const double load = Nd * nonneg(x[i]);
          return nonneg(r * (load - (*q)(load)));
        };
        f.rate_text = num(r) + "*(N*" + xi + " - q(N*" + xi + "))";
        f.term_text = num(r) + "*(" + xi + " - q(N*" + xi + ")/N)";
        break;
      case ActionType::Internal:
        f.rate = [r, i, Nd](std::span<const double> x) { return r * Nd * nonneg(x[i]); };
        f.rate_text = num(r) + "*N*" + xi;
        f.term_text = num(r) + "*" + xi;
        break;
      default:
        throw ModelError("unexpected action kind in single-receiver model");
    }
    p.transitions.push_back(std::move(f));
  }
  return p;
}

Pctmc transform_broadcast(const Component& component, const BroadcastConfig& config,
                          std::shared_ptr<const QFunction> q, std::vector<double> x0,
                          QArgConvention convention) {
  if (config.N < 1) throw ParameterError("system size N must be >= 1");
  if (!(config.p > 0.0) || config.p > 1.0)
    throw ParameterError("broadcast p must lie in (0, 1]");
  if (component.uses_capture_failure())
    throw ModelError("broadcast transformation does not accept capture/failure actions");
  check_x0(x0, component.states.size());

  const auto diags = validate_broadcast_restriction(component);
  if (!diags.empty()) throw ModelError("broadcast restriction violated: " + diags[0].text);
  for (const auto& [m, set] : config.interference)
    if (!set.count(m))
      throw ParameterError("interference set for \"" + m + "\" must contain itself");

  // Sender states and the shared send rate per message type.
  std::map<std::string, std::vector<int>> sender_states;
  std::map<std::string, double> send_rate;
  for (const auto& t : component.transitions) {
    if (t.action.type != ActionType::Send) continue;
    auto& states = sender_states[t.action.message];
    if (!std::count(states.begin(), states.end(), t.from)) states.push_back(t.from);
    auto [it, fresh] = send_rate.emplace(t.action.message, *t.rate);
    if (!fresh && it->second != *t.rate)
      throw ModelError("send(" + t.action.message +
                       ") transitions must share one rate constant");
  }
  for (auto& [m, states] : sender_states) std::sort(states.begin(), states.end());
  for (const auto& t : component.transitions)
    if (t.action.type == ActionType::Receive && !sender_states.count(t.action.message))
      throw ModelError("receive(" + t.action.message + ") has no matching sender");

  Pctmc p;
  p.n = component.states.size();
  p.N = config.N;
  p.state_names = component.states;
  p.x0 = std::move(x0);
  p.q_description = q->describe();
  const double Nd = static_cast<double>(config.N);
  const double d = config.p * Nd;

  auto interferers = [&](const std::string& m) {
    std::vector<int> states;
    auto it = config.interference.find(m);
    const std::set<std::string> self{m};
    const auto& set = it != config.interference.end() ? it->second : self;
    for (const auto& other : set) {
      auto st = sender_states.find(other);
      if (st == sender_states.end()) continue;
      for (int s : st->second)
        if (!std::count(states.begin(), states.end(), s)) states.push_back(s);
    }
    std::sort(states.begin(), states.end());
    return states;
  };

  for (const auto& t : component.transitions) {
    if (t.from == t.to) continue;  // zero state-change
    PctmcTransition f;
    f.from = t.from;
    f.to = t.to;
    f.label = t.action.label();
    const int k = t.from;
    const std::string xk = "x_" + component.states[k];
    switch (t.action.type) {
      case ActionType::Send: {
        const double r = *t.rate;
        f.rate = [r, k, Nd](std::span<const double> x) { return Nd * r * nonneg(x[k]); };
        f.rate_text = "N*" + num(r) + "*" + xk;
        f.term_text = num(r) + "*" + xk;
        break;
      }
      case ActionType::Receive: {
        const double r = send_rate.at(t.action.message);
        const std::vector<int> senders = sender_states.at(t.action.message);
        const std::vector<int> total = interferers(t.action.message);
        const bool arg_is_total = convention == QArgConvention::InterferenceTotal;
        f.rate = [r, k, Nd, d, q, senders, total,
                  arg_is_total](std::span<const double> x) {
          double c_send = 0.0;
          for (int s : senders) c_send += nonneg(x[s]);
          if (c_send <= 0.0) return 0.0;  // no senders, no receptions
          double c_total = 0.0;
          for (int s : total) c_total += nonneg(x[s]);
          const double arg = d * (arg_is_total ? c_total : c_send);
          return Nd * r * (c_send / c_total) * (*q)(arg) * nonneg(x[k]);
        };
        const std::string cs = sum_text(component.states, senders);
        const std::string ct = sum_text(component.states, total);
        const std::string arg = num(d) + "*" + (arg_is_total ? ct : cs);
        f.rate_text = "N*" + num(r) + "*(" + cs + "/" + ct + ")*q(" + arg + ")*" + xk;
        f.term_text = num(r) + "*(" + cs + "/" + ct + ")*q(" + arg + ")*" + xk;
        break;
      }
      case ActionType::Internal: {
        const double r = *t.rate;
        f.rate = [r, k, Nd](std::span<const double> x) { return Nd * r * nonneg(x[k]); };
        f.rate_text = "N*" + num(r) + "*" + xk;
        f.term_text = num(r) + "*" + xk;
        break;
      }
      default:
        throw ModelError("unexpected action kind in broadcast model");
    }
    p.transitions.push_back(std::move(f));
  }
  return p;
}

Pctmc build_pctmc(const ModelBundle& bundle, long long N,
                  std::shared_ptr<const QFunction> q, QArgConvention convention) {
  const auto x0 = initial_occupancy(bundle.initial, bundle.component);
  if (bundle.component.uses_send_receive()) {
    if (!bundle.broadcast) throw ModelError("broadcast model lacks its broadcast config");
    BroadcastConfig cfg = *bundle.broadcast;
    if (N != bundle.N) {
      // Keep the neighborhood size d fixed when rescaling the system.
      const double d = cfg.p * static_cast<double>(bundle.N);
      cfg.p = d / static_cast<double>(N);
      if (cfg.p > 1.0)
        throw ParameterError("N override makes p = d/N exceed 1; pick a larger N");
    }
    cfg.N = N;
    return transform_broadcast(bundle.component, cfg, std::move(q), x0, convention);
  }
  return transform_single_receiver(bundle.component, N, std::move(q), x0);
}

std::string render_ode_system(const Pctmc& p) {
  std::ostringstream os;
  for (std::size_t s = 0; s < p.n; ++s) {
    os << "dx_" << p.state_names[s] << "/dt =";
    bool first = true;
    for (const auto& t : p.transitions) {
      if (t.from == static_cast<int>(s)) {
        os << (first ? " -" : " - ") << t.term_text;
        first = false;
      }
      if (t.to == static_cast<int>(s)) {
        os << (first ? " " : " + ") << t.term_text;
        first = false;
      }
    }
    if (first) os << " 0";
    os << "\n";
  }
  return os.str();
}

double DensityReport::max_rel_dev() const {
  double worst = 0.0;
  for (const auto& t : transitions) worst = std::max(worst, t.max_rel_dev);
  return worst;
}

DensityReport check_density_dependence(const std::function<Pctmc(long long)>& build,
                                       const std::vector<long long>& Ns,
                                       const std::vector<std::vector<double>>& probes) {
  if (Ns.size() < 2) throw ParameterError("density check needs at least two sizes");
  std::vector<Pctmc> models;
  models.reserve(Ns.size());
  for (long long N : Ns) models.push_back(build(N));

  const auto& ref = models.front();
  for (const auto& m : models) {
    if (m.transitions.size() != ref.transitions.size())
      throw ModelError("transition sets differ across system sizes");
    for (std::size_t k = 0; k < m.transitions.size(); ++k) {
      const auto& a = ref.transitions[k];
      const auto& b = m.transitions[k];
      // Matching labels and unit vectors make N*nu identical by construction.
      if (a.label != b.label || a.from != b.from || a.to != b.to)
        throw ModelError("transition " + std::to_string(k) +
                         " differs across system sizes (" + a.label + " vs " + b.label + ")");
    }
  }

  DensityReport report;
  for (std::size_t k = 0; k < ref.transitions.size(); ++k) {
    DensityTransitionReport tr;
    tr.label = ref.transitions[k].label;
    tr.from = ref.transitions[k].from;
    tr.to = ref.transitions[k].to;
    for (const auto& x : probes) {
      if (x.size() != ref.n) throw ParameterError("probe has wrong dimension");
      double lo = 0.0, hi = 0.0;
      bool first = true;
      for (const auto& m : models) {
        const double g = m.transitions[k].rate(x) / static_cast<double>(m.N);
        if (first) {
          lo = hi = g;
          first = false;
        } else {
          lo = std::min(lo, g);
          hi = std::max(hi, g);
        }
      }
      const double scale = std::max(std::abs(hi), std::abs(lo));
      if (scale > 0.0) tr.max_rel_dev = std::max(tr.max_rel_dev, (hi - lo) / scale);
    }
    report.transitions.push_back(tr);
  }
  return report;
}

}  // namespace mfwsn
