// Command-line front-end: parse model -> transform -> analyze -> emit
// plot-ready CSV/JSON. Exit codes: 0 success, 2 configuration or model
// error, 3 numeric failure.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mfwsn/capture.hpp"
#include "mfwsn/errors.hpp"
#include "mfwsn/model.hpp"
#include "mfwsn/ode.hpp"
#include "mfwsn/pctmc.hpp"
#include "mfwsn/simplex.hpp"
#include "mfwsn/ssa.hpp"

using nlohmann::json;
using namespace mfwsn;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "unreadable";
  std::ostringstream ss;
  ss << in.rdbuf();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(ss.str())));
  return buf;
}

// Writes CSV to --out (or stdout) and a manifest sidecar next to the file.
struct OutputSink {
  std::string out_path;
  json manifest;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();

  void write(const std::string& csv) {
    if (out_path.empty()) {
      std::cout << csv;
      return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw ParameterError("cannot write output file: " + out_path);
    f << csv;
    write_manifest();
  }
  void write_manifest() {
    if (out_path.empty()) return;
    manifest["tool_version"] = MFWSN_VERSION;
    manifest["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest["written_at_unix"] =
        std::chrono::duration_cast<std::chrono::seconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    std::ofstream f(out_path + ".manifest.json", std::ios::binary);
    f << manifest.dump(2) << "\n";
  }
};

struct ModelArgs {
  std::string path;
  long long N = 0;  // 0: use the model file's N
  std::string convention = "interference-total";
  bool use_qtable = false;
  std::size_t qtable_points = 512;

  ModelBundle bundle;
  std::shared_ptr<const QFunction> q;

  void add_to(CLI::App* cmd, bool with_transform_opts = true) {
    cmd->add_option("model", path, "model file (JSON)")->required();
    cmd->add_option("--N", N, "system size override");
    if (with_transform_opts) {
      cmd->add_option("--convention", convention,
                      "q argument rule for broadcast receive rates")
          ->check(CLI::IsMember({"sender-count", "interference-total"}));
      cmd->add_flag("--use-qtable", use_qtable,
                    "evaluate q through a precomputed table instead of "
                    "direct quadrature");
      cmd->add_option("--qtable-points", qtable_points, "table resolution");
    }
  }

  long long system_size() const { return N > 0 ? N : bundle.N; }

  void load(json& manifest) {
    bundle = parse_model_file(path);
    const long long n = system_size();
    if (use_qtable) {
      const double i_max = static_cast<double>(n) *
                           (bundle.broadcast ? bundle.broadcast->p : 1.0);
      auto table = std::make_shared<QTable>(bundle.channel,
                                            std::max(2.0, i_max) * 1.05, qtable_points);
      manifest["q_table"] = {{"i_max", table->grid().back()},
                             {"points", table->grid().size()},
                             {"interp_error_bound", table->interp_error_bound()},
                             {"rule", QTable::interpolation_rule}};
      q = std::move(table);
    } else {
      q = CaptureEvaluator::shared(bundle.channel);
    }
    manifest["model"] = path;
    manifest["model_hash"] = file_hash(path);
    manifest["N"] = n;
    manifest["convention"] = convention;
    manifest["q_evaluator"] = q->describe();
    if (bundle.channel.spatial == SpatialKind::LogNormal)
      manifest["quadrature_truncation_r_max"] = bundle.channel.r_max();
  }

  Pctmc pctmc() {
    return build_pctmc(bundle, system_size(), q,
                       q_arg_convention_from_string(convention));
  }
};

std::map<std::string, double> parse_x0_spec(const std::string& spec) {
  std::map<std::string, double> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ParameterError("bad --x0 entry \"" + item + "\" (expected state=fraction)");
    out[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
  }
  if (out.empty()) throw ParameterError("--x0 must name at least one state");
  return out;
}

std::vector<double> resolve_x0(const ModelArgs& m, const std::string& x0_spec) {
  if (x0_spec.empty()) return initial_occupancy(m.bundle.initial, m.bundle.component);
  return initial_occupancy(parse_x0_spec(x0_spec), m.bundle.component);
}

std::pair<int, int> resolve_axes(const Component& c, const std::string& axes) {
  const auto comma = axes.find(',');
  if (comma == std::string::npos)
    throw ParameterError("--axes expects two state names, e.g. O,R");
  const int i = c.state_index(axes.substr(0, comma));
  const int j = c.state_index(axes.substr(comma + 1));
  if (i < 0 || j < 0 || i == j)
    throw ParameterError("--axes must name two distinct declared states");
  return {i, j};
}

std::string trajectory_csv(const Pctmc& p, const Trajectory& t) {
  std::ostringstream os;
  os << "t";
  for (const auto& s : p.state_names) os << ",x_" << s;
  os << "\n";
  for (std::size_t k = 0; k < t.times.size(); ++k) {
    os << fmt(t.times[k]);
    for (double v : t.points[k]) os << "," << fmt(v);
    os << "\n";
  }
  return os.str();
}

json fixpoint_json(const Pctmc& p, const Fixpoint& fp) {
  json loc = json::object();
  for (std::size_t k = 0; k < p.n; ++k) loc["x_" + p.state_names[k]] = fp.location[k];
  return {{"location", loc}, {"residual", fp.residual}};
}

std::vector<Fixpoint> seed_fixpoints(const Pctmc& p,
                                     const std::vector<std::string>& x0_specs,
                                     const ModelArgs& m, double tol, double settle_T) {
  FixpointSettings fs;
  fs.tol = tol;
  fs.settle_T = settle_T;
  std::vector<std::vector<double>> seeds;
  if (x0_specs.empty()) {
    for (std::size_t s = 0; s < p.n; ++s) {
      std::vector<double> e(p.n, 0.0);
      e[s] = 1.0;
      seeds.push_back(std::move(e));
    }
  } else {
    for (const auto& spec : x0_specs) seeds.push_back(resolve_x0(m, spec));
  }
  std::vector<Fixpoint> fps;
  for (auto& seed : seeds) {
    Fixpoint fp = find_fixpoint(p, std::move(seed), fs);
    bool fresh = true;
    for (const auto& known : fps)
      if (linf_distance(known.location, fp.location) < 1e-6) fresh = false;
    if (fresh) fps.push_back(std::move(fp));
  }
  return fps;
}

int run(int argc, char** argv) {
  CLI::App app{"mean-field analysis of wireless protocol population models"};
  app.require_subcommand(1);

  // ---- q-curve ----------------------------------------------------------
  auto* q_curve = app.add_subcommand("q-curve", "emit the capture probability curve");
  struct {
    std::string model, spatial = "uniform", out;
    double beta = 4.0, z = 10.0, sigma_d = 2.0, i_max = 10.0;
    std::size_t n_points = 200;
  } qc;
  q_curve->add_option("--model", qc.model, "take the channel from a model file");
  q_curve->add_option("--beta", qc.beta, "pathloss exponent");
  q_curve->add_option("--z", qc.z, "capture power threshold");
  q_curve->add_option("--spatial", qc.spatial, "spatial distribution")
      ->check(CLI::IsMember({"uniform", "lognormal"}));
  q_curve->add_option("--sigma-d", qc.sigma_d, "log-normal spatial std dev");
  q_curve->add_option("--i-max", qc.i_max, "largest i to sample");
  q_curve->add_option("--n-points", qc.n_points, "number of samples");
  q_curve->add_option("--out", qc.out, "output CSV path");

  // ---- transform --------------------------------------------------------
  auto* transform = app.add_subcommand("transform", "print the generated ODE system");
  ModelArgs tr_args;
  std::string tr_out;
  tr_args.add_to(transform);
  transform->add_option("--out", tr_out, "machine-readable JSON listing path");

  // ---- integrate --------------------------------------------------------
  auto* integrate_cmd = app.add_subcommand("integrate", "integrate the mean-field ODEs");
  ModelArgs in_args;
  struct {
    std::string x0, out;
    double T = 2000.0, tol = 1e-8;
    std::size_t points = 1000;
  } in;
  in_args.add_to(integrate_cmd);
  integrate_cmd->add_option("--x0", in.x0, "initial occupancy, e.g. O=1 or O=0.5,T=0.5");
  integrate_cmd->add_option("--T", in.T, "horizon in timeslots");
  integrate_cmd->add_option("--tol", in.tol, "relative step tolerance");
  integrate_cmd->add_option("--points", in.points, "output samples");
  integrate_cmd->add_option("--out", in.out, "output CSV path");

  // ---- fixpoints --------------------------------------------------------
  auto* fixpoints_cmd = app.add_subcommand("fixpoints", "locate equilibria");
  ModelArgs fp_args;
  struct {
    std::vector<std::string> x0;
    std::string out;
    double tol = 1e-10, T = 5000.0;
  } fp;
  fp_args.add_to(fixpoints_cmd);
  fixpoints_cmd->add_option("--x0", fp.x0,
                            "seed initial condition (repeatable; default: each "
                            "pure state)");
  fixpoints_cmd->add_option("--tol", fp.tol, "residual tolerance");
  fixpoints_cmd->add_option("--T", fp.T, "settling horizon before refinement");
  fixpoints_cmd->add_option("--out", fp.out, "output JSON path");

  // ---- basin ------------------------------------------------------------
  auto* basin_cmd = app.add_subcommand("basin", "classify basins of attraction on a grid");
  ModelArgs ba_args;
  struct {
    std::string axes = "O,R", closure, out;
    std::vector<std::string> x0;
    std::size_t resolution = 50;
    double t_max = 5000.0, match_radius = 0.05, tol = 1e-10;
    unsigned long long seed = 0;
    int threads = 0;
  } ba;
  ba_args.add_to(basin_cmd);
  basin_cmd->add_option("--axes", ba.axes, "two state names, e.g. O,R");
  basin_cmd->add_option("--resolution", ba.resolution, "cells per axis");
  basin_cmd->add_option("--closure", ba.closure,
                        "remainder=<state> (default: the unlisted state when "
                        "unique) or random=<k>");
  basin_cmd->add_option("--x0", ba.x0, "fixpoint seed (repeatable)");
  basin_cmd->add_option("--T-max", ba.t_max, "classification horizon");
  basin_cmd->add_option("--match-radius", ba.match_radius, "L-inf fixpoint match radius");
  basin_cmd->add_option("--seed", ba.seed, "seed for random completions");
  basin_cmd->add_option("--threads", ba.threads, "worker threads (0 = all cores)");
  basin_cmd->add_option("--out", ba.out, "output CSV path");

  // ---- vector-field -----------------------------------------------------
  auto* vf_cmd = app.add_subcommand("vector-field", "export raw derivatives on a grid");
  ModelArgs vf_args;
  struct {
    std::string axes = "O,R", closure, out;
    std::size_t resolution = 20;
  } vf;
  vf_args.add_to(vf_cmd);
  vf_cmd->add_option("--axes", vf.axes, "two state names");
  vf_cmd->add_option("--resolution", vf.resolution, "cells per axis");
  vf_cmd->add_option("--closure", vf.closure, "remainder=<state> or equal split");
  vf_cmd->add_option("--out", vf.out, "output CSV path");

  // ---- simulate ---------------------------------------------------------
  auto* simulate_cmd = app.add_subcommand("simulate", "exact stochastic simulation");
  ModelArgs si_args;
  struct {
    std::string x0, out;
    double T = 200.0;
    unsigned long long seed = 1;
  } si;
  si_args.add_to(simulate_cmd);
  simulate_cmd->add_option("--x0", si.x0, "initial occupancy (lattice point)");
  simulate_cmd->add_option("--T", si.T, "horizon in timeslots");
  simulate_cmd->add_option("--seed", si.seed, "RNG seed");
  simulate_cmd->add_option("--out", si.out, "output CSV path");

  // ---- compare ----------------------------------------------------------
  auto* compare_cmd =
      app.add_subcommand("compare", "SSA vs ODE sup-norm error across system sizes");
  ModelArgs co_args;
  struct {
    std::string ns = "50,500,5000", x0, out;
    double T = 200.0;
    std::size_t replications = 20, grid_points = 1000;
    unsigned long long seed = 7;
    int threads = 0;
  } co;
  co_args.add_to(compare_cmd);
  compare_cmd->add_option("--Ns", co.ns, "comma-separated system sizes");
  compare_cmd->add_option("--x0", co.x0, "initial occupancy");
  compare_cmd->add_option("--T", co.T, "horizon");
  compare_cmd->add_option("--replications", co.replications, "replications per N");
  compare_cmd->add_option("--grid-points", co.grid_points, "comparison grid size");
  compare_cmd->add_option("--seed", co.seed, "master seed");
  compare_cmd->add_option("--threads", co.threads, "worker threads");
  compare_cmd->add_option("--out", co.out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage errors are configuration errors
  }

  if (*q_curve) {
    if (qc.n_points == 0) throw ParameterError("--n-points must be >= 1");
    ChannelModel channel =
        qc.spatial == "uniform" ? ChannelModel::uniform(qc.beta, qc.z)
                                : ChannelModel::log_normal(qc.beta, qc.z, qc.sigma_d);
    if (!qc.model.empty()) channel = parse_model_file(qc.model).channel;
    auto ev = CaptureEvaluator::shared(channel);
    OutputSink sink;
    sink.out_path = qc.out;
    sink.manifest = {{"subcommand", "q-curve"},
                     {"channel", channel.describe()},
                     {"i_max", qc.i_max},
                     {"n_points", qc.n_points}};
    if (channel.spatial == SpatialKind::LogNormal)
      sink.manifest["quadrature_truncation_r_max"] = channel.r_max();
    std::ostringstream os;
    os << "i,q\n";
    for (std::size_t k = 0; k < qc.n_points; ++k) {
      const double i = qc.n_points == 1
                           ? 0.0
                           : qc.i_max * static_cast<double>(k) /
                                 static_cast<double>(qc.n_points - 1);
      os << fmt(i) << "," << fmt((*ev)(i)) << "\n";
    }
    sink.write(os.str());
    return 0;
  }

  if (*transform) {
    OutputSink sink;
    sink.out_path = tr_out;
    sink.manifest["subcommand"] = "transform";
    tr_args.load(sink.manifest);
    const Pctmc p = tr_args.pctmc();
    std::cout << render_ode_system(p);
    if (!tr_out.empty()) {
      json listing = json::array();
      for (const auto& t : p.transitions) {
        json nu = json::object();
        nu[p.state_names[t.from]] = -1;
        nu[p.state_names[t.to]] = +1;
        listing.push_back({{"label", t.label},
                           {"from", p.state_names[t.from]},
                           {"to", p.state_names[t.to]},
                           {"nu_times_N", nu},
                           {"rate", t.rate_text}});
      }
      json doc = {{"N", p.N},
                  {"states", p.state_names},
                  {"transitions", listing},
                  {"ode", render_ode_system(p)}};
      sink.write(doc.dump(2) + "\n");
    }
    return 0;
  }

  if (*integrate_cmd) {
    OutputSink sink;
    sink.out_path = in.out;
    sink.manifest["subcommand"] = "integrate";
    in_args.load(sink.manifest);
    sink.manifest["T"] = in.T;
    sink.manifest["rel_tol"] = in.tol;
    const Pctmc p = in_args.pctmc();
    OdeSettings settings;
    settings.rel_tol = in.tol;
    settings.abs_tol = in.tol * 1e-2;
    settings.output_points = in.points;
    const Trajectory t = integrate(p, resolve_x0(in_args, in.x0), in.T, settings);
    sink.manifest["max_clipped_defect"] = t.max_clipped_defect;
    sink.manifest["solver"] = t.solver_info;
    sink.write(trajectory_csv(p, t));
    return 0;
  }

  if (*fixpoints_cmd) {
    OutputSink sink;
    sink.out_path = fp.out;
    sink.manifest["subcommand"] = "fixpoints";
    fp_args.load(sink.manifest);
    sink.manifest["tol"] = fp.tol;
    const Pctmc p = fp_args.pctmc();
    const auto fps = seed_fixpoints(p, fp.x0, fp_args, fp.tol, fp.T);
    json doc = json::array();
    for (const auto& f : fps) doc.push_back(fixpoint_json(p, f));
    sink.write(json{{"fixpoints", doc}}.dump(2) + "\n");
    return 0;
  }

  if (*basin_cmd) {
    OutputSink sink;
    sink.out_path = ba.out;
    sink.manifest["subcommand"] = "basin";
    ba_args.load(sink.manifest);
    const Pctmc p = ba_args.pctmc();
    const auto [ai, aj] = resolve_axes(ba_args.bundle.component, ba.axes);

    BasinClosure closure;
    closure.seed = ba.seed;
    if (ba.closure.rfind("remainder=", 0) == 0) {
      const int s = ba_args.bundle.component.state_index(ba.closure.substr(10));
      if (s < 0) throw ParameterError("unknown remainder state in --closure");
      closure.remainder_state = s;
    } else if (ba.closure.rfind("random=", 0) == 0) {
      closure.random_completions = std::stoi(ba.closure.substr(7));
      if (closure.random_completions < 1)
        throw ParameterError("--closure random=<k> needs k >= 1");
    } else if (ba.closure.empty()) {
      if (p.n == 3) {
        // The single unlisted state absorbs the remainder.
        for (int s = 0; s < 3; ++s)
          if (s != ai && s != aj) closure.remainder_state = s;
      } else {
        closure.random_completions = 16;
      }
    } else {
      throw ParameterError("--closure expects remainder=<state> or random=<k>");
    }

    const auto fps = seed_fixpoints(p, ba.x0, ba_args, ba.tol, ba.t_max);
    if (fps.size() < 2)
      std::cerr << "warning: only " << fps.size()
                << " distinct fixpoint(s) found from the seeds\n";
    BasinSettings bs;
    bs.match_radius = ba.match_radius;
    bs.t_max = ba.t_max;
    bs.threads = ba.threads;
    const BasinGrid grid = basin_grid(p, ai, aj, ba.resolution, closure, fps, bs);

    sink.manifest["axes"] = ba.axes;
    sink.manifest["resolution"] = ba.resolution;
    sink.manifest["match_radius"] = ba.match_radius;
    sink.manifest["seed"] = ba.seed;
    json fpj = json::array();
    for (const auto& f : fps) fpj.push_back(fixpoint_json(p, f));
    sink.manifest["fixpoints"] = fpj;

    std::ostringstream os;
    os << "x_" << p.state_names[ai] << ",x_" << p.state_names[aj] << ",fixpoint_index";
    const bool with_fractions = !closure.remainder_state.has_value();
    if (with_fractions)
      for (std::size_t f = 0; f < fps.size(); ++f) os << ",fraction_" << f;
    os << "\n";
    for (const auto& c : grid.cells) {
      os << fmt(c.a) << "," << fmt(c.b) << "," << c.label;
      if (with_fractions)
        for (std::size_t f = 0; f < fps.size(); ++f)
          os << "," << fmt(f < c.fractions.size() ? c.fractions[f] : 0.0);
      os << "\n";
    }
    sink.write(os.str());
    return 0;
  }

  if (*vf_cmd) {
    OutputSink sink;
    sink.out_path = vf.out;
    sink.manifest["subcommand"] = "vector-field";
    vf_args.load(sink.manifest);
    const Pctmc p = vf_args.pctmc();
    const auto [ai, aj] = resolve_axes(vf_args.bundle.component, vf.axes);
    BasinClosure closure;
    if (vf.closure.rfind("remainder=", 0) == 0) {
      const int s = vf_args.bundle.component.state_index(vf.closure.substr(10));
      if (s < 0) throw ParameterError("unknown remainder state in --closure");
      closure.remainder_state = s;
    } else if (!vf.closure.empty()) {
      throw ParameterError("--closure expects remainder=<state>");
    } else if (p.n == 3) {
      for (int s = 0; s < 3; ++s)
        if (s != ai && s != aj) closure.remainder_state = s;
    }
    const auto samples = export_vector_field_grid(p, ai, aj, vf.resolution, closure);
    std::ostringstream os;
    os << "x_" << p.state_names[ai] << ",x_" << p.state_names[aj];
    for (const auto& s : p.state_names) os << ",d_" << s;
    os << "\n";
    for (const auto& s : samples) {
      os << fmt(s.a) << "," << fmt(s.b);
      for (double v : s.derivative) os << "," << fmt(v);
      os << "\n";
    }
    sink.manifest["axes"] = vf.axes;
    sink.manifest["resolution"] = vf.resolution;
    sink.write(os.str());
    return 0;
  }

  if (*simulate_cmd) {
    OutputSink sink;
    sink.out_path = si.out;
    sink.manifest["subcommand"] = "simulate";
    si_args.load(sink.manifest);
    sink.manifest["T"] = si.T;
    sink.manifest["seed"] = si.seed;
    const Pctmc p = si_args.pctmc();
    const auto t = simulate(p, resolve_x0(si_args, si.x0), si.T, si.seed);
    std::ostringstream os;
    os << "t";
    for (const auto& s : p.state_names) os << ",x_" << s;
    os << "\n";
    for (std::size_t k = 0; k < t.jump_times.size(); ++k) {
      os << fmt(t.jump_times[k]);
      for (double v : t.occupancy(k)) os << "," << fmt(v);
      os << "\n";
    }
    sink.manifest["jumps"] = t.jump_times.size() - 1;
    sink.write(os.str());
    return 0;
  }

  if (*compare_cmd) {
    OutputSink sink;
    sink.out_path = co.out;
    sink.manifest["subcommand"] = "compare";
    co_args.load(sink.manifest);
    std::vector<long long> Ns;
    {
      std::stringstream ss(co.ns);
      std::string item;
      while (std::getline(ss, item, ',')) Ns.push_back(std::stoll(item));
    }
    const auto x0 = resolve_x0(co_args, co.x0);
    auto build = [&](long long N) {
      return build_pctmc(co_args.bundle, N, co_args.q,
                         q_arg_convention_from_string(co_args.convention));
    };
    ConvergenceSettings cs;
    cs.grid_points = co.grid_points;
    cs.threads = co.threads;
    const auto report =
        convergence_study(build, Ns, x0, co.T, co.replications, co.seed, cs);

    sink.manifest["T"] = co.T;
    sink.manifest["replications"] = co.replications;
    sink.manifest["master_seed"] = co.seed;
    sink.manifest["grid_points"] = co.grid_points;
    json seeds = json::array();
    for (std::size_t nk = 0; nk < Ns.size(); ++nk)
      for (std::size_t rep = 0; rep < co.replications; ++rep)
        seeds.push_back(derive_stream_seed(co.seed, nk * 1'000'000 + rep));
    sink.manifest["replication_seeds"] = seeds;

    std::ostringstream os;
    os << "N,mean_sup_error,std_sup_error\n";
    for (const auto& e : report.entries)
      os << e.N << "," << fmt(e.mean_sup_error) << "," << fmt(e.std_sup_error) << "\n";
    sink.write(os.str());
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
