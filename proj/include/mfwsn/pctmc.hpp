#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mfwsn/capture.hpp"
#include "mfwsn/model.hpp"

namespace mfwsn {

// Which argument q receives in broadcast receive rates. The transformation
// recipe applies q to the senders of the received type (SenderCount); the
// worked neighborhood-discovery system applies it to all interfering
// senders (InterferenceTotal). Both are supported; InterferenceTotal is the
// default because it is the plotted, worked example.
enum class QArgConvention { SenderCount, InterferenceTotal };

std::string to_string(QArgConvention c);
QArgConvention q_arg_convention_from_string(const std::string& s);

// One population transition: consumes 1/N of occupancy `from`, produces
// 1/N of occupancy `to`, firing with total intensity rate(x).
struct PctmcTransition {
  std::string label;
  int from = 0;
  int to = 0;
  std::function<double(std::span<const double>)> rate;
  std::string rate_text;  // human-readable total intensity r^(N)
  std::string term_text;  // normalized ODE term magnitude (r^(N)/N)
};

// Normalized population CTMC with n state-counts and system size N.
// Immutable after construction; rate functions are pure.
struct Pctmc {
  std::size_t n = 0;
  long long N = 1;
  std::vector<std::string> state_names;
  std::vector<PctmcTransition> transitions;
  std::vector<double> x0;
  std::string q_description;
};

// Single-receiver transformation: capture/failure pairs share a rate
// constant r; capture fires at r*q(N*x_i), failure at r*(N*x_i - q(N*x_i)),
// internal actions at r_a*N*x_l.
Pctmc transform_single_receiver(const Component& component, long long N,
                                std::shared_ptr<const QFunction> q,
                                std::vector<double> x0);

// Local-broadcast transformation: send(m) fires at N*r*x_i; receive(m) at
// N*r*(C({send(m)})/C(I_m))*q(...)*x_k with q's argument chosen by the
// convention; internal actions at N*r_a*x_m. C over an empty or currently
// unoccupied sender set yields rate exactly 0.
Pctmc transform_broadcast(const Component& component, const BroadcastConfig& config,
                          std::shared_ptr<const QFunction> q, std::vector<double> x0,
                          QArgConvention convention = QArgConvention::InterferenceTotal);

// Applies whichever transformation the bundle's action kinds call for.
// N overrides the bundle's size; when the bundle is a broadcast model its
// neighborhood size d = p*N_file is preserved (p is rescaled to d/N).
Pctmc build_pctmc(const ModelBundle& bundle, long long N,
                  std::shared_ptr<const QFunction> q,
                  QArgConvention convention = QArgConvention::InterferenceTotal);

// Renders "dx_s/dt = ..." lines in the normalized occupancy variables.
std::string render_ode_system(const Pctmc& pctmc);

struct DensityTransitionReport {
  std::string label;
  int from = 0;
  int to = 0;
  double max_rel_dev = 0.0;  // of r^(N)(x)/N across system sizes
};

struct DensityReport {
  std::vector<DensityTransitionReport> transitions;
  double max_rel_dev() const;
  bool passes(double rel_tol) const { return max_rel_dev() < rel_tol; }
};

// Checks density-dependence over the given sizes: the transition structure
// (and hence N*nu) must be identical, and r^(N)(x)/N must agree across N at
// every probe. Structural mismatches throw ModelError.
DensityReport check_density_dependence(const std::function<Pctmc(long long)>& build,
                                       const std::vector<long long>& Ns,
                                       const std::vector<std::vector<double>>& probes);

}  // namespace mfwsn
