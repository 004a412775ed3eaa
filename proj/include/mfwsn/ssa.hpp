#pragma once

#include <cstdint>
#include <vector>

#include "mfwsn/ode.hpp"
#include "mfwsn/pctmc.hpp"

namespace mfwsn {

// Exact jump trajectory of the CTMC underlying a PCTMC. States are stored
// as integer counts (occupancy times N); consecutive states differ by one
// enabled state-change vector.
struct StochasticTrajectory {
  std::vector<double> jump_times;                 // t=0 first
  std::vector<std::vector<std::int64_t>> counts;  // state after each jump
  std::vector<std::size_t> fired;                 // transition index per jump
  long long N = 1;
  std::uint64_t seed = 0;

  // Occupancy (counts/N) at time t, cadlag step interpolation.
  std::vector<double> occupancy_at(double t) const;
  std::vector<double> occupancy(std::size_t k) const;
};

// Derives the RNG seed of replication `index` from a master seed
// (splitmix64), so parallel and serial schedules sample identically.
std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index);

// Exact stochastic simulation from integer counts x0_counts (must sum to N).
// Transitions whose source count is zero are disabled; stops at time T or
// on absorption.
StochasticTrajectory simulate_counts(const Pctmc& pctmc,
                                     std::vector<std::int64_t> x0_counts, double T,
                                     std::uint64_t seed);

// Convenience: rounds a fractional occupancy onto the N-lattice first.
// Throws when x0 is not within 1e-9 of a lattice point.
StochasticTrajectory simulate(const Pctmc& pctmc, const std::vector<double>& x0,
                              double T, std::uint64_t seed);

// Nearest lattice counts for a fractional occupancy (largest remainders).
std::vector<std::int64_t> to_lattice_counts(const std::vector<double>& x0, long long N);

struct ConvergenceEntry {
  long long N = 0;
  double mean_sup_error = 0.0;
  double std_sup_error = 0.0;
  std::vector<double> sup_errors;  // one per replication
};

struct ConvergenceReport {
  std::vector<ConvergenceEntry> entries;
  std::uint64_t seed = 0;
  std::size_t replications = 0;
  double T = 0.0;
  std::size_t grid_points = 0;
};

struct ConvergenceSettings {
  std::size_t grid_points = 1000;
  OdeSettings ode{1e-10, 1e-12, 1000};
  int threads = 0;
};

// For each N: runs seeded replications, measures sup over a shared uniform
// time grid of the max-norm distance to the ODE solution, reports mean/std.
ConvergenceReport convergence_study(const std::function<Pctmc(long long)>& build,
                                    const std::vector<long long>& Ns,
                                    const std::vector<double>& x0, double T,
                                    std::size_t replications, std::uint64_t seed,
                                    const ConvergenceSettings& settings = {});

}  // namespace mfwsn
