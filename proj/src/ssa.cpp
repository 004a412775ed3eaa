#include "mfwsn/ssa.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "mfwsn/errors.hpp"
#include "mfwsn/simplex.hpp"

namespace mfwsn {

namespace {

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa draw in [0, 1); identical across platforms.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<double> StochasticTrajectory::occupancy(std::size_t k) const {
  std::vector<double> x(counts[k].size());
  for (std::size_t j = 0; j < x.size(); ++j)
    x[j] = static_cast<double>(counts[k][j]) / static_cast<double>(N);
  return x;
}

std::vector<double> StochasticTrajectory::occupancy_at(double t) const {
  // Last jump at or before t (cadlag convention).
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  std::size_t k = it == jump_times.begin()
                      ? 0
                      : static_cast<std::size_t>(it - jump_times.begin()) - 1;
  return occupancy(k);
}

std::vector<std::int64_t> to_lattice_counts(const std::vector<double>& x0, long long N) {
  std::vector<std::int64_t> counts(x0.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  long long assigned = 0;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    const double exact = x0[k] * static_cast<double>(N);
    counts[k] = static_cast<std::int64_t>(std::floor(exact + 1e-12));
    assigned += counts[k];
    remainders.push_back({exact - static_cast<double>(counts[k]), k});
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < N && k < remainders.size(); ++k, ++assigned)
    ++counts[remainders[k].second];
  if (assigned != N) throw ParameterError("initial occupancy does not fit the lattice");
  return counts;
}

StochasticTrajectory simulate_counts(const Pctmc& pctmc,
                                     std::vector<std::int64_t> x0_counts, double T,
                                     std::uint64_t seed) {
  if (x0_counts.size() != pctmc.n)
    throw ParameterError("simulate: x0 has wrong dimension");
  std::int64_t total = 0;
  for (auto c : x0_counts) {
    if (c < 0) throw ParameterError("simulate: negative initial count");
    total += c;
  }
  if (total != pctmc.N)
    throw ParameterError("simulate: initial counts must sum to N");
  if (!(T > 0.0)) throw ParameterError("simulate: horizon T must be positive");

  StochasticTrajectory traj;
  traj.N = pctmc.N;
  traj.seed = seed;

  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> counts = std::move(x0_counts);
  std::vector<double> x(pctmc.n), rates(pctmc.transitions.size());
  double t = 0.0;

  traj.jump_times.push_back(0.0);
  traj.counts.push_back(counts);
  traj.fired.push_back(static_cast<std::size_t>(-1));

  while (t < T) {
    for (std::size_t j = 0; j < pctmc.n; ++j)
      x[j] = static_cast<double>(counts[j]) / static_cast<double>(pctmc.N);

    double lambda = 0.0;
    for (std::size_t f = 0; f < pctmc.transitions.size(); ++f) {
      const auto& tr = pctmc.transitions[f];
      // Disabled when consuming from an empty state.
      rates[f] = counts[tr.from] >= 1 ? tr.rate(x) : 0.0;
      if (rates[f] < 0.0 || !std::isfinite(rates[f]))
        throw NumericError("simulate: invalid rate for " + tr.label);
      lambda += rates[f];
    }
    if (lambda <= 0.0) break;  // absorption

    t += -std::log1p(-uniform01(rng)) / lambda;
    if (t >= T) break;

    double pick = uniform01(rng) * lambda;
    std::size_t chosen = pctmc.transitions.size() - 1;
    for (std::size_t f = 0; f < pctmc.transitions.size(); ++f) {
      pick -= rates[f];
      if (pick <= 0.0) {
        chosen = f;
        break;
      }
    }
    --counts[pctmc.transitions[chosen].from];
    ++counts[pctmc.transitions[chosen].to];

    traj.jump_times.push_back(t);
    traj.counts.push_back(counts);
    traj.fired.push_back(chosen);
  }
  return traj;
}

StochasticTrajectory simulate(const Pctmc& pctmc, const std::vector<double>& x0,
                              double T, std::uint64_t seed) {
  if (x0.size() != pctmc.n) throw ParameterError("simulate: x0 has wrong dimension");
  for (double v : x0) {
    const double scaled = v * static_cast<double>(pctmc.N);
    if (std::abs(scaled - std::round(scaled)) > 1e-9)
      throw ParameterError("simulate: x0 entry " + std::to_string(v) +
                           " is not a multiple of 1/N");
  }
  return simulate_counts(pctmc, to_lattice_counts(x0, pctmc.N), T, seed);
}

ConvergenceReport convergence_study(const std::function<Pctmc(long long)>& build,
                                    const std::vector<long long>& Ns,
                                    const std::vector<double>& x0, double T,
                                    std::size_t replications, std::uint64_t seed,
                                    const ConvergenceSettings& settings) {
  if (Ns.empty()) throw ParameterError("convergence study needs at least one N");
  for (std::size_t k = 1; k < Ns.size(); ++k)
    if (Ns[k] <= Ns[k - 1])
      throw ParameterError("convergence study: Ns must be strictly increasing");
  if (replications < 1) throw ParameterError("convergence study: replications >= 1");

  ConvergenceReport report;
  report.seed = seed;
  report.replications = replications;
  report.T = T;
  report.grid_points = settings.grid_points;

  std::vector<double> grid(settings.grid_points);
  for (std::size_t k = 0; k < grid.size(); ++k)
    grid[k] = T * static_cast<double>(k) / static_cast<double>(grid.size() - 1);

  for (std::size_t nk = 0; nk < Ns.size(); ++nk) {
    const long long N = Ns[nk];
    const Pctmc pctmc = build(N);

    OdeSettings ode = settings.ode;
    ode.output_points = std::max(ode.output_points, settings.grid_points);
    const Trajectory reference = integrate(pctmc, x0, T, ode);
    std::vector<std::vector<double>> ref_at(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) ref_at[k] = reference.at(grid[k]);

    ConvergenceEntry entry;
    entry.N = N;
    entry.sup_errors.assign(replications, 0.0);

    // Each replication owns its RNG stream; results merge by index.
    std::exception_ptr error;
    std::mutex error_mu;
    auto run_rep = [&](std::size_t rep) {
      try {
        const std::uint64_t rep_seed =
            derive_stream_seed(seed, nk * 1'000'000 + rep);
        const auto traj =
            simulate_counts(pctmc, to_lattice_counts(x0, N), T, rep_seed);
        double sup = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
          const auto occ = traj.occupancy_at(grid[k]);
          sup = std::max(sup, linf_distance(occ, ref_at[k]));
        }
        entry.sup_errors[rep] = sup;
      } catch (...) {
        std::scoped_lock lock(error_mu);
        if (!error) error = std::current_exception();
      }
    };

    const int threads = settings.threads > 0
                            ? settings.threads
                            : static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || replications == 1) {
      for (std::size_t rep = 0; rep < replications; ++rep) run_rep(rep);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      const int n_threads = std::min<int>(threads, static_cast<int>(replications));
      for (int th = 0; th < n_threads; ++th)
        pool.emplace_back([&] {
          for (std::size_t r = next.fetch_add(1); r < replications;
               r = next.fetch_add(1))
            run_rep(r);
        });
      for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);

    double mean = 0.0;
    for (double e : entry.sup_errors) mean += e;
    mean /= static_cast<double>(replications);
    double var = 0.0;
    for (double e : entry.sup_errors) var += (e - mean) * (e - mean);
    entry.mean_sup_error = mean;
    entry.std_sup_error =
        replications > 1 ? std::sqrt(var / static_cast<double>(replications - 1)) : 0.0;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace mfwsn
