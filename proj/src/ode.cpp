#include "mfwsn/ode.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <sstream>
#include <thread>

#include "mfwsn/errors.hpp"
#include "mfwsn/simplex.hpp"

namespace mfwsn {

namespace {

using Vec = std::vector<double>;

// Dormand-Prince 5(4) tableau.
constexpr double kA[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
constexpr double kC[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
// 5th-order weights equal kA[6]; embedded 4th-order weights:
constexpr double kB4[7] = {5179.0 / 57600,  0.0,         7571.0 / 16695, 393.0 / 640,
                           -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

void eval_field(const Pctmc& p, const Vec& x, Vec& out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& t : p.transitions) {
    const double w = t.rate(x) / static_cast<double>(p.N);
    out[t.from] -= w;
    out[t.to] += w;
  }
}

int thread_count(int requested, std::size_t jobs) {
  int n = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  return static_cast<int>(std::min<std::size_t>(n, jobs));
}

// Runs fn(index) for every index in [0, jobs); each index owns its output.
void parallel_for(std::size_t jobs, int threads, const std::function<void(std::size_t)>& fn) {
  const int n = thread_count(threads, jobs);
  if (n <= 1) {
    for (std::size_t k = 0; k < jobs; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (int t = 0; t < n; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next.fetch_add(1); k < jobs; k = next.fetch_add(1)) {
        try {
          fn(k);
        } catch (...) {
          std::scoped_lock lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Gaussian elimination with partial pivoting; A is row-major n x n.
Vec solve_linear(std::vector<Vec> A, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    if (std::abs(A[piv][col]) < 1e-300)
      throw NumericError("fixpoint refinement: singular Jacobian");
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  Vec x(n);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
    x[r] = s / A[r][r];
  }
  return x;
}

double max_norm(const Vec& v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

}  // namespace

std::vector<double> vector_field(const Pctmc& pctmc, std::span<const double> x) {
  if (x.size() != pctmc.n) throw ParameterError("vector_field: wrong dimension");
  Vec out(pctmc.n, 0.0);
  Vec xv(x.begin(), x.end());
  eval_field(pctmc, xv, out);
  return out;
}

std::vector<double> Trajectory::at(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return points.front();
  if (it == times.end()) return points.back();
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - times[lo]) / (times[hi] - times[lo]);
  Vec out(points[lo].size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = (1.0 - w) * points[lo][k] + w * points[hi][k];
  return out;
}

Trajectory integrate(const Pctmc& pctmc, std::vector<double> x0, double T,
                     const OdeSettings& settings) {
  if (!(T > 0.0)) throw ParameterError("integrate: horizon T must be positive");
  if (x0.size() != pctmc.n) throw ParameterError("integrate: x0 has wrong dimension");
  if (simplex_defect(x0) > 1e-8)
    throw ParameterError("integrate: x0 is not on the simplex");

  const std::size_t n_out = std::max<std::size_t>(settings.output_points, 1);
  Trajectory traj;
  traj.times.reserve(n_out + 1);
  traj.points.reserve(n_out + 1);
  {
    std::ostringstream os;
    os << "dopri5 rel_tol=" << settings.rel_tol << " abs_tol=" << settings.abs_tol;
    traj.solver_info = os.str();
  }

  const std::size_t n = pctmc.n;
  Vec y = x0, y_new(n), y_err(n), stage(n);
  std::array<Vec, 7> k;
  for (auto& kv : k) kv.assign(n, 0.0);

  auto emit = [&](double t, const Vec& state) {
    Vec out = state;
    traj.max_clipped_defect = std::max(traj.max_clipped_defect, simplex_defect(out));
    clip_to_simplex(out);
    traj.times.push_back(t);
    traj.points.push_back(std::move(out));
  };

  emit(0.0, y);
  eval_field(pctmc, y, k[0]);

  double t = 0.0;
  double h = std::min(T / static_cast<double>(n_out), 1e-2 / (1.0 + max_norm(k[0])));
  std::size_t next_out = 1;
  std::size_t steps = 0;
  const std::size_t max_steps = 200'000'000;

  while (t < T) {
    const double t_target = T * static_cast<double>(next_out) / static_cast<double>(n_out);
    bool hit_output = false;
    if (t + h >= t_target - 1e-14 * T) {
      h = t_target - t;
      hit_output = true;
    }
    if (++steps > max_steps) throw NumericError("integrate: step limit exceeded");

    for (int s = 1; s < 7; ++s) {
      for (std::size_t j = 0; j < n; ++j) {
        double acc = y[j];
        for (int m = 0; m < s; ++m) acc += h * kA[s][m] * k[m][j];
        stage[j] = acc;
      }
      eval_field(pctmc, stage, k[s]);
    }
    // Stage 7 uses the 5th-order weights, so y_new is the last stage value.
    y_new = stage;
    double err = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e4 = y[j];
      for (int m = 0; m < 7; ++m) e4 += h * kB4[m] * k[m][j];
      const double scale = settings.abs_tol +
                           settings.rel_tol * std::max(std::abs(y[j]), std::abs(y_new[j]));
      err = std::max(err, std::abs(y_new[j] - e4) / scale);
    }

    if (err <= 1.0) {
      t += h;
      y = y_new;
      k[0] = k[6];  // FSAL
      if (hit_output) {
        emit(t, y);
        ++next_out;
        if (next_out > n_out) break;
      }
    }
    const double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    h *= std::clamp(factor, 0.2, 5.0);
    if (!(h > 1e-13 * std::max(1.0, t))) {
      std::ostringstream os;
      os << "integrate: step size underflow (stiffness?) at t=" << t;
      throw NumericError(os.str());
    }
  }

  return traj;
}

Fixpoint find_fixpoint(const Pctmc& pctmc, std::vector<double> x0,
                       const FixpointSettings& settings) {
  Trajectory traj = integrate(pctmc, std::move(x0), settings.settle_T, settings.ode);
  Vec x = traj.back();
  const std::size_t n = pctmc.n;

  // Eliminate the best-occupied coordinate; Newton runs on the rest, which
  // keeps every probe on the sum-to-1 plane.
  const std::size_t pivot = static_cast<std::size_t>(
      std::max_element(x.begin(), x.end()) - x.begin());
  std::vector<std::size_t> free_idx;
  for (std::size_t j = 0; j < n; ++j)
    if (j != pivot) free_idx.push_back(j);

  auto lift = [&](const Vec& y) {
    Vec full(n, 0.0);
    double rest = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
      full[free_idx[j]] = y[j];
      rest += y[j];
    }
    full[pivot] = 1.0 - rest;
    return full;
  };
  auto reduced_field = [&](const Vec& y) {
    const Vec full = lift(y);
    Vec f(n);
    eval_field(pctmc, full, f);
    Vec g(free_idx.size());
    for (std::size_t j = 0; j < free_idx.size(); ++j) g[j] = f[free_idx[j]];
    return g;
  };

  Vec y(free_idx.size());
  for (std::size_t j = 0; j < free_idx.size(); ++j) y[j] = x[free_idx[j]];

  Vec g = reduced_field(y);
  double res = max_norm(vector_field(pctmc, lift(y)));
  const double fd_h = 1e-7;
  for (int iter = 0; iter < settings.max_newton_iters && res >= settings.tol; ++iter) {
    std::vector<Vec> J(free_idx.size(), Vec(free_idx.size()));
    for (std::size_t col = 0; col < free_idx.size(); ++col) {
      Vec yp = y, ym = y;
      yp[col] += fd_h;
      ym[col] -= fd_h;
      const Vec gp = reduced_field(yp), gm = reduced_field(ym);
      for (std::size_t row = 0; row < free_idx.size(); ++row)
        J[row][col] = (gp[row] - gm[row]) / (2.0 * fd_h);
    }
    Vec rhs(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) rhs[j] = -g[j];
    Vec step = solve_linear(std::move(J), std::move(rhs));

    double lambda = 1.0;
    bool improved = false;
    const double g_norm = max_norm(g);
    for (int halvings = 0; halvings < 25; ++halvings, lambda *= 0.5) {
      Vec y_try = y;
      for (std::size_t j = 0; j < y.size(); ++j) y_try[j] += lambda * step[j];
      const Vec g_try = reduced_field(y_try);
      if (max_norm(g_try) < g_norm) {
        y = y_try;
        g = g_try;
        improved = true;
        break;
      }
    }
    if (!improved) break;
    res = max_norm(vector_field(pctmc, lift(y)));
  }

  Vec location = lift(y);
  traj.max_clipped_defect = std::max(traj.max_clipped_defect, simplex_defect(location));
  clip_to_simplex(location);
  res = max_norm(vector_field(pctmc, location));
  if (res >= settings.tol) {
    std::ostringstream os;
    os << "fixpoint unresolved: residual " << res << " after Newton refinement"
       << " (trajectory tail:";
    const std::size_t tail = std::min<std::size_t>(3, traj.points.size());
    for (std::size_t k = traj.points.size() - tail; k < traj.points.size(); ++k) {
      os << " t=" << traj.times[k] << " [";
      for (std::size_t j = 0; j < traj.points[k].size(); ++j)
        os << (j ? "," : "") << traj.points[k][j];
      os << "]";
    }
    os << ")";
    throw NumericError(os.str(), res);
  }

  Fixpoint fp;
  fp.location = std::move(location);
  fp.residual = res;
  return fp;
}

namespace {

std::vector<BasinCell> feasible_cells(std::size_t resolution) {
  if (resolution < 2) throw ParameterError("grid resolution must be >= 2");
  std::vector<BasinCell> cells;
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      BasinCell c;
      c.a = static_cast<double>(i) / static_cast<double>(resolution - 1);
      c.b = static_cast<double>(j) / static_cast<double>(resolution - 1);
      if (c.a + c.b <= 1.0 + 1e-12) cells.push_back(c);
    }
  }
  return cells;
}

// splitmix64: per-cell / per-completion stream derivation.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vec closure_point(std::size_t n, int axis_i, int axis_j, double a, double b,
                  const BasinClosure& closure, std::mt19937_64* rng) {
  Vec x(n, 0.0);
  x[axis_i] = a;
  x[axis_j] = b;
  const double rest = std::max(0.0, 1.0 - a - b);
  std::vector<std::size_t> free_idx;
  for (std::size_t k = 0; k < n; ++k)
    if (static_cast<int>(k) != axis_i && static_cast<int>(k) != axis_j)
      free_idx.push_back(k);
  if (free_idx.empty()) return x;

  if (closure.remainder_state) {
    x[*closure.remainder_state] = rest;
  } else if (rng) {
    const Vec w = random_simplex_point(free_idx.size(), *rng);
    for (std::size_t k = 0; k < free_idx.size(); ++k) x[free_idx[k]] = rest * w[k];
  } else {
    for (std::size_t k : free_idx) x[k] = rest / static_cast<double>(free_idx.size());
  }
  return x;
}

int classify(const Pctmc& pctmc, Vec x, const std::vector<Fixpoint>& fixpoints,
             const BasinSettings& s) {
  double t = 0.0;
  while (true) {
    for (std::size_t f = 0; f < fixpoints.size(); ++f)
      if (linf_distance(x, fixpoints[f].location) < s.match_radius)
        return static_cast<int>(f);
    if (t >= s.t_max) return -1;
    const double chunk = std::min(s.t_chunk, s.t_max - t);
    x = integrate(pctmc, std::move(x), chunk, s.ode).back();
    t += chunk;
  }
}

}  // namespace

BasinGrid basin_grid(const Pctmc& pctmc, int axis_i, int axis_j,
                     std::size_t resolution, const BasinClosure& closure,
                     const std::vector<Fixpoint>& fixpoints,
                     const BasinSettings& settings) {
  if (fixpoints.empty())
    throw ParameterError("basin_grid: the fixpoint list must not be empty");
  if (axis_i == axis_j || axis_i < 0 || axis_j < 0 ||
      axis_i >= static_cast<int>(pctmc.n) || axis_j >= static_cast<int>(pctmc.n))
    throw ParameterError("basin_grid: invalid axis indices");
  if (closure.remainder_state &&
      (*closure.remainder_state == axis_i || *closure.remainder_state == axis_j ||
       *closure.remainder_state < 0 || *closure.remainder_state >= static_cast<int>(pctmc.n)))
    throw ParameterError("basin_grid: invalid remainder state");

  BasinGrid grid;
  grid.axis_i = axis_i;
  grid.axis_j = axis_j;
  grid.resolution = resolution;
  grid.cells = feasible_cells(resolution);

  const int completions =
      closure.remainder_state ? 1 : std::max(1, closure.random_completions);

  parallel_for(grid.cells.size(), settings.threads, [&](std::size_t idx) {
    BasinCell& cell = grid.cells[idx];
    std::vector<int> votes(fixpoints.size(), 0);
    int unresolved = 0;
    for (int c = 0; c < completions; ++c) {
      std::mt19937_64 rng(mix64(closure.seed ^ mix64(idx * 1024 + c)));
      const Vec x = closure_point(pctmc.n, axis_i, axis_j, cell.a, cell.b, closure,
                                  closure.remainder_state ? nullptr : &rng);
      const int label = classify(pctmc, x, fixpoints, settings);
      if (label < 0)
        ++unresolved;
      else
        ++votes[label];
    }
    if (completions > 1) {
      cell.fractions.resize(fixpoints.size());
      for (std::size_t f = 0; f < fixpoints.size(); ++f)
        cell.fractions[f] = static_cast<double>(votes[f]) / completions;
    }
    const auto best = std::max_element(votes.begin(), votes.end());
    cell.label = (*best > 0) ? static_cast<int>(best - votes.begin()) : -1;
    if (unresolved > completions - unresolved) cell.label = -1;
  });

  return grid;
}

std::vector<VectorFieldSample> export_vector_field_grid(const Pctmc& pctmc,
                                                        int axis_i, int axis_j,
                                                        std::size_t resolution,
                                                        const BasinClosure& closure) {
  if (axis_i == axis_j || axis_i < 0 || axis_j < 0 ||
      axis_i >= static_cast<int>(pctmc.n) || axis_j >= static_cast<int>(pctmc.n))
    throw ParameterError("vector field grid: invalid axis indices");
  std::vector<VectorFieldSample> samples;
  for (const auto& cell : feasible_cells(resolution)) {
    VectorFieldSample s;
    s.a = cell.a;
    s.b = cell.b;
    s.point = closure_point(pctmc.n, axis_i, axis_j, cell.a, cell.b, closure, nullptr);
    s.derivative = vector_field(pctmc, s.point);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace mfwsn
