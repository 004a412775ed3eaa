#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfwsn/pctmc.hpp"

namespace mfwsn {

// Mean-field vector field: dx/dt = sum over transitions of nu_f * r_f(x).
std::vector<double> vector_field(const Pctmc& pctmc, std::span<const double> x);

struct OdeSettings {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  std::size_t output_points = 1000;  // uniform output grid (plus t = 0)
};

// Time series of occupancy vectors. Output points are clipped back onto
// the simplex; the largest defect removed this way is recorded.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> points;
  double max_clipped_defect = 0.0;
  std::string solver_info;

  const std::vector<double>& back() const { return points.back(); }
  // State at time t (linear interpolation between output points).
  std::vector<double> at(double t) const;
};

// Adaptive Dormand-Prince 5(4) integration over [0, T].
Trajectory integrate(const Pctmc& pctmc, std::vector<double> x0, double T,
                     const OdeSettings& settings = {});

struct Fixpoint {
  std::vector<double> location;
  double residual = 0.0;      // max-norm of the vector field at location
  std::string classification;  // free-form tag
};

struct FixpointSettings {
  double tol = 1e-10;
  double settle_T = 5000.0;  // integration horizon before Newton refinement
  OdeSettings ode;
  int max_newton_iters = 60;
};

// Integrates to a long horizon and refines with damped Newton restricted to
// the simplex tangent space (finite-difference Jacobian). Non-convergence
// throws NumericError carrying the trajectory tail in the message.
Fixpoint find_fixpoint(const Pctmc& pctmc, std::vector<double> x0,
                       const FixpointSettings& settings = {});

// Closure rule for the coordinates a 2-D grid leaves unspecified.
struct BasinClosure {
  // Dump the remainder 1 - a - b into one designated state...
  std::optional<int> remainder_state;
  // ...or average the labels of k random completions of the free states.
  int random_completions = 0;
  unsigned long long seed = 0;
};

struct BasinCell {
  double a = 0.0, b = 0.0;        // axis values
  int label = -1;                  // fixpoint index, -1 = unresolved
  std::vector<double> fractions;   // per-fixpoint share (random closure only)
};

struct BasinGrid {
  int axis_i = 0, axis_j = 0;
  std::size_t resolution = 0;
  std::vector<BasinCell> cells;  // feasible cells only (a + b <= 1)
};

struct BasinSettings {
  double match_radius = 0.05;  // L-inf radius for fixpoint matching
  double t_max = 5000.0;
  double t_chunk = 250.0;
  OdeSettings ode{1e-6, 1e-9, 64};
  int threads = 0;  // 0 = hardware concurrency
};

// Classifies each feasible grid cell by the fixpoint its trajectory
// reaches. Throws ParameterError when fixpoints is empty.
BasinGrid basin_grid(const Pctmc& pctmc, int axis_i, int axis_j,
                     std::size_t resolution, const BasinClosure& closure,
                     const std::vector<Fixpoint>& fixpoints,
                     const BasinSettings& settings = {});

struct VectorFieldSample {
  double a = 0.0, b = 0.0;
  std::vector<double> point;
  std::vector<double> derivative;
};

// Raw derivatives over the same feasible grid, for external plotting.
std::vector<VectorFieldSample> export_vector_field_grid(const Pctmc& pctmc,
                                                        int axis_i, int axis_j,
                                                        std::size_t resolution,
                                                        const BasinClosure& closure);

}  // namespace mfwsn
