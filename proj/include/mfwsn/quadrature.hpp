#pragma once

#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "mfwsn/errors.hpp"

namespace mfwsn {

// Adaptive Gauss-Kronrod (G7,K15) quadrature on a finite interval.
// Improper integrals are handled by the callers, which truncate their
// domains so that the discarded tail mass is below the tolerance.

namespace detail {

// K15 abscissae on [0,1] with Gauss (G7) and Kronrod (K15) weights.
// Row 0 is the centre node; the others come in +/- pairs.
inline constexpr double kGK15[8][3] = {
    {0.000000000000000, 0.417959183673469, 0.209482141084728},
    {0.405845151377397, 0.381830050505119, 0.190350578064785},
    {0.741531185599394, 0.279705391489277, 0.140653259715525},
    {0.949107912342759, 0.129484966168870, 0.063092092629979},
    {0.207784955007898, 0.0,               0.204432940075298},
    {0.586087235467691, 0.0,               0.169004726639267},
    {0.864864423359769, 0.0,               0.104790010322250},
    {0.991455371120813, 0.0,               0.022935322010529},
};

template <class F>
double gk15_panel(const F& f, double a, double b, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);

  const double fc = f(c);
  double g7 = kGK15[0][1] * fc;
  double k15 = kGK15[0][2] * fc;
  for (int i = 1; i < 8; ++i) {
    const double dx = h * kGK15[i][0];
    const double fi = f(c + dx) + f(c - dx);
    g7 += kGK15[i][1] * fi;
    k15 += kGK15[i][2] * fi;
  }
  g7 *= h;
  k15 *= h;

  // QUADPACK-style sharpened estimate of the K15 error: (200*|K15-G7|)^1.5.
  err = 200.0 * std::abs(k15 - g7);
  err *= std::sqrt(err);
  if (!std::isfinite(err)) err = std::abs(k15 - g7);
  return k15;
}

struct Panel {
  double a, b, value, err;
  bool operator<(const Panel& o) const { return err < o.err; }
};

}  // namespace detail

struct QuadratureResult {
  double value;
  double error_estimate;
};

// Integrates f over the union of [edges[k], edges[k+1]] panels, refining
// the worst panel until the summed error estimate drops below abs_tol.
template <class F>
QuadratureResult integrate_adaptive(const F& f, const std::vector<double>& edges,
                                    double abs_tol = 1e-9,
                                    std::size_t max_panels = 4000) {
  std::priority_queue<detail::Panel> heap;
  double total = 0.0, total_err = 0.0;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    detail::Panel p{edges[k], edges[k + 1], 0.0, 0.0};
    p.value = detail::gk15_panel(f, p.a, p.b, p.err);
    total += p.value;
    total_err += p.err;
    heap.push(p);
  }

  std::size_t n = heap.size();
  while (total_err > abs_tol && n < max_panels) {
    detail::Panel worst = heap.top();
    heap.pop();
    total -= worst.value;
    total_err -= worst.err;

    const double mid = 0.5 * (worst.a + worst.b);
    for (const auto& [lo, hi] : {std::pair{worst.a, mid}, std::pair{mid, worst.b}}) {
      detail::Panel p{lo, hi, 0.0, 0.0};
      p.value = detail::gk15_panel(f, p.a, p.b, p.err);
      total += p.value;
      total_err += p.err;
      heap.push(p);
    }
    ++n;
  }

  if (total_err > abs_tol)
    throw NumericError("quadrature did not converge: error estimate " +
                           std::to_string(total_err) + " > tolerance " +
                           std::to_string(abs_tol),
                       total_err);
  return {total, total_err};
}

template <class F>
double integrate_adaptive(const F& f, double a, double b, double abs_tol = 1e-9) {
  return integrate_adaptive(f, std::vector<double>{a, b}, abs_tol).value;
}

}  // namespace mfwsn
