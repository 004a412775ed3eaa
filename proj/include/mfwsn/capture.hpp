#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mfwsn/channel.hpp"

namespace mfwsn {

// Interface for evaluating the capture probability q(i) at real i >= 0.
// q(i) = i on [0,1); for i >= 1 it is
//   i * integral of [inner_survival(r_t)]^(i-1) f(r_t) dr_t
// with the exponent evaluated as a real number.
class QFunction {
 public:
  virtual ~QFunction() = default;
  virtual double operator()(double i) const = 0;
  virtual const ChannelModel& channel() const = 0;
  virtual std::string describe() const = 0;
};

// Direct evaluator: outer adaptive quadrature with the inner survival
// probability memoized on a grid (cubic interpolation of its logarithm,
// refined until the table reproduces direct evaluation to 1e-6).
// Immutable after construction; safe for concurrent reads.
class CaptureEvaluator final : public QFunction {
 public:
  explicit CaptureEvaluator(const ChannelModel& channel, double abs_tol = 1e-9);

  double operator()(double i) const override;
  const ChannelModel& channel() const override { return channel_; }
  std::string describe() const override;

  // ln of the memoized inner survival probability at outer coordinate t
  // (t = r_t for uniform channels, t = ln r_t for log-normal ones).
  double log_survival(double t) const;

  // Process-wide cache of evaluators keyed by channel parameters.
  static std::shared_ptr<const CaptureEvaluator> shared(const ChannelModel& channel);

 private:
  ChannelModel channel_;
  double abs_tol_;
  // Uniform grid over [t_lo_, t_hi_] of ln inner_survival values and slopes.
  double t_lo_ = 0.0, t_hi_ = 1.0, dt_ = 1.0;
  std::vector<double> log_s_;
  std::vector<double> slope_;
  bool use_closed_form_ = false;

  double outer_integral(double exponent) const;
};

// One-off evaluation of q(i); uses the shared evaluator cache.
double capture_probability(double i, const ChannelModel& channel);

// Tabulated q over a grid 0 = i_0 < 1 = i_1 < ... <= i_max, with exact
// linear behaviour on [0,1) and a monotonicity-preserving cubic
// (Fritsch-Carlson) on [1, i_max]. Values stay within [0,1].
class QTable final : public QFunction {
 public:
  QTable(const ChannelModel& channel, double i_max, std::size_t n_points);

  double operator()(double i) const override;
  const ChannelModel& channel() const override { return channel_; }
  std::string describe() const override;

  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  // Max deviation from direct evaluation observed at grid midpoints.
  double interp_error_bound() const { return interp_error_bound_; }
  static constexpr const char* interpolation_rule =
      "identity on [0,1); pchip on [1,i_max]";

 private:
  ChannelModel channel_;
  std::vector<double> grid_;    // includes the leading 0
  std::vector<double> values_;
  std::vector<double> slopes_;  // pchip slopes for grid_[1..]
  double interp_error_bound_ = 0.0;
};

QTable tabulate_q(const ChannelModel& channel, double i_max, std::size_t n_points);

// Max |q(x)-q(y)| / |x-y| over consecutive sample pairs of a uniform grid
// on [lo, hi]; a numerical stand-in for a Lipschitz bound on [1, inf).
double lipschitz_probe(const ChannelModel& channel, double lo, double hi,
                       std::size_t n_samples);

}  // namespace mfwsn
