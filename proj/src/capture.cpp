#include "mfwsn/capture.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

#include "mfwsn/errors.hpp"
#include "mfwsn/quadrature.hpp"

namespace mfwsn {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;

// Fritsch-Carlson monotone cubic slopes for data (x_k, y_k). Endpoints use
// the shape-preserving three-point formula.
std::vector<double> pchip_slopes(const std::vector<double>& x,
                                 const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> m(n, 0.0);
  if (n < 2) return m;
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    h[k] = x[k + 1] - x[k];
    delta[k] = (y[k + 1] - y[k]) / h[k];
  }
  if (n == 2) {
    m[0] = m[1] = delta[0];
    return m;
  }
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] * delta[k] <= 0.0) {
      m[k] = 0.0;
    } else {
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double m0 = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m0 * d0 <= 0.0)
      m0 = 0.0;
    else if (d0 * d1 < 0.0 && std::abs(m0) > 3.0 * std::abs(d0))
      m0 = 3.0 * d0;
    return m0;
  };
  m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return m;
}

double hermite(double x, double x0, double x1, double y0, double y1,
               double m0, double m1) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t, t3 = t2 * t;
  return y0 * (2 * t3 - 3 * t2 + 1) + m0 * h * (t3 - 2 * t2 + t) +
         y1 * (-2 * t3 + 3 * t2) + m1 * h * (t3 - t2);
}

}  // namespace

CaptureEvaluator::CaptureEvaluator(const ChannelModel& channel, double abs_tol)
    : channel_(ChannelModel(channel.beta, channel.z, channel.spatial, channel.sigma_d)),
      abs_tol_(abs_tol) {
  use_closed_form_ =
      channel_.spatial == SpatialKind::Uniform && channel_.beta == 4.0;
  if (use_closed_form_) return;

  // Memoize ln inner_survival on a uniform grid over the outer variable,
  // doubling the resolution until cubic interpolation reproduces direct
  // evaluation to 1e-6 at panel midpoints.
  if (channel_.spatial == SpatialKind::Uniform) {
    t_lo_ = 0.0;
    t_hi_ = 1.0;
  } else {
    t_lo_ = -channel_.u_max();
    t_hi_ = channel_.u_max();
  }
  auto survival_at = [&](double t) {
    const double r_t =
        channel_.spatial == SpatialKind::Uniform ? t : std::exp(t);
    return inner_survival(r_t, channel_, abs_tol_);
  };

  const double interp_tol = 1e-6;
  for (std::size_t n = 256; n <= 8192; n *= 2) {
    log_s_.assign(n + 1, 0.0);
    dt_ = (t_hi_ - t_lo_) / static_cast<double>(n);
    for (std::size_t k = 0; k <= n; ++k)
      log_s_[k] = std::log(std::max(survival_at(t_lo_ + dt_ * k), 1e-300));

    std::vector<double> ts(n + 1);
    for (std::size_t k = 0; k <= n; ++k) ts[k] = t_lo_ + dt_ * k;
    slope_ = pchip_slopes(ts, log_s_);

    // Probe a spread of midpoints; s = exp(L) so |ds| <= |dL| for s <= 1.
    double worst = 0.0;
    const std::size_t stride = std::max<std::size_t>(1, n / 64);
    for (std::size_t k = 0; k < n; k += stride) {
      const double t = t_lo_ + dt_ * (k + 0.5);
      const double direct = survival_at(t);
      const double interp = std::exp(log_survival(t));
      worst = std::max(worst, std::abs(direct - interp));
    }
    if (worst < interp_tol) return;
  }
  throw NumericError("inner survival table did not reach interpolation tolerance");
}

double CaptureEvaluator::log_survival(double t) const {
  if (use_closed_form_) {
    const double w = std::sqrt(channel_.z) * t * t;
    if (w == 0.0) return 0.0;
    return std::log(1.0 - w * std::atan(1.0 / w));
  }
  if (t <= t_lo_) return log_s_.front();
  if (t >= t_hi_) return log_s_.back();
  const std::size_t k = std::min<std::size_t>(
      static_cast<std::size_t>((t - t_lo_) / dt_), log_s_.size() - 2);
  const double x0 = t_lo_ + dt_ * k;
  return hermite(t, x0, x0 + dt_, log_s_[k], log_s_[k + 1], slope_[k],
                 slope_[k + 1]);
}

double CaptureEvaluator::outer_integral(double exponent) const {
  if (channel_.spatial == SpatialKind::Uniform) {
    auto integrand = [&](double r_t) {
      return 2.0 * r_t * std::exp(exponent * log_survival(r_t));
    };
    // Geometric panels near 0: the integrand concentrates there for large
    // exponents (survival -> 1 as r_t -> 0).
    return integrate_adaptive(
               integrand,
               {0.0, 1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 0.5, 1.0},
               abs_tol_)
        .value;
  }
  const double s = channel_.log_sigma();
  auto integrand = [&](double u) {
    const double phi = std::exp(-0.5 * (u / s) * (u / s)) / (kSqrt2Pi * s);
    return phi * std::exp(exponent * log_survival(u));
  };
  std::vector<double> edges;
  for (int k = 0; k <= 8; ++k)
    edges.push_back(t_lo_ + (t_hi_ - t_lo_) * k / 8.0);
  return integrate_adaptive(integrand, edges, abs_tol_).value;
}

double CaptureEvaluator::operator()(double i) const {
  if (!(i >= 0.0) || !std::isfinite(i))
    throw ParameterError("capture probability: i must be finite and >= 0");
  // q(i) = i up to and including 1: a lone transmission always captures,
  // and the i >= 1 integral evaluates to 1 at i = 1 (f integrates to one).
  if (i <= 1.0) return i;
  const double q = i * outer_integral(i - 1.0);
  // Roundoff guard only: mathematically q is within [0, 1].
  return std::clamp(q, 0.0, 1.0);
}

std::string CaptureEvaluator::describe() const {
  std::ostringstream os;
  os << "direct(" << channel_.describe() << ", tol=" << abs_tol_ << ")";
  return os.str();
}

std::shared_ptr<const CaptureEvaluator> CaptureEvaluator::shared(
    const ChannelModel& channel) {
  using Key = std::tuple<double, double, int, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const CaptureEvaluator>> cache;
  const Key key{channel.beta, channel.z, static_cast<int>(channel.spatial),
                channel.sigma_d};
  std::scoped_lock lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto ev = std::make_shared<const CaptureEvaluator>(channel);
  cache.emplace(key, ev);
  return ev;
}

double capture_probability(double i, const ChannelModel& channel) {
  return (*CaptureEvaluator::shared(channel))(i);
}

QTable::QTable(const ChannelModel& channel, double i_max, std::size_t n_points)
    : channel_(ChannelModel(channel.beta, channel.z, channel.spatial, channel.sigma_d)) {
  if (!(i_max >= 1.0) || !std::isfinite(i_max))
    throw ParameterError("QTable: i_max must be >= 1");
  if (n_points < 16) throw ParameterError("QTable: n_points must be >= 16");

  auto ev = CaptureEvaluator::shared(channel_);
  grid_.reserve(n_points);
  grid_.push_back(0.0);
  const std::size_t m = n_points - 1;  // nodes on [1, i_max]
  for (std::size_t k = 0; k < m; ++k)
    grid_.push_back(1.0 + (i_max - 1.0) * static_cast<double>(k) /
                              static_cast<double>(m - 1));
  values_.resize(grid_.size());
  values_[0] = 0.0;
  for (std::size_t k = 1; k < grid_.size(); ++k) values_[k] = (*ev)(grid_[k]);

  const std::vector<double> xs(grid_.begin() + 1, grid_.end());
  const std::vector<double> ys(values_.begin() + 1, values_.end());
  slopes_ = pchip_slopes(xs, ys);

  for (std::size_t k = 1; k + 1 < grid_.size(); ++k) {
    const double mid = 0.5 * (grid_[k] + grid_[k + 1]);
    interp_error_bound_ =
        std::max(interp_error_bound_, std::abs((*this)(mid) - (*ev)(mid)));
  }
}

double QTable::operator()(double i) const {
  if (!(i >= 0.0) || !std::isfinite(i))
    throw ParameterError("QTable: i must be finite and >= 0");
  if (i <= 1.0) return i;
  const double i_max = grid_.back();
  if (i > i_max * (1.0 + 1e-9))
    throw ParameterError("QTable: query " + std::to_string(i) +
                         " beyond table range " + std::to_string(i_max));
  i = std::min(i, i_max);
  // Locate the interval within the [1, i_max] part of the grid.
  const auto begin = grid_.begin() + 1;
  auto it = std::upper_bound(begin, grid_.end(), i);
  std::size_t k = static_cast<std::size_t>(it - begin);
  if (k > 0) --k;
  if (k + 2 >= grid_.size()) k = grid_.size() - 3;
  const double y = hermite(i, grid_[k + 1], grid_[k + 2], values_[k + 1],
                           values_[k + 2], slopes_[k], slopes_[k + 1]);
  return std::clamp(y, 0.0, 1.0);
}

std::string QTable::describe() const {
  std::ostringstream os;
  os << "qtable(" << channel_.describe() << ", i_max=" << grid_.back()
     << ", points=" << grid_.size() << ", rule=" << interpolation_rule
     << ", interp_error<=" << interp_error_bound_ << ")";
  return os.str();
}

QTable tabulate_q(const ChannelModel& channel, double i_max, std::size_t n_points) {
  return QTable(channel, i_max, n_points);
}

double lipschitz_probe(const ChannelModel& channel, double lo, double hi,
                       std::size_t n_samples) {
  if (!(lo >= 1.0) || !(hi > lo))
    throw ParameterError("lipschitz_probe: need 1 <= lo < hi");
  if (n_samples < 2) throw ParameterError("lipschitz_probe: need >= 2 samples");
  auto ev = CaptureEvaluator::shared(channel);
  double prev_x = lo, prev_q = (*ev)(lo), worst = 0.0;
  for (std::size_t k = 1; k < n_samples; ++k) {
    const double x =
        lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n_samples - 1);
    const double q = (*ev)(x);
    worst = std::max(worst, std::abs(q - prev_q) / (x - prev_x));
    prev_x = x;
    prev_q = q;
  }
  return worst;
}

}  // namespace mfwsn
