#include "mfwsn/channel.hpp"

#include <cmath>
#include <sstream>

#include "mfwsn/errors.hpp"
#include "mfwsn/quadrature.hpp"

namespace mfwsn {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;

void validate(const ChannelModel& c) {
  if (!(c.beta > 0.0) || !std::isfinite(c.beta))
    throw ParameterError("channel: beta must be positive and finite");
  if (!(c.z > 0.0) || !std::isfinite(c.z))
    throw ParameterError("channel: z must be positive and finite");
  if (c.spatial == SpatialKind::LogNormal &&
      (!(c.sigma_d > 0.0) || !std::isfinite(c.sigma_d)))
    throw ParameterError("channel: sigma_d must be positive and finite");
}

// Normal density of u = ln r for the log-normal spatial distribution.
double log_space_pdf(double u, const ChannelModel& c) {
  const double s = c.log_sigma();
  return std::exp(-0.5 * (u / s) * (u / s)) / (kSqrt2Pi * s);
}

}  // namespace

ChannelModel::ChannelModel(double beta_, double z_, SpatialKind spatial_, double sigma_d_) {
  beta = beta_;
  z = z_;
  spatial = spatial_;
  sigma_d = sigma_d_;
  validate(*this);
}

ChannelModel ChannelModel::uniform(double beta, double z) {
  return ChannelModel(beta, z, SpatialKind::Uniform);
}

ChannelModel ChannelModel::log_normal(double beta, double z, double sigma_d) {
  return ChannelModel(beta, z, SpatialKind::LogNormal, sigma_d);
}

double ChannelModel::r_max() const {
  return spatial == SpatialKind::LogNormal ? std::exp(u_max()) : 1.0;
}

std::string ChannelModel::describe() const {
  std::ostringstream os;
  os << "beta=" << beta << " z=" << z;
  if (spatial == SpatialKind::Uniform)
    os << " spatial=uniform";
  else
    os << " spatial=lognormal(sigma_d=" << sigma_d << ")";
  return os.str();
}

double spatial_pdf(double r, const ChannelModel& channel) {
  validate(channel);
  if (r < 0.0 || !std::isfinite(r))
    throw ParameterError("spatial_pdf: r must be finite and >= 0");
  if (channel.spatial == SpatialKind::Uniform)
    return r <= 1.0 ? 2.0 * r : 0.0;
  if (r == 0.0) return 0.0;  // limit as r -> 0+
  const double u = std::log(r);
  return log_space_pdf(u, channel) / r;
}

double inner_survival_quadrature(double r_t, const ChannelModel& channel,
                                 double abs_tol) {
  validate(channel);
  if (r_t < 0.0 || !std::isfinite(r_t))
    throw ParameterError("inner_survival: r_t must be finite and >= 0");
  if (r_t == 0.0) return 1.0;  // the interference term vanishes

  const double zb = channel.z * std::pow(r_t, channel.beta);

  if (channel.spatial == SpatialKind::Uniform) {
    auto integrand = [&](double r) {
      if (r <= 0.0) return 0.0;
      return 2.0 * r / (1.0 + zb * std::pow(r, -channel.beta));
    };
    return integrate_adaptive(integrand, {0.0, 0.25, 0.5, 0.75, 1.0}, abs_tol).value;
  }

  // Log-normal: integrate in u = ln r, where the density becomes Gaussian.
  const double um = channel.u_max();
  auto integrand = [&](double u) {
    return log_space_pdf(u, channel) /
           (1.0 + zb * std::exp(-channel.beta * u));
  };
  std::vector<double> edges;
  for (int k = 0; k <= 8; ++k) edges.push_back(-um + 2.0 * um * k / 8.0);
  return integrate_adaptive(integrand, edges, abs_tol).value;
}

double inner_survival(double r_t, const ChannelModel& channel, double abs_tol) {
  if (channel.spatial == SpatialKind::Uniform && channel.beta == 4.0) {
    validate(channel);
    if (r_t < 0.0 || !std::isfinite(r_t))
      throw ParameterError("inner_survival: r_t must be finite and >= 0");
    // Closed form: 1 - sqrt(z) r_t^2 atan(1 / (sqrt(z) r_t^2)).
    const double w = std::sqrt(channel.z) * r_t * r_t;
    if (w == 0.0) return 1.0;
    return 1.0 - w * std::atan(1.0 / w);
  }
  return inner_survival_quadrature(r_t, channel, abs_tol);
}

}  // namespace mfwsn
