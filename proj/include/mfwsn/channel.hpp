#pragma once

#include <optional>
#include <string>

namespace mfwsn {

enum class SpatialKind { Uniform, LogNormal };

// Radio channel description: pathloss exponent beta, capture power-ratio
// threshold z, and the spatial distribution of node-to-receiver distances.
//
// The uniform distribution places nodes on the unit disk, f(r) = 2r on
// [0,1]. The log-normal one is
//     f(r) = beta / (sqrt(2*pi) * r * sigma_d) * exp(-beta^2 (ln r)^2 / (2 sigma_d^2)),
// i.e. ln r is normal with mean 0 and std dev sigma_d/beta.
struct ChannelModel {
  double beta = 4.0;
  double z = 10.0;
  SpatialKind spatial = SpatialKind::Uniform;
  double sigma_d = 0.0;  // used only for LogNormal

  ChannelModel() = default;
  ChannelModel(double beta, double z, SpatialKind spatial, double sigma_d = 0.0);

  static ChannelModel uniform(double beta, double z);
  static ChannelModel log_normal(double beta, double z, double sigma_d);

  // Std dev of ln r under the log-normal distribution.
  double log_sigma() const { return sigma_d / beta; }

  // Truncation radius for improper integrals over the log-normal density:
  // the two-sided tail mass beyond exp(+/- u_max) in u = ln r is < 1e-10.
  double u_max() const { return 6.5 * log_sigma(); }
  double r_max() const;

  bool operator==(const ChannelModel&) const = default;
  std::string describe() const;
};

// Spatial density f(r) of the node-to-receiver distance.
double spatial_pdf(double r, const ChannelModel& channel);

// Probability of a transmission from distance r_t surviving one interfering
// signal: integral of f(r) / (1 + z * r_t^beta * r^-beta) over the support.
// Uses the closed form 1 - sqrt(z) r_t^2 atan(1/(sqrt(z) r_t^2)) for the
// uniform distribution with beta = 4, adaptive quadrature otherwise.
double inner_survival(double r_t, const ChannelModel& channel,
                      double abs_tol = 1e-9);

// The same integral evaluated by raw quadrature regardless of channel kind;
// kept separate so the closed form can be cross-checked against it.
double inner_survival_quadrature(double r_t, const ChannelModel& channel,
                                 double abs_tol = 1e-9);

}  // namespace mfwsn
