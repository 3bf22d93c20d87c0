#pragma once

#include <vector>

#include "evr/rng.hpp"

namespace evr {

// Native GEV parameters: location mu, scale sigma > 0, shape xi.
struct GevParams {
  double mu = 0.0;
  double sigma = 1.0;
  double xi = 0.0;
};

// Regression-scale parameters: psi = log(mu), tau = log(sigma/mu),
// phi = shape_link(xi).
struct LinkedParams {
  double psi = 0.0;
  double tau = 0.0;
  double phi = 0.0;
};

// Constants of the shape link confining xi to (-0.5, 0.5).
struct ShapeLinkConstants {
  double a = 0.062376;
  double b = 0.39563;
  double c = 0.8;
};

struct ReturnPeriod {
  explicit ReturnPeriod(double blocks);
  double blocks;
  double exceed_prob() const { return 1.0 / blocks; }
};

// Below this |xi| the Gumbel branch is used; keeps (1 + xi z)^(-1/xi)
// away from catastrophic cancellation.
inline constexpr double kShapeBranchTol = 1e-8;

// Finite stand-in for log(0) used inside sampling (gradient-safe).
inline constexpr double kLogZero = -1e300;

double gev_cdf(double y, const GevParams& p);

// Log-density; -inf outside the support.
double gev_logpdf(double y, const GevParams& p);

// Partial derivatives of the log-density w.r.t. (mu, sigma, xi).
struct GevScore {
  double d_mu = 0.0;
  double d_sigma = 0.0;
  double d_xi = 0.0;
};
GevScore gev_score(double y, const GevParams& p);

// Quantile at level 1 - 1/R (exact inverse of gev_cdf).
double return_level(const ReturnPeriod& rp, const GevParams& p);

double gev_quantile(double prob, const GevParams& p);

std::vector<double> gev_sample(const GevParams& p, int n, Rng& rng);
std::vector<double> gev_sample(const GevParams& p, int n, std::uint64_t seed);

// Mean of the GEV distribution; finite only for xi < 1.
double gev_mean(const GevParams& p);

double shape_link(double xi, const ShapeLinkConstants& c = {});
double shape_link_inverse(double phi, const ShapeLinkConstants& c = {});
// d xi / d phi evaluated at phi.
double shape_link_inverse_deriv(double phi, const ShapeLinkConstants& c = {});

LinkedParams link_params(const GevParams& p, const ShapeLinkConstants& c = {});
GevParams inverse_link_params(const LinkedParams& l,
                              const ShapeLinkConstants& c = {});

}  // namespace evr
