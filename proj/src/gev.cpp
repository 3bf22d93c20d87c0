#include "evr/gev.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace evr {

namespace {

constexpr double kEulerGamma = 0.57721566490153286060651209008240;

void check_finite(double y, const GevParams& p) {
  if (!std::isfinite(y) || !std::isfinite(p.mu) || !std::isfinite(p.sigma) ||
      !std::isfinite(p.xi)) {
    throw std::invalid_argument("gev: non-finite input");
  }
  if (p.sigma <= 0.0) {
    throw std::invalid_argument("gev: sigma must be positive");
  }
}

}  // namespace

ReturnPeriod::ReturnPeriod(double b) : blocks(b) {
  if (!(b > 1.0) || !std::isfinite(b)) {
    throw std::invalid_argument("ReturnPeriod: R must exceed 1");
  }
}

double gev_cdf(double y, const GevParams& p) {
  check_finite(y, p);
  const double z = (y - p.mu) / p.sigma;
  if (std::abs(p.xi) < kShapeBranchTol) {
    return std::exp(-std::exp(-z));
  }
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) {
    return p.xi < 0.0 ? 1.0 : 0.0;
  }
  return std::exp(-std::exp(-std::log1p(p.xi * z) / p.xi));
}

double gev_logpdf(double y, const GevParams& p) {
  check_finite(y, p);
  const double z = (y - p.mu) / p.sigma;
  if (std::abs(p.xi) < kShapeBranchTol) {
    return -std::log(p.sigma) - z - std::exp(-z);
  }
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) {
    return -std::numeric_limits<double>::infinity();
  }
  const double lt = std::log1p(p.xi * z);
  return -std::log(p.sigma) - (1.0 / p.xi + 1.0) * lt - std::exp(-lt / p.xi);
}

GevScore gev_score(double y, const GevParams& p) {
  check_finite(y, p);
  const double z = (y - p.mu) / p.sigma;
  GevScore sc;
  if (std::abs(p.xi) < kShapeBranchTol) {
    const double emz = std::exp(-z);
    const double dz = -1.0 + emz;
    sc.d_mu = -dz / p.sigma;
    sc.d_sigma = (-1.0 - dz * z) / p.sigma;
    // xi -> 0 limit of the shape score.
    sc.d_xi = -z + 0.5 * z * z * (1.0 - emz);
    return sc;
  }
  const double t = 1.0 + p.xi * z;
  if (t <= 0.0) {
    return sc;  // outside support, sentinel region: zero by convention
  }
  const double lt = std::log1p(p.xi * z);
  const double e = std::exp(-lt / p.xi);  // t^(-1/xi)
  const double dz = (-(1.0 + p.xi) + e) / t;
  sc.d_mu = -dz / p.sigma;
  sc.d_sigma = (-1.0 - dz * z) / p.sigma;
  const double inv_xi2 = 1.0 / (p.xi * p.xi);
  sc.d_xi = inv_xi2 * lt - (1.0 / p.xi + 1.0) * z / t -
            e * (inv_xi2 * lt - z / (p.xi * t));
  return sc;
}

double gev_quantile(double prob, const GevParams& p) {
  if (!(prob > 0.0 && prob < 1.0)) {
    throw std::invalid_argument("gev_quantile: prob outside (0,1)");
  }
  const double lnln = std::log(-std::log(prob));
  if (std::abs(p.xi) < kShapeBranchTol) {
    return p.mu - p.sigma * lnln;
  }
  return p.mu + p.sigma * std::expm1(-p.xi * lnln) / p.xi;
}

double return_level(const ReturnPeriod& rp, const GevParams& p) {
  if (p.sigma <= 0.0) {
    throw std::invalid_argument("return_level: sigma must be positive");
  }
  return gev_quantile(1.0 - rp.exceed_prob(), p);
}

std::vector<double> gev_sample(const GevParams& p, int n, Rng& rng) {
  if (p.sigma <= 0.0) {
    throw std::invalid_argument("gev_sample: sigma must be positive");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(gev_quantile(rng.uniform(), p));
  }
  return out;
}

std::vector<double> gev_sample(const GevParams& p, int n, std::uint64_t seed) {
  Rng rng(seed);
  return gev_sample(p, n, rng);
}

double gev_mean(const GevParams& p) {
  if (p.xi >= 1.0) {
    return std::numeric_limits<double>::infinity();
  }
  if (std::abs(p.xi) < kShapeBranchTol) {
    return p.mu + p.sigma * kEulerGamma;
  }
  return p.mu + p.sigma * std::expm1(std::lgamma(1.0 - p.xi)) / p.xi;
}

double shape_link(double xi, const ShapeLinkConstants& c) {
  if (!(xi > -0.5 && xi < 0.5)) {
    throw std::invalid_argument("shape_link: xi outside (-0.5, 0.5)");
  }
  // 1 - (xi + 0.5)^c evaluated via expm1/log1p; xi - 0.5 is exact near the
  // upper boundary, which keeps the doubly-logarithmic tail accurate.
  const double one_minus_u = -std::expm1(c.c * std::log1p(xi - 0.5));
  return c.a + c.b * std::log(-std::log(one_minus_u));
}

double shape_link_inverse(double phi, const ShapeLinkConstants& c) {
  if (!std::isfinite(phi)) {
    throw std::invalid_argument("shape_link_inverse: non-finite phi");
  }
  const double w = std::exp((phi - c.a) / c.b);
  // log u with u = 1 - exp(-w), accurate for both tails.
  const double log_u = std::log1p(-std::exp(-w));
  double xi = 0.5 + std::expm1(log_u / c.c);
  // keep strictly inside (-0.5, 0.5)
  const double hi = std::nextafter(0.5, 0.0);
  const double lo = std::nextafter(-0.5, 0.0);
  if (xi >= 0.5) xi = hi;
  if (xi <= -0.5) xi = lo;
  return xi;
}

double shape_link_inverse_deriv(double phi, const ShapeLinkConstants& c) {
  const double w = std::exp((phi - c.a) / c.b);
  const double log_u = std::log1p(-std::exp(-w));
  // xi + 0.5 = u^(1/c);  d xi / d phi = u^(1/c - 1) * exp(-w) * w / (c b)
  const double u_pow = std::exp((1.0 / c.c - 1.0) * log_u);
  return u_pow * std::exp(-w) * w / (c.c * c.b);
}

LinkedParams link_params(const GevParams& p, const ShapeLinkConstants& c) {
  if (!(p.mu > 0.0)) {
    throw std::invalid_argument("link_params: mu must be positive");
  }
  if (!(p.sigma > 0.0)) {
    throw std::invalid_argument("link_params: sigma must be positive");
  }
  LinkedParams l;
  l.psi = std::log(p.mu);
  l.tau = std::log(p.sigma / p.mu);
  l.phi = shape_link(p.xi, c);
  return l;
}

GevParams inverse_link_params(const LinkedParams& l,
                              const ShapeLinkConstants& c) {
  if (!std::isfinite(l.psi) || !std::isfinite(l.tau) || !std::isfinite(l.phi)) {
    throw std::invalid_argument("inverse_link_params: non-finite input");
  }
  GevParams p;
  p.mu = std::exp(l.psi);
  p.sigma = std::exp(l.psi + l.tau);
  p.xi = shape_link_inverse(l.phi, c);
  return p;
}

}  // namespace evr
