#pragma once

#include <Eigen/Dense>
#include <vector>

#include "evr/gev.hpp"
#include "evr/model.hpp"
#include "evr/sampler.hpp"

namespace evr {

// Per-draw native GEV parameters for one station.
struct StationPosterior {
  Eigen::MatrixXd params;  // B x 3 columns (mu, sigma, xi)
  bool gauged = true;
  bool covariate_clamped = false;
  int n_draws() const { return static_cast<int>(params.rows()); }
  GevParams draw(int b) const {
    return GevParams{params(b, 0), params(b, 1), params(b, 2)};
  }
};

// Exploratory single-station GEV fit with the flat reference priors
// (N(0, 10000^2) on mu and log sigma, standard normal on xi).
struct StationFit {
  Eigen::MatrixXd draws;  // B x 3 (mu, sigma, xi), chains stacked
  GevParams posterior_mean;
};
StationFit fit_station_gev(const Eigen::VectorXd& y, const SamplerConfig& cfg);

// Links each station's posterior-mean triple and returns per-parameter
// (psi, tau, phi) means and sds. Stations whose xi falls outside
// (-0.5, 0.5) are clamped to +/-0.499 before the shape link and reported
// in `clamped`.
PriorCalibration calibrate_priors(const std::vector<GevParams>& station_means,
                                  std::vector<int>* clamped = nullptr);

// Drawwise linked predictor -> native parameters for a training station.
StationPosterior station_params(const Eigen::MatrixXd& flat_draws,
                                const ModelSpec& spec,
                                const ParamLayout& layout,
                                const std::vector<GroupDesign>& designs,
                                const Eigen::MatrixXd& X, int s);

// Out-of-sample prediction: fixed/spline effects at the new covariates plus
// a freshly simulated random effect per draw. Covariates outside the
// training span are clamped (flagged on the result).
StationPosterior predict_ungauged(const Eigen::MatrixXd& flat_draws,
                                  const ModelSpec& spec,
                                  const ParamLayout& layout,
                                  const std::vector<DecomposedBasis>& bases,
                                  const Standardizer& std_rec,
                                  const Eigen::VectorXd& x_raw,
                                  std::uint64_t seed);

struct ReturnLevelSummary {
  double period = 0.0;
  double mean = 0.0;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
  double width90 = 0.0;
};

struct ReturnLevelPosterior {
  std::vector<double> periods;
  Eigen::MatrixXd draws;  // B x n_periods
  std::vector<ReturnLevelSummary> summaries;
};

ReturnLevelPosterior return_level_posterior(const StationPosterior& sp,
                                            const std::vector<double>& periods);

// One replicate per draw per block: B x T.
Eigen::MatrixXd posterior_predictive(const StationPosterior& sp, int T,
                                     std::uint64_t seed);

// Type-7 (linear interpolation) empirical quantile.
double quantile_type7(std::vector<double> values, double p);

}  // namespace evr
