#include "evr/fit.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace evr {

double GevRegressionTarget::value_grad(const Eigen::VectorXd& pos,
                                       Eigen::VectorXd* grad) const {
  if (grad) {
    return log_joint_grad(in_.spec, in_.layout, pos, in_.data, in_.designs,
                          *grad);
  }
  return log_joint(in_.spec, in_.layout, pos, in_.data, in_.designs);
}

PriorCalibration calibrate_from_panel(const RawPanel& panel,
                                      const std::vector<int>& stations,
                                      const SamplerConfig& station_cfg,
                                      std::vector<int>* clamped) {
  std::vector<int> idx = stations;
  if (idx.empty()) {
    idx.resize(static_cast<std::size_t>(panel.n_stations()));
    for (int s = 0; s < panel.n_stations(); ++s) idx[s] = s;
  }
  std::vector<GevParams> means;
  means.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    SamplerConfig cfg = station_cfg;
    cfg.seed = station_cfg.seed + 977 * static_cast<std::uint64_t>(i);
    means.push_back(fit_station_gev(panel.maxima[idx[i]], cfg).posterior_mean);
  }
  return calibrate_priors(means, clamped);
}

FitInputs prepare_fit(const RawPanel& panel, const std::vector<int>& stations,
                      ModelFamily family, int n_basis,
                      const PriorCalibration& calib) {
  Standardizer std_rec;
  Dataset data = build_dataset(panel, stations, &std_rec);
  ModelSpec spec;
  spec.family = family;
  spec.n_basis = n_basis;
  spec.calib = calib;
  std::vector<DecomposedBasis> bases;
  std::vector<GroupDesign> designs;
  if (family != ModelFamily::Linear) {
    for (int m = 0; m < data.n_covariates(); ++m) {
      bases.push_back(build_spline_block(data.X.col(m), n_basis));
      designs.push_back(build_group_design(bases.back(), m));
    }
  }
  ParamLayout layout(family, data.n_stations(), data.n_covariates(), n_basis);
  return FitInputs{spec, layout, std::move(data), std::move(bases),
                   std::move(designs), std::move(std_rec)};
}

Eigen::VectorXd default_init(const FitInputs& inputs) {
  const ParamLayout& L = inputs.layout;
  Eigen::VectorXd init = Eigen::VectorXd::Zero(L.dim());
  // Intercepts start at the calibrated means, every scale starts small and
  // the raw coefficient blocks start at zero, so the initial predictor is
  // exactly the intercept-only model checked below; jittered coefficient
  // starts routinely fall outside the GEV support once the covariate count
  // grows.
  // A negative pooled shape can leave some training maxima above the GEV
  // upper endpoint; walk the starting shape toward heavier tails until
  // every observation has finite density.
  double phi0 = inputs.spec.calib.m_hat[2];
  for (double xi_try : {shape_link_inverse(phi0), 0.05, 0.15, 0.3}) {
    const double cand = shape_link(xi_try);
    const GevParams p = inverse_link_params(
        LinkedParams{inputs.spec.calib.m_hat[0], inputs.spec.calib.m_hat[1],
                     cand});
    bool ok = true;
    for (const auto& y : inputs.data.maxima) {
      for (int t = 0; t < y.size(); ++t) {
        if (!std::isfinite(gev_logpdf(y[t], p))) {
          ok = false;
          break;
        }
      }
      if (!ok) break;
    }
    if (ok) {
      phi0 = cand;
      break;
    }
  }
  const double log_small = std::log(0.1);
  for (int t = 0; t < 3; ++t) {
    init[L.intercept(t)] = t == 2 ? phi0 : inputs.spec.calib.m_hat[t];
    init[L.log_kappa(t)] = log_small;
    if (L.family() == ModelFamily::Splines) {
      for (int m = 0; m < L.n_covariates(); ++m) {
        init[L.log_omega(t, m)] = log_small;
      }
    }
    if (L.family() == ModelFamily::SplinesHS) {
      for (int m = 0; m < L.n_covariates(); ++m) {
        init.segment(L.log_delta(t, m), L.n_basis() - 1).setZero();
        init[L.log_lambda(t, m)] = log_small;
      }
      init[L.log_eta(t)] =
          std::log(0.1 * inputs.spec.calib.s_hat[t]);
    }
  }
  return init;
}

FitResult fit_model(const FitInputs& inputs, SamplerConfig cfg) {
  if (!cfg.init) cfg.init = default_init(inputs);
  GevRegressionTarget target(inputs);
  FitResult out;
  out.draws = sample(target, cfg);
  out.min_ess = std::numeric_limits<double>::infinity();
  for (int j = 0; j < out.draws.dim; ++j) {
    const auto chains = out.draws.coordinate(j);
    if (chains.size() >= 2) {
      const double r = rhat(chains);
      if (std::isfinite(r)) out.max_rhat = std::max(out.max_rhat, r);
    }
    const double e = ess(chains);
    if (std::isfinite(e)) out.min_ess = std::min(out.min_ess, e);
  }
  if (!std::isfinite(out.min_ess)) out.min_ess = 0.0;
  return out;
}

Eigen::MatrixXd log_lik_matrix(const Eigen::MatrixXd& flat_draws,
                               const FitInputs& inputs) {
  const int B = static_cast<int>(flat_draws.rows());
  const Dataset& data = inputs.data;
  Eigen::MatrixXd ll(B, data.n_obs());
  for (int b = 0; b < B; ++b) {
    const LinkedPredictors pred = assemble_predictor(
        inputs.spec, inputs.layout, flat_draws.row(b).transpose(),
        inputs.designs, data.X);
    int col = 0;
    for (int s = 0; s < data.n_stations(); ++s) {
      const GevParams p = inverse_link_params(
          LinkedParams{pred.psi[s], pred.tau[s], pred.phi[s]});
      for (int t = 0; t < data.maxima[s].size(); ++t) {
        ll(b, col++) = gev_logpdf(data.maxima[s][t], p);
      }
    }
  }
  return ll;
}

}  // namespace evr
