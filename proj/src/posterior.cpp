#include "evr/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "evr/rng.hpp"

namespace evr {

namespace {

class StationGevTarget : public LogDensity {
 public:
  explicit StationGevTarget(const Eigen::VectorXd& y) : y_(y) {}
  int dim() const override { return 3; }
  // v = (mu, log sigma, xi)
  double value_grad(const Eigen::VectorXd& v,
                    Eigen::VectorXd* grad) const override {
    const double mu = v[0];
    const double sigma = std::exp(v[1]);
    const double xi = v[2];
    if (!std::isfinite(sigma) || sigma <= 0.0) {
      if (grad) grad->setZero();
      return kLogZero;
    }
    const GevParams p{mu, sigma, xi};
    double lp = 0.0;
    double d_mu = 0.0, d_lsig = 0.0, d_xi = 0.0;
    for (double y : y_) {
      const double l = gev_logpdf(y, p);
      if (!std::isfinite(l)) {
        if (grad) grad->setZero();
        return kLogZero;
      }
      lp += l;
      if (grad) {
        const GevScore sc = gev_score(y, p);
        d_mu += sc.d_mu;
        d_lsig += sc.d_sigma * sigma;
        d_xi += sc.d_xi;
      }
    }
    lp += normal_lpdf(mu, 0.0, 1e4) + normal_lpdf(v[1], 0.0, 1e4) +
          normal_lpdf(xi, 0.0, 1.0);
    if (grad) {
      (*grad)[0] = d_mu - mu / 1e8;
      (*grad)[1] = d_lsig - v[1] / 1e8;
      (*grad)[2] = d_xi - xi;
    }
    return lp;
  }

 private:
  Eigen::VectorXd y_;
};

}  // namespace

StationFit fit_station_gev(const Eigen::VectorXd& y,
                           const SamplerConfig& cfg) {
  if (y.size() < 5) {
    throw std::invalid_argument(
        "fit_station_gev: need at least 5 observations");
  }
  StationGevTarget target(y);
  SamplerConfig c = cfg;
  const double mean = y.mean();
  const double sd =
      std::sqrt((y.array() - mean).square().sum() / (y.size() - 1.0));
  Eigen::VectorXd init(3);
  init << mean, std::log(std::max(sd, 1e-6)), 0.05;
  c.init = init;
  const PosteriorDraws draws = sample(target, c);
  StationFit fit;
  const Eigen::MatrixXd flat = draws.flat();
  fit.draws.resize(flat.rows(), 3);
  fit.draws.col(0) = flat.col(0);
  fit.draws.col(1) = flat.col(1).array().exp();
  fit.draws.col(2) = flat.col(2);
  fit.posterior_mean = GevParams{fit.draws.col(0).mean(),
                                 fit.draws.col(1).mean(),
                                 fit.draws.col(2).mean()};
  return fit;
}

PriorCalibration calibrate_priors(const std::vector<GevParams>& station_means,
                                  std::vector<int>* clamped) {
  const int S = static_cast<int>(station_means.size());
  if (S < 2) {
    throw std::invalid_argument("calibrate_priors: need at least 2 stations");
  }
  Eigen::MatrixXd linked(S, 3);
  for (int s = 0; s < S; ++s) {
    GevParams p = station_means[s];
    bool flag = false;
    if (!(p.mu > 0.0)) {
      p.mu = 1e-6;
      flag = true;
    }
    if (!(p.xi > -0.5 && p.xi < 0.5)) {
      p.xi = p.xi >= 0.5 ? 0.499 : -0.499;
      flag = true;
    }
    if (flag && clamped) clamped->push_back(s);
    const LinkedParams l = link_params(p);
    linked.row(s) << l.psi, l.tau, l.phi;
  }
  PriorCalibration cal;
  for (int t = 0; t < 3; ++t) {
    cal.m_hat[t] = linked.col(t).mean();
    cal.s_hat[t] = std::sqrt(
        (linked.col(t).array() - cal.m_hat[t]).square().sum() / (S - 1.0));
    if (!(cal.s_hat[t] > 0.0)) {
      throw std::invalid_argument(
          "calibrate_priors: degenerate calibration (zero spread across "
          "stations)");
    }
  }
  return cal;
}

namespace {

// Per-covariate pieces of the fixed-effect predictor for one station row.
struct EffectRow {
  double x = 0.0;               // standardized covariate value
  Eigen::RowVectorXd b_tilde;   // penalized basis row (K-2)
};

// theta draws (B x 3) for one station row given its effect rows; the random
// effect contribution is supplied by the caller.
Eigen::MatrixXd linked_draws(const Eigen::MatrixXd& flat_draws,
                             const ModelSpec& spec, const ParamLayout& layout,
                             const std::vector<EffectRow>& rows,
                             const std::function<double(int, int, double)>&
                                 random_effect) {
  const int B = static_cast<int>(flat_draws.rows());
  const int M = static_cast<int>(rows.size());
  const int K = layout.n_basis();
  Eigen::MatrixXd theta(B, 3);
  for (int b = 0; b < B; ++b) {
    const Eigen::VectorXd v = flat_draws.row(b);
    for (int t = 0; t < 3; ++t) {
      double th = v[layout.intercept(t)];
      if (spec.family != ModelFamily::SplinesHS) {
        for (int m = 0; m < M; ++m) {
          th += v[layout.beta(t) + m] * rows[m].x;
        }
      }
      if (spec.family == ModelFamily::Splines) {
        for (int m = 0; m < M; ++m) {
          const double omega = std::exp(v[layout.log_omega(t, m)]);
          th += omega *
                rows[m].b_tilde.dot(v.segment(layout.gamma(t, m), K - 2));
        }
      }
      if (spec.family == ModelFamily::SplinesHS) {
        const double eta = std::exp(v[layout.log_eta(t)]);
        for (int m = 0; m < M; ++m) {
          const double lambda = std::exp(v[layout.log_lambda(t, m)]);
          const Eigen::ArrayXd sdk =
              eta * lambda *
              v.segment(layout.log_delta(t, m), K - 1).array().exp().sqrt();
          const Eigen::ArrayXd a = v.segment(layout.alpha(t, m), K - 1).array();
          double dot = rows[m].x * sdk[0] * a[0];
          for (int k = 1; k < K - 1; ++k) {
            dot += rows[m].b_tilde[k - 1] * sdk[k] * a[k];
          }
          th += dot;
        }
      }
      const double kappa = std::exp(v[layout.log_kappa(t)]);
      th += random_effect(b, t, kappa);
      theta(b, t) = th;
    }
  }
  return theta;
}

Eigen::MatrixXd to_native(const Eigen::MatrixXd& theta) {
  Eigen::MatrixXd out(theta.rows(), 3);
  for (int b = 0; b < theta.rows(); ++b) {
    const GevParams p = inverse_link_params(
        LinkedParams{theta(b, 0), theta(b, 1), theta(b, 2)});
    out.row(b) << p.mu, p.sigma, p.xi;
  }
  return out;
}

}  // namespace

StationPosterior station_params(const Eigen::MatrixXd& flat_draws,
                                const ModelSpec& spec,
                                const ParamLayout& layout,
                                const std::vector<GroupDesign>& designs,
                                const Eigen::MatrixXd& X, int s) {
  const int M = layout.n_covariates();
  std::vector<EffectRow> rows(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    rows[m].x = X(s, m);
    if (spec.family != ModelFamily::Linear) {
      rows[m].b_tilde = designs[m].Z.row(s).tail(layout.n_basis() - 2);
    }
  }
  StationPosterior sp;
  sp.gauged = true;
  const auto fitted_u = [&](int b, int t, double kappa) {
    return kappa * flat_draws(b, layout.u(t) + s);
  };
  sp.params = to_native(
      linked_draws(flat_draws, spec, layout, rows, fitted_u));
  return sp;
}

StationPosterior predict_ungauged(const Eigen::MatrixXd& flat_draws,
                                  const ModelSpec& spec,
                                  const ParamLayout& layout,
                                  const std::vector<DecomposedBasis>& bases,
                                  const Standardizer& std_rec,
                                  const Eigen::VectorXd& x_raw,
                                  std::uint64_t seed) {
  const int M = layout.n_covariates();
  const Eigen::VectorXd x_std = std_rec.apply_row(x_raw);
  StationPosterior sp;
  sp.gauged = false;
  std::vector<EffectRow> rows(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    double x = x_std[m];
    if (spec.family != ModelFamily::Linear) {
      const auto& grid = bases[m].grid;
      if (x < grid.span_lo() || x > grid.span_hi()) {
        x = std::clamp(x, grid.span_lo(), grid.span_hi());
        sp.covariate_clamped = true;
      }
      rows[m].b_tilde = penalized_row(bases[m], x);
    }
    rows[m].x = x;
  }
  // fresh random effects, one per draw and parameter
  const int B = static_cast<int>(flat_draws.rows());
  Rng rng(seed);
  Eigen::MatrixXd z(B, 3);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < 3; ++t) z(b, t) = rng.normal();
  }
  const auto fresh_u = [&](int b, int t, double kappa) {
    return kappa * z(b, t);
  };
  sp.params = to_native(
      linked_draws(flat_draws, spec, layout, rows, fresh_u));
  return sp;
}

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("quantile_type7: empty input");
  }
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("quantile_type7: p outside [0,1]");
  }
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

ReturnLevelPosterior return_level_posterior(
    const StationPosterior& sp, const std::vector<double>& periods) {
  ReturnLevelPosterior rp;
  rp.periods = periods;
  const int B = sp.n_draws();
  const int R = static_cast<int>(periods.size());
  rp.draws.resize(B, R);
  for (int r = 0; r < R; ++r) {
    const ReturnPeriod period(periods[r]);
    for (int b = 0; b < B; ++b) {
      rp.draws(b, r) = return_level(period, sp.draw(b));
    }
    std::vector<double> col(rp.draws.col(r).data(),
                            rp.draws.col(r).data() + B);
    ReturnLevelSummary sum;
    sum.period = periods[r];
    sum.mean = rp.draws.col(r).mean();
    sum.q05 = quantile_type7(col, 0.05);
    sum.q50 = quantile_type7(col, 0.50);
    sum.q95 = quantile_type7(col, 0.95);
    sum.width90 = sum.q95 - sum.q05;
    rp.summaries.push_back(sum);
  }
  return rp;
}

Eigen::MatrixXd posterior_predictive(const StationPosterior& sp, int T,
                                     std::uint64_t seed) {
  if (T < 1) {
    throw std::invalid_argument("posterior_predictive: T must be positive");
  }
  Rng rng(seed);
  const int B = sp.n_draws();
  Eigen::MatrixXd rep(B, T);
  for (int b = 0; b < B; ++b) {
    const GevParams p = sp.draw(b);
    for (int t = 0; t < T; ++t) {
      rep(b, t) = gev_quantile(rng.uniform(), p);
    }
  }
  return rep;
}

}  // namespace evr
