#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "evr/fit.hpp"
#include "evr/io.hpp"
#include "evr/posterior.hpp"
#include "evr/rng.hpp"

using namespace evr;

namespace {

SamplerConfig light_cfg(std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.n_chains = 2;
  cfg.n_warmup = 400;
  cfg.n_draws = 400;
  cfg.seed = seed;
  return cfg;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

}  // namespace

TEST_CASE("station fit recovers simulated parameters") {
  const GevParams truth{100.0, 30.0, 0.1};
  const Eigen::VectorXd y = to_eigen(gev_sample(truth, 200, std::uint64_t{5}));
  const StationFit fit = fit_station_gev(y, light_cfg(1));
  for (int j = 0; j < 3; ++j) {
    const double mean = fit.draws.col(j).mean();
    const double sd = std::sqrt(
        (fit.draws.col(j).array() - mean).square().sum() /
        (fit.draws.rows() - 1.0));
    const double target = j == 0 ? truth.mu : (j == 1 ? truth.sigma : truth.xi);
    CHECK(std::abs(mean - target) < 3.0 * sd);
  }
}

TEST_CASE("station fit is translation equivariant under weak priors") {
  const GevParams truth{100.0, 30.0, 0.05};
  const Eigen::VectorXd y = to_eigen(gev_sample(truth, 150, std::uint64_t{6}));
  const StationFit base = fit_station_gev(y, light_cfg(2));
  const StationFit shifted =
      fit_station_gev(y.array() + 1000.0, light_cfg(2));
  CHECK(shifted.posterior_mean.mu - base.posterior_mean.mu ==
        doctest::Approx(1000.0).epsilon(0.01));
  // sigma and xi intervals overlap
  auto interval = [](const Eigen::MatrixXd& draws, int col) {
    std::vector<double> v(draws.col(col).data(),
                          draws.col(col).data() + draws.rows());
    return std::pair<double, double>{quantile_type7(v, 0.05),
                                     quantile_type7(v, 0.95)};
  };
  for (int col : {1, 2}) {
    const auto [alo, ahi] = interval(base.draws, col);
    const auto [blo, bhi] = interval(shifted.draws, col);
    CHECK(alo < bhi);
    CHECK(blo < ahi);
  }
}

TEST_CASE("station fit needs at least five observations") {
  Eigen::VectorXd y(4);
  y << 1.0, 2.0, 3.0, 4.0;
  CHECK_THROWS_AS(fit_station_gev(y, light_cfg(3)), std::invalid_argument);
}

TEST_CASE("prior calibration links and clamps") {
  std::vector<GevParams> fits = {{100.0, 30.0, 0.1},
                                 {150.0, 40.0, 0.7},  // xi out of range
                                 {80.0, 20.0, -0.2}};
  std::vector<int> clamped;
  const PriorCalibration cal = calibrate_priors(fits, &clamped);
  REQUIRE(clamped.size() == 1);
  CHECK(clamped[0] == 1);
  const double psi0 = std::log(100.0);
  const double tau0 = std::log(0.3);
  CHECK(psi0 == doctest::Approx(4.60517).epsilon(1e-5));
  CHECK(tau0 == doctest::Approx(-1.20397).epsilon(1e-5));
  const double psi_mean =
      (std::log(100.0) + std::log(150.0) + std::log(80.0)) / 3.0;
  CHECK(cal.m_hat[0] == doctest::Approx(psi_mean).epsilon(1e-12));
  CHECK(cal.s_hat.minCoeff() > 0.0);
}

TEST_CASE("degenerate calibration rejected") {
  std::vector<GevParams> same = {{100.0, 30.0, 0.1}, {100.0, 30.0, 0.1}};
  CHECK_THROWS_AS(calibrate_priors(same), std::invalid_argument);
  CHECK_THROWS_AS(calibrate_priors({GevParams{100.0, 30.0, 0.1}}),
                  std::invalid_argument);
}

// Shared fixture: a small fitted model reused by the posterior plumbing
// tests (fitting is the slow part).
struct Fitted {
  FitInputs inputs;
  Eigen::MatrixXd flat;
  RawPanel panel;
};

static const Fitted& fitted() {
  static const Fitted f = [] {
    SimOptions opt;
    opt.n_stations = 12;
    opt.n_blocks = 25;
    opt.n_covariates = 2;
    opt.seed = 21;
    SyntheticBasin basin = simulate_basin(opt);
    const PriorCalibration calib =
        calibrate_from_panel(basin.panel, {}, light_cfg(4));
    FitInputs inputs =
        prepare_fit(basin.panel, {}, ModelFamily::Splines, 8, calib);
    SamplerConfig cfg = light_cfg(5);
    cfg.n_warmup = 300;
    cfg.n_draws = 300;
    const FitResult fit = fit_model(inputs, cfg);
    return Fitted{std::move(inputs), fit.draws.flat(), std::move(basin.panel)};
  }();
  return f;
}

TEST_CASE("station parameters match a manual reconstruction") {
  const Fitted& f = fitted();
  const int s = 3;
  const StationPosterior sp = station_params(
      f.flat, f.inputs.spec, f.inputs.layout, f.inputs.designs,
      f.inputs.data.X, s);
  REQUIRE(sp.gauged);
  for (int b : {0, 57, 250}) {
    const Eigen::VectorXd v = f.flat.row(b).transpose();
    const LinkedPredictors pred = assemble_predictor(
        f.inputs.spec, f.inputs.layout, v, f.inputs.designs, f.inputs.data.X);
    const GevParams p = inverse_link_params(
        LinkedParams{pred.psi[s], pred.tau[s], pred.phi[s]});
    CHECK(sp.params(b, 0) == doctest::Approx(p.mu).epsilon(1e-12));
    CHECK(sp.params(b, 1) == doctest::Approx(p.sigma).epsilon(1e-12));
    CHECK(sp.params(b, 2) == doctest::Approx(p.xi).epsilon(1e-12));
    CHECK(p.mu > 0.0);
    CHECK(p.sigma > 0.0);
    CHECK(p.xi > -0.5);
    CHECK(p.xi < 0.5);
  }
}

TEST_CASE("ungauged prediction at a training row differs only in u") {
  const Fitted& f = fitted();
  const int s = 2;
  // force every random-effect path to zero by zeroing u and shrinking kappa
  Eigen::MatrixXd mod = f.flat;
  for (int t = 0; t < 3; ++t) {
    mod.col(f.inputs.layout.log_kappa(t)).setConstant(-300.0);
  }
  const StationPosterior gauged = station_params(
      mod, f.inputs.spec, f.inputs.layout, f.inputs.designs, f.inputs.data.X,
      s);
  const StationPosterior pred = predict_ungauged(
      mod, f.inputs.spec, f.inputs.layout, f.inputs.bases, f.inputs.std_rec,
      f.panel.X_raw.row(s).transpose(), 99);
  REQUIRE_FALSE(pred.gauged);
  CHECK((gauged.params - pred.params).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("ungauged predictive variance dominates the fixed part") {
  const Fitted& f = fitted();
  const Eigen::VectorXd x = f.panel.X_raw.row(5).transpose();
  const StationPosterior with_u = predict_ungauged(
      f.flat, f.inputs.spec, f.inputs.layout, f.inputs.bases, f.inputs.std_rec,
      x, 7);
  Eigen::MatrixXd no_u = f.flat;
  for (int t = 0; t < 3; ++t) {
    no_u.col(f.inputs.layout.log_kappa(t)).setConstant(-300.0);
  }
  const StationPosterior fixed_only = predict_ungauged(
      no_u, f.inputs.spec, f.inputs.layout, f.inputs.bases, f.inputs.std_rec,
      x, 7);
  auto log_var = [](const StationPosterior& sp) {
    const Eigen::ArrayXd lp = sp.params.col(0).array().log();
    return (lp - lp.mean()).square().sum() / (lp.size() - 1.0);
  };
  CHECK(log_var(with_u) >= log_var(fixed_only));
}

TEST_CASE("ungauged prediction is deterministic in the seed") {
  const Fitted& f = fitted();
  const Eigen::VectorXd x = f.panel.X_raw.row(1).transpose();
  const StationPosterior a = predict_ungauged(
      f.flat, f.inputs.spec, f.inputs.layout, f.inputs.bases, f.inputs.std_rec,
      x, 13);
  const StationPosterior b = predict_ungauged(
      f.flat, f.inputs.spec, f.inputs.layout, f.inputs.bases, f.inputs.std_rec,
      x, 13);
  CHECK((a.params - b.params).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("out-of-span covariates are clamped and flagged") {
  const Fitted& f = fitted();
  Eigen::VectorXd x = f.panel.X_raw.row(0).transpose();
  x[0] = 1e6;
  const StationPosterior sp = predict_ungauged(
      f.flat, f.inputs.spec, f.inputs.layout, f.inputs.bases, f.inputs.std_rec,
      x, 17);
  CHECK(sp.covariate_clamped);
  CHECK(sp.params.allFinite());
}

TEST_CASE("return level posterior summaries") {
  const Fitted& f = fitted();
  const StationPosterior sp = station_params(
      f.flat, f.inputs.spec, f.inputs.layout, f.inputs.designs,
      f.inputs.data.X, 0);
  const ReturnLevelPosterior rlp = return_level_posterior(sp, {50.0, 100.0});
  REQUIRE(rlp.summaries.size() == 2);
  CHECK(rlp.summaries[1].mean > rlp.summaries[0].mean);
  for (const auto& s : rlp.summaries) {
    CHECK(s.q05 <= s.q50);
    CHECK(s.q50 <= s.q95);
    CHECK(s.width90 == doctest::Approx(s.q95 - s.q05));
  }
  // drawwise identity
  for (int b : {0, 123}) {
    CHECK(rlp.draws(b, 0) ==
          doctest::Approx(return_level(ReturnPeriod(50.0), sp.draw(b)))
              .epsilon(1e-12));
  }
}

TEST_CASE("degenerate posterior has zero interval width") {
  StationPosterior sp;
  sp.params = Eigen::MatrixXd(200, 3);
  for (int b = 0; b < 200; ++b) sp.params.row(b) << 100.0, 30.0, 0.1;
  const ReturnLevelPosterior rlp = return_level_posterior(sp, {50.0});
  CHECK(rlp.summaries[0].width90 == doctest::Approx(0.0));
}

TEST_CASE("posterior predictive matches the mixture-mean oracle") {
  Rng rng(35);
  StationPosterior sp;
  sp.params = Eigen::MatrixXd(4000, 3);
  for (int b = 0; b < 4000; ++b) {
    sp.params.row(b) << 100.0 + 5.0 * rng.normal(),
        30.0 * std::exp(0.1 * rng.normal()), 0.1 + 0.05 * rng.normal();
  }
  const Eigen::MatrixXd rep = posterior_predictive(sp, 50, 77);
  REQUIRE(rep.rows() == 4000);
  REQUIRE(rep.cols() == 50);
  double oracle = 0.0;
  for (int b = 0; b < 4000; ++b) oracle += gev_mean(sp.draw(b));
  oracle /= 4000.0;
  CHECK(rep.mean() == doctest::Approx(oracle).epsilon(0.02));
  CHECK((posterior_predictive(sp, 50, 77) - rep).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("posterior predictive respects the support bound") {
  StationPosterior sp;
  sp.params = Eigen::MatrixXd(500, 3);
  for (int b = 0; b < 500; ++b) sp.params.row(b) << 10.0, 2.0, -0.4;
  const Eigen::MatrixXd rep = posterior_predictive(sp, 20, 3);
  CHECK(rep.maxCoeff() <= 10.0 + 2.0 / 0.4);
}

TEST_CASE("type-7 quantiles") {
  CHECK(quantile_type7({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_type7({1, 2, 3, 4}, 0.0) == doctest::Approx(1.0));
  CHECK(quantile_type7({1, 2, 3, 4}, 1.0) == doctest::Approx(4.0));
  CHECK(quantile_type7({3, 1, 4, 2}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile_type7({5.0}, 0.3) == doctest::Approx(5.0));
  CHECK_THROWS_AS(quantile_type7({}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(quantile_type7({1.0}, 1.5), std::invalid_argument);
}

TEST_CASE("pooling narrows gauged return-level intervals") {
  // hierarchical fit vs independent single-station fits on a basin whose
  // stations genuinely share structure
  SimOptions opt;
  opt.n_stations = 20;
  opt.n_blocks = 20;
  opt.n_covariates = 0;
  opt.n_active = 0;
  opt.seed = 101;
  SyntheticBasin basin = simulate_basin(opt);
  const PriorCalibration calib =
      calibrate_from_panel(basin.panel, {}, light_cfg(6));
  FitInputs inputs =
      prepare_fit(basin.panel, {}, ModelFamily::Linear, 8, calib);
  const FitResult fit = fit_model(inputs, light_cfg(7));
  const Eigen::MatrixXd flat = fit.draws.flat();
  double pooled = 0.0, solo = 0.0;
  for (int s = 0; s < 20; ++s) {
    const StationPosterior sp = station_params(
        flat, inputs.spec, inputs.layout, inputs.designs, inputs.data.X, s);
    pooled += return_level_posterior(sp, {50.0}).summaries[0].width90;
    const StationFit single =
        fit_station_gev(basin.panel.maxima[s], light_cfg(8 + s));
    StationPosterior ss;
    ss.params = single.draws;
    solo += return_level_posterior(ss, {50.0}).summaries[0].width90;
  }
  CHECK(pooled / 20.0 < solo / 20.0);
}
