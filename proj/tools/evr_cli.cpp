// Command-line front end: simulate panels, fit models, predict ungauged
// sites, run station-holdout cross-validation, and produce calibration
// diagnostics. Exit codes: 0 success, 1 invalid input or configuration,
// 2 sampling failure, 3 cross-validation finished with failed fits.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evr/cv.hpp"
#include "evr/diagnostics.hpp"
#include "evr/fit.hpp"
#include "evr/io.hpp"
#include "evr/posterior.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitSampling = 2;
constexpr int kExitPartial = 3;

struct CommonArgs {
  std::string maxima, covariates, config, out = "run";
  std::string model = "splines-hs";
  int n_basis = 20;
  int chains = 0, warmup = 0, draws = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> log_covariates;
  int sim_stations = 0, sim_blocks = 0, sim_covariates = 0, sim_active = -1;
  bool sim_linear = false;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_data) {
  cmd->add_option("--config", a.config, "JSON configuration file");
  cmd->add_option("--out", a.out, "output directory");
  auto* mx = cmd->add_option("--maxima", a.maxima, "annual maxima CSV");
  auto* cv = cmd->add_option("--covariates", a.covariates, "covariates CSV");
  if (needs_data) {
    // data paths may come from the config file instead
  }
  (void)mx;
  (void)cv;
  cmd->add_option("--model", a.model, "linear | splines | splines-hs");
  cmd->add_option("--n-basis", a.n_basis, "spline basis size per covariate");
  cmd->add_option("--chains", a.chains, "sampler chains");
  cmd->add_option("--warmup", a.warmup, "warmup iterations per chain");
  cmd->add_option("--draws", a.draws, "posterior draws per chain");
  cmd->add_option("--seed", a.seed, "random seed");
  cmd->add_option("--log", a.log_covariates,
                  "covariates given a log transform (repeatable)");
}

evr::RunConfig resolve_config(const CommonArgs& a, const CLI::App* cmd) {
  evr::RunConfig cfg;
  if (!a.config.empty()) cfg = evr::load_config(a.config);
  if (!a.maxima.empty()) cfg.maxima_path = a.maxima;
  if (!a.covariates.empty()) cfg.covariates_path = a.covariates;
  cfg.out_dir = a.out;
  if (cmd->count("--model")) cfg.model = a.model;
  if (cmd->count("--n-basis")) cfg.n_basis = a.n_basis;
  if (a.chains > 0) cfg.sampler.n_chains = a.chains;
  if (a.warmup > 0) cfg.sampler.n_warmup = a.warmup;
  if (a.draws > 0) cfg.sampler.n_draws = a.draws;
  if (cmd->count("--seed")) {
    cfg.sampler.seed = a.seed;
    cfg.station_sampler.seed = a.seed;
    cfg.sim.seed = a.seed;
  }
  for (const auto& name : a.log_covariates) {
    cfg.transforms[name] = evr::TransformKind::Log;
  }
  cfg.validate();
  return cfg;
}

void snapshot_config(const evr::RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  evr::write_config(cfg.out_dir + "/config.json", cfg);
}

void write_coordinate_summary(const std::string& path,
                              const evr::FitResult& fit,
                              const evr::ParamLayout& layout) {
  std::ofstream os(path);
  os.precision(10);
  os << "coordinate,mean,sd,q05,q50,q95,rhat,ess\n";
  const Eigen::MatrixXd flat = fit.draws.flat();
  const std::vector<std::string> names = layout.coord_names();
  for (int j = 0; j < layout.dim(); ++j) {
    const Eigen::VectorXd col = flat.col(j);
    const double mean = col.mean();
    const double sd =
        std::sqrt((col.array() - mean).square().sum() / (col.size() - 1.0));
    std::vector<double> v(col.data(), col.data() + col.size());
    const auto chains = fit.draws.coordinate(j);
    os << names[j] << "," << mean << "," << sd << ","
       << evr::quantile_type7(v, 0.05) << "," << evr::quantile_type7(v, 0.50)
       << "," << evr::quantile_type7(v, 0.95) << "," << evr::rhat(chains)
       << "," << evr::ess(chains) << "\n";
  }
}

void write_station_table(const std::string& path, const evr::FitInputs& in,
                         const Eigen::MatrixXd& flat,
                         const std::vector<double>& periods) {
  std::ofstream os(path);
  os.precision(10);
  os << "station_id,mu_mean,sigma_mean,xi_mean";
  for (double r : periods) {
    os << ",rl" << r << "_mean,rl" << r << "_q05,rl" << r << "_q50,rl" << r
       << "_q95";
  }
  os << "\n";
  for (int s = 0; s < in.data.n_stations(); ++s) {
    const evr::StationPosterior sp = evr::station_params(
        flat, in.spec, in.layout, in.designs, in.data.X, s);
    os << in.data.station_ids[s] << "," << sp.params.col(0).mean() << ","
       << sp.params.col(1).mean() << "," << sp.params.col(2).mean();
    const evr::ReturnLevelPosterior rlp =
        evr::return_level_posterior(sp, periods);
    for (const auto& sum : rlp.summaries) {
      os << "," << sum.mean << "," << sum.q05 << "," << sum.q50 << ","
         << sum.q95;
    }
    os << "\n";
  }
}

int run_simulate(const evr::RunConfig& cfg) {
  snapshot_config(cfg);
  const evr::SyntheticBasin basin = evr::simulate_basin(cfg.sim);
  evr::write_maxima_csv(cfg.out_dir + "/maxima.csv", basin.panel);
  evr::write_covariates_csv(cfg.out_dir + "/covariates.csv", basin.panel);
  evr::write_truth_json(cfg.out_dir + "/truth.json", basin.truth);
  std::cout << "simulated " << basin.panel.n_stations() << " stations x "
            << cfg.sim.n_blocks << " blocks -> " << cfg.out_dir << "\n";
  return kExitOk;
}

struct FittedModel {
  evr::FitInputs inputs;
  evr::FitResult fit;
  Eigen::MatrixXd flat;
};

FittedModel fit_from_config(const evr::RunConfig& cfg,
                            const evr::RawPanel& panel) {
  const evr::PriorCalibration calib =
      evr::calibrate_from_panel(panel, {}, cfg.station_sampler);
  evr::FitInputs inputs =
      evr::prepare_fit(panel, {}, evr::family_from_name(cfg.model),
                       cfg.n_basis, calib);
  evr::FitResult fit = evr::fit_model(inputs, cfg.sampler);
  Eigen::MatrixXd flat = fit.draws.flat();
  return FittedModel{std::move(inputs), std::move(fit), std::move(flat)};
}

int run_fit(const evr::RunConfig& cfg) {
  snapshot_config(cfg);
  const evr::RawPanel panel =
      evr::load_raw(cfg.maxima_path, cfg.covariates_path, cfg.transforms);
  const FittedModel fm = fit_from_config(cfg, panel);
  write_coordinate_summary(cfg.out_dir + "/summary.csv", fm.fit,
                           fm.inputs.layout);
  write_station_table(cfg.out_dir + "/stations.csv", fm.inputs, fm.flat,
                      cfg.return_periods);
  std::cout << "model " << cfg.model << ": max rhat " << fm.fit.max_rhat
            << ", min ess " << fm.fit.min_ess << ", divergences "
            << fm.fit.draws.total_divergences() << "\n";
  return kExitOk;
}

int run_predict(const evr::RunConfig& cfg, const std::string& sites_path) {
  snapshot_config(cfg);
  const evr::RawPanel panel =
      evr::load_raw(cfg.maxima_path, cfg.covariates_path, cfg.transforms);
  // sites file shares the covariates layout; reuse the parser by pairing it
  // with the training maxima (site ids absent from the maxima are dropped
  // there, so read it directly here)
  std::ifstream sf(sites_path);
  if (!sf) {
    throw evr::IngestionError(evr::IngestError::FileNotFound,
                              "cannot open sites file: " + sites_path);
  }
  std::string line;
  std::getline(sf, line);
  std::vector<std::pair<std::string, Eigen::VectorXd>> sites;
  const int M = static_cast<int>(panel.X_raw.cols());
  while (std::getline(sf, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, field;
    std::getline(ss, id, ',');
    Eigen::VectorXd x(M);
    for (int m = 0; m < M; ++m) {
      if (!std::getline(ss, field, ',')) {
        throw evr::IngestionError(evr::IngestError::Malformed,
                                  "sites row for " + id + ": expected " +
                                      std::to_string(M) + " covariates");
      }
      x[m] = std::stod(field);
    }
    sites.push_back({id, x});
  }
  const FittedModel fm = fit_from_config(cfg, panel);
  std::ofstream os(cfg.out_dir + "/predictions.csv");
  os.precision(10);
  os << "station_id,clamped";
  for (double r : cfg.return_periods) {
    os << ",rl" << r << "_mean,rl" << r << "_q05,rl" << r << "_q50,rl" << r
       << "_q95,rl" << r << "_width90";
  }
  os << "\n";
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const evr::StationPosterior sp = evr::predict_ungauged(
        fm.flat, fm.inputs.spec, fm.inputs.layout, fm.inputs.bases,
        fm.inputs.std_rec, sites[i].second,
        cfg.sampler.seed + 31 * (i + 1));
    const evr::ReturnLevelPosterior rlp =
        evr::return_level_posterior(sp, cfg.return_periods);
    os << sites[i].first << "," << (sp.covariate_clamped ? 1 : 0);
    for (const auto& sum : rlp.summaries) {
      os << "," << sum.mean << "," << sum.q05 << "," << sum.q50 << ","
         << sum.q95 << "," << sum.width90;
    }
    os << "\n";
  }
  std::cout << "predicted " << sites.size() << " sites -> " << cfg.out_dir
            << "/predictions.csv\n";
  return kExitOk;
}

int run_diagnose(const evr::RunConfig& cfg) {
  snapshot_config(cfg);
  const evr::RawPanel panel =
      evr::load_raw(cfg.maxima_path, cfg.covariates_path, cfg.transforms);
  const FittedModel fm = fit_from_config(cfg, panel);
  evr::DiagnosticsReport report;
  report.model = cfg.model;
  for (int s = 0; s < fm.inputs.data.n_stations(); ++s) {
    const evr::StationPosterior sp =
        evr::station_params(fm.flat, fm.inputs.spec, fm.inputs.layout,
                            fm.inputs.designs, fm.inputs.data.X, s);
    evr::StationScores sc;
    sc.station_id = fm.inputs.data.station_ids[s];
    const Eigen::VectorXd& y = fm.inputs.data.maxima[s];
    const Eigen::VectorXd rep =
        evr::posterior_predictive(sp, 1, cfg.sampler.seed + 61 * (s + 1))
            .col(0);
    for (int t = 0; t < y.size(); ++t) {
      sc.pit_values.push_back(evr::pit(rep, y[t]));
      sc.crps_values.push_back(evr::crps_sample(rep, y[t]));
    }
    sc.acrps_value = evr::acrps(sc.crps_values);
    const evr::ReturnLevelPosterior rlp =
        evr::return_level_posterior(sp, cfg.return_periods);
    sc.return_periods = cfg.return_periods;
    for (std::size_t r = 0; r < cfg.return_periods.size(); ++r) {
      sc.pvals.push_back(evr::bayes_pval(rlp.draws.col(static_cast<int>(r)),
                                         y, cfg.return_periods[r]));
      sc.interval_widths.push_back(rlp.summaries[r].width90);
    }
    report.stations.push_back(std::move(sc));
  }
  report.looic = evr::loo_ic(evr::log_lik_matrix(fm.flat, fm.inputs)).looic;
  {
    std::ofstream os(cfg.out_dir + "/diagnostics.json");
    os << report.to_json() << "\n";
  }
  {
    std::ofstream os(cfg.out_dir + "/diagnostics.csv");
    os << report.to_csv();
  }
  std::cout << "model " << cfg.model << ": looic " << report.looic
            << ", pooled pit ks "
            << evr::ks_uniform_statistic(report.pooled_pit()) << "\n";
  return kExitOk;
}

int run_cv_cmd(const evr::RunConfig& cfg, int folds_override) {
  snapshot_config(cfg);
  const evr::RawPanel panel =
      evr::load_raw(cfg.maxima_path, cfg.covariates_path, cfg.transforms);
  evr::CvOptions opt;
  opt.n_basis = cfg.n_basis;
  opt.return_periods = cfg.return_periods;
  opt.n_folds = folds_override > 0 ? folds_override : cfg.cv_folds;
  opt.sampler = cfg.sampler;
  opt.station_sampler = cfg.station_sampler;
  opt.seed = cfg.sampler.seed;
  const evr::CvResult result = evr::run_cv(panel, opt);
  for (std::size_t g = 0; g < result.folds.size(); ++g) {
    for (const auto& entry : result.folds[g].models) {
      if (entry.failed) {
        std::cerr << "fold " << g << " " << entry.model
                  << " failed: " << entry.error << "\n";
      }
    }
  }
  {
    std::ofstream os(cfg.out_dir + "/cv_scores.csv");
    os.precision(10);
    os << "fold,model,station_id,metric,period,value\n";
    for (std::size_t g = 0; g < result.folds.size(); ++g) {
      for (const auto& entry : result.folds[g].models) {
        if (entry.failed) continue;
        for (const auto& st : entry.report.stations) {
          os << g << "," << entry.model << "," << st.station_id
             << ",acrps,," << st.acrps_value << "\n";
          for (std::size_t r = 0; r < st.return_periods.size(); ++r) {
            os << g << "," << entry.model << "," << st.station_id << ",pval,"
               << st.return_periods[r] << "," << st.pvals[r] << "\n";
            os << g << "," << entry.model << "," << st.station_id
               << ",width90," << st.return_periods[r] << ","
               << st.interval_widths[r] << "\n";
          }
        }
      }
    }
  }
  {
    std::ofstream os(cfg.out_dir + "/cv_summary.csv");
    os.precision(10);
    os << "model,acrps,pit_ks,period,pval_star,mean_width,acrps_vs_linear,"
          "width_vs_linear,failed_folds\n";
    const auto sums = result.summaries();
    const auto rels = evr::relative_metrics(result, "linear");
    for (std::size_t i = 0; i < sums.size(); ++i) {
      for (std::size_t r = 0; r < sums[i].return_periods.size(); ++r) {
        os << sums[i].model << "," << sums[i].acrps_value << ","
           << sums[i].pit_ks << "," << sums[i].return_periods[r] << ","
           << sums[i].pval_star_values[r] << "," << sums[i].mean_widths[r]
           << "," << rels[i].acrps_ratio << "," << rels[i].width_ratios[r]
           << "," << sums[i].n_failed_folds << "\n";
      }
    }
  }
  std::cout << "cross-validation over " << result.folds.size() << " folds"
            << (result.partial ? " (partial: some fits failed)" : "") << "\n";
  return result.partial ? kExitPartial : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian regional extreme-value regression"};
  app.require_subcommand(1);

  CommonArgs sim_a, fit_a, pred_a, cv_a, diag_a;
  std::string sites_path;
  int folds = 0;

  auto* sim = app.add_subcommand("simulate", "write a synthetic basin");
  add_common(sim, sim_a, false);
  sim->add_option("--stations", sim_a.sim_stations, "stations to simulate");
  sim->add_option("--blocks", sim_a.sim_blocks, "blocks (years) per station");
  sim->add_option("--n-covariates", sim_a.sim_covariates,
                  "covariates to simulate");
  sim->add_option("--active", sim_a.sim_active,
                  "covariates with nonzero effects");
  sim->add_flag("--linear-truth", sim_a.sim_linear,
                "use linear instead of nonlinear true effects");

  auto* fit = app.add_subcommand("fit", "fit one model to a panel");
  add_common(fit, fit_a, true);

  auto* pred = app.add_subcommand("predict", "return levels at new sites");
  add_common(pred, pred_a, true);
  pred->add_option("--sites", sites_path, "covariate rows for new sites")
      ->required();

  auto* cv = app.add_subcommand("cv", "station-holdout cross-validation");
  add_common(cv, cv_a, true);
  cv->add_option("--folds", folds, "number of folds");

  auto* diag = app.add_subcommand("diagnose", "in-sample calibration report");
  add_common(diag, diag_a, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      evr::RunConfig cfg = resolve_config(sim_a, sim);
      if (sim_a.sim_stations > 0) cfg.sim.n_stations = sim_a.sim_stations;
      if (sim_a.sim_blocks > 0) cfg.sim.n_blocks = sim_a.sim_blocks;
      if (sim_a.sim_covariates > 0) cfg.sim.n_covariates = sim_a.sim_covariates;
      if (sim_a.sim_active >= 0) cfg.sim.n_active = sim_a.sim_active;
      if (sim_a.sim_linear) cfg.sim.nonlinear = false;
      return run_simulate(cfg);
    }
    const CLI::App* active = fit->parsed()    ? fit
                             : pred->parsed() ? pred
                             : cv->parsed()   ? cv
                                              : diag;
    const CommonArgs& args = fit->parsed()    ? fit_a
                             : pred->parsed() ? pred_a
                             : cv->parsed()   ? cv_a
                                              : diag_a;
    const evr::RunConfig cfg = resolve_config(args, active);
    if (cfg.maxima_path.empty() || cfg.covariates_path.empty()) {
      std::cerr << "error: --maxima and --covariates are required\n";
      return kExitInvalid;
    }
    if (fit->parsed()) return run_fit(cfg);
    if (pred->parsed()) return run_predict(cfg, sites_path);
    if (cv->parsed()) return run_cv_cmd(cfg, folds);
    return run_diagnose(cfg);
  } catch (const evr::IngestionError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::runtime_error& e) {
    std::cerr << "sampling failure: " << e.what() << "\n";
    return kExitSampling;
  }
}
