#include "evr/cv.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evr/posterior.hpp"
#include "evr/rng.hpp"

namespace evr {

std::vector<int> FoldPlan::training_for(int fold) const {
  std::vector<char> held(static_cast<std::size_t>(n_stations), 0);
  for (int s : folds[static_cast<std::size_t>(fold)]) held[s] = 1;
  std::vector<int> training;
  for (int s = 0; s < n_stations; ++s) {
    if (!held[s]) training.push_back(s);
  }
  return training;
}

FoldPlan partition_folds(int n_stations, int n_folds, std::uint64_t seed) {
  if (n_folds < 1 || n_folds > n_stations) {
    throw std::invalid_argument(
        "partition_folds: need 1 <= folds <= stations");
  }
  std::vector<int> perm(static_cast<std::size_t>(n_stations));
  for (int s = 0; s < n_stations; ++s) perm[s] = s;
  Rng rng(seed);
  for (int i = n_stations - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
  }
  FoldPlan plan;
  plan.n_stations = n_stations;
  const int base = n_stations / n_folds;
  const int extra = n_stations % n_folds;
  int pos = 0;
  for (int g = 0; g < n_folds; ++g) {
    const int size = base + (g < extra ? 1 : 0);
    std::vector<int> fold(perm.begin() + pos, perm.begin() + pos + size);
    std::sort(fold.begin(), fold.end());
    plan.folds.push_back(std::move(fold));
    pos += size;
  }
  return plan;
}

namespace {

StationScores score_holdout(const StationPosterior& sp,
                            const Eigen::VectorXd& y,
                            const std::string& station_id,
                            const std::vector<double>& periods,
                            std::uint64_t seed) {
  StationScores sc;
  sc.station_id = station_id;
  // several replicates per posterior draw, reused across this station's
  // blocks; fewer would leave enough Monte Carlo error in the empirical
  // predictive CDF to visibly distort pooled PIT uniformity
  const Eigen::MatrixXd mat = posterior_predictive(sp, 10, seed);
  const Eigen::VectorXd rep =
      Eigen::Map<const Eigen::VectorXd>(mat.data(), mat.size());
  for (int t = 0; t < y.size(); ++t) {
    sc.pit_values.push_back(pit(rep, y[t]));
    sc.crps_values.push_back(crps_sample(rep, y[t]));
  }
  sc.acrps_value = acrps(sc.crps_values);
  const ReturnLevelPosterior rlp = return_level_posterior(sp, periods);
  sc.return_periods = periods;
  for (std::size_t r = 0; r < periods.size(); ++r) {
    sc.pvals.push_back(
        bayes_pval(rlp.draws.col(static_cast<int>(r)), y, periods[r]));
    sc.interval_widths.push_back(rlp.summaries[r].width90);
  }
  return sc;
}

}  // namespace

CvResult run_cv(const RawPanel& panel, const CvOptions& opt) {
  CvResult result;
  result.plan = partition_folds(panel.n_stations(), opt.n_folds, opt.seed);
  const int G = static_cast<int>(result.plan.folds.size());
  for (int g = 0; g < G; ++g) {
    CvFoldResult fold;
    fold.holdout = result.plan.folds[static_cast<std::size_t>(g)];
    fold.training = result.plan.training_for(g);
    if (static_cast<int>(fold.training.size()) < opt.min_training) {
      throw std::invalid_argument(
          "run_cv: training fold smaller than " +
          std::to_string(opt.min_training) + " stations");
    }
    SamplerConfig scfg = opt.station_sampler;
    scfg.seed = opt.seed + 10007 * static_cast<std::uint64_t>(g);
    const PriorCalibration calib =
        calibrate_from_panel(panel, fold.training, scfg);
    for (std::size_t f = 0; f < opt.families.size(); ++f) {
      CvModelEntry entry;
      entry.model = family_name(opt.families[f]);
      try {
        const FitInputs inputs = prepare_fit(panel, fold.training,
                                             opt.families[f], opt.n_basis,
                                             calib);
        SamplerConfig cfg = opt.sampler;
        cfg.seed = opt.seed + 1000 * static_cast<std::uint64_t>(g) + f;
        const FitResult fit = fit_model(inputs, cfg);
        entry.max_rhat = fit.max_rhat;
        entry.min_ess = fit.min_ess;
        entry.divergences = fit.draws.total_divergences();
        const Eigen::MatrixXd flat = fit.draws.flat();
        entry.report.model = entry.model;
        for (std::size_t h = 0; h < fold.holdout.size(); ++h) {
          const int s = fold.holdout[h];
          const std::uint64_t pseed =
              cfg.seed + 7919 * static_cast<std::uint64_t>(h + 1);
          const StationPosterior sp = predict_ungauged(
              flat, inputs.spec, inputs.layout, inputs.bases, inputs.std_rec,
              panel.X_raw.row(s).transpose(), pseed);
          entry.report.stations.push_back(
              score_holdout(sp, panel.maxima[s], panel.station_ids[s],
                            opt.return_periods, pseed + 1));
        }
      } catch (const std::exception& e) {
        entry.failed = true;
        entry.error = e.what();
        result.partial = true;
      }
      fold.models.push_back(std::move(entry));
    }
    result.folds.push_back(std::move(fold));
  }
  return result;
}

std::vector<CvSummary> CvResult::summaries() const {
  std::vector<CvSummary> out;
  if (folds.empty()) return out;
  const std::size_t n_models = folds.front().models.size();
  for (std::size_t f = 0; f < n_models; ++f) {
    CvSummary sum;
    sum.model = folds.front().models[f].model;
    std::vector<double> crps_all, pit_all;
    std::size_t n_periods = 0;
    for (const auto& fold : folds) {
      if (fold.models[f].failed) {
        ++sum.n_failed_folds;
        continue;
      }
      for (const auto& st : fold.models[f].report.stations) {
        crps_all.insert(crps_all.end(), st.crps_values.begin(),
                        st.crps_values.end());
        pit_all.insert(pit_all.end(), st.pit_values.begin(),
                       st.pit_values.end());
        n_periods = st.return_periods.size();
        if (sum.return_periods.empty()) {
          sum.return_periods = st.return_periods;
        }
      }
    }
    sum.pval_star_values.resize(n_periods, 0.0);
    sum.mean_widths.resize(n_periods, 0.0);
    for (std::size_t r = 0; r < n_periods; ++r) {
      std::vector<double> pvals, widths;
      for (const auto& fold : folds) {
        if (fold.models[f].failed) continue;
        for (const auto& st : fold.models[f].report.stations) {
          pvals.push_back(st.pvals[r]);
          widths.push_back(st.interval_widths[r]);
        }
      }
      if (!pvals.empty()) {
        sum.pval_star_values[r] = pval_star(pvals);
        double w = 0.0;
        for (double x : widths) w += x;
        sum.mean_widths[r] = w / widths.size();
      }
    }
    if (!crps_all.empty()) sum.acrps_value = acrps(crps_all);
    if (!pit_all.empty()) sum.pit_ks = ks_uniform_statistic(pit_all);
    out.push_back(std::move(sum));
  }
  return out;
}

std::vector<RelativeMetrics> relative_metrics(const CvResult& result,
                                              const std::string& benchmark) {
  const std::vector<CvSummary> sums = result.summaries();
  const CvSummary* bench = nullptr;
  for (const auto& s : sums) {
    if (s.model == benchmark) bench = &s;
  }
  if (!bench) {
    throw std::invalid_argument("relative_metrics: unknown benchmark model " +
                                benchmark);
  }
  std::vector<RelativeMetrics> out;
  for (const auto& s : sums) {
    RelativeMetrics rel;
    rel.model = s.model;
    rel.acrps_ratio = s.acrps_value / bench->acrps_value;
    for (std::size_t r = 0; r < s.mean_widths.size(); ++r) {
      rel.width_ratios.push_back(s.mean_widths[r] / bench->mean_widths[r]);
    }
    out.push_back(std::move(rel));
  }
  return out;
}

}  // namespace evr
