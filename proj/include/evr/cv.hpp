#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evr/diagnostics.hpp"
#include "evr/fit.hpp"
#include "evr/io.hpp"

namespace evr {

// Station-holdout partition: every station appears in exactly one fold.
struct FoldPlan {
  std::vector<std::vector<int>> folds;  // held-out station indices
  int n_stations = 0;
  std::vector<int> training_for(int fold) const;
};

// Shuffled near-equal split of S stations into G folds (deterministic in
// the seed). Throws unless 1 <= G <= S.
FoldPlan partition_folds(int n_stations, int n_folds, std::uint64_t seed);

struct CvOptions {
  std::vector<ModelFamily> families = {ModelFamily::Linear,
                                       ModelFamily::Splines,
                                       ModelFamily::SplinesHS};
  int n_basis = 20;
  std::vector<double> return_periods = {50.0, 100.0};
  int n_folds = 31;
  SamplerConfig sampler;          // per-fold regression fits
  SamplerConfig station_sampler;  // per-fold prior calibration
  std::uint64_t seed = 1;
  int min_training = 10;  // smallest admissible training set
};

struct CvModelEntry {
  std::string model;
  DiagnosticsReport report;  // held-out stations of this fold
  double max_rhat = 0.0;
  double min_ess = 0.0;
  int divergences = 0;
  bool failed = false;
  std::string error;
};

struct CvFoldResult {
  std::vector<int> holdout;
  std::vector<int> training;
  std::vector<CvModelEntry> models;
};

// Per-model metrics pooled over every fold's held-out stations.
struct CvSummary {
  std::string model;
  double acrps_value = 0.0;
  double pit_ks = 0.0;  // KS distance of pooled PIT values from uniform
  std::vector<double> return_periods;
  std::vector<double> pval_star_values;  // per period
  std::vector<double> mean_widths;       // mean 90% width per period
  int n_failed_folds = 0;
};

struct CvResult {
  FoldPlan plan;
  std::vector<CvFoldResult> folds;
  bool partial = false;  // at least one model fit failed

  std::vector<CvSummary> summaries() const;
};

// Station-holdout cross-validation: per fold, priors / standardization /
// knots come from the training stations only and are shared across the
// model families; held-out stations are scored as ungauged predictions.
CvResult run_cv(const RawPanel& panel, const CvOptions& opt);

// Each model's pooled metrics divided by the benchmark model's (ACRPS and
// widths; ratios below one favor the model).
struct RelativeMetrics {
  std::string model;
  double acrps_ratio = 1.0;
  std::vector<double> width_ratios;
};

std::vector<RelativeMetrics> relative_metrics(const CvResult& result,
                                              const std::string& benchmark);

}  // namespace evr
