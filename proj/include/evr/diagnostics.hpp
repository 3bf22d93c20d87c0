#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace evr {

// Fraction of predictive replicates strictly below the observation.
double pit(const Eigen::VectorXd& replicates, double y);

// P[Q_draw < q_{1-1/R}(y_s)] with a type-7 empirical quantile.
double bayes_pval(const Eigen::VectorXd& rl_draws, const Eigen::VectorXd& y_s,
                  double return_period);

// Proportion of station p-values inside (0.05, 0.95).
double pval_star(const std::vector<double>& station_pvals);

// Energy-form CRPS: mean|X - y| - 0.5 mean|X - X'|, exact over all pairs
// (computed from the sorted sample in O(B log B)).
double crps_sample(const Eigen::VectorXd& replicates, double y);

double acrps(const std::vector<double>& crps_values);

struct LooResult {
  double looic = 0.0;
  double elpd = 0.0;
  std::vector<double> pointwise;       // elpd per observation
  std::vector<int> degenerate;         // observations with collapsed weights
};

// Importance-sampling LOO with weights truncated at mean * sqrt(B).
LooResult loo_ic(const Eigen::MatrixXd& log_lik);  // B x N

// Per-station scoring block of a model evaluated on held-out data.
struct StationScores {
  std::string station_id;
  std::vector<double> pit_values;          // one per block
  std::vector<double> crps_values;         // one per block
  double acrps_value = 0.0;
  std::vector<double> return_periods;
  std::vector<double> pvals;               // per return period
  std::vector<double> interval_widths;     // 90% widths per return period
};

struct DiagnosticsReport {
  std::string model;
  std::vector<StationScores> stations;
  double looic = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> pooled_pit() const;
  std::string to_json() const;
  // Long-format rows: station, metric, period, value.
  std::string to_csv() const;
};

// Kolmogorov-Smirnov statistic against U(0,1).
double ks_uniform_statistic(std::vector<double> values);

}  // namespace evr
