#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "evr/model.hpp"
#include "evr/sampler.hpp"

namespace evr {

enum class IngestError {
  FileNotFound,
  Malformed,
  DuplicateKey,
  NonpositiveMaximum,
  MissingCovariates,
  LogOfNonpositive,
};

class IngestionError : public std::runtime_error {
 public:
  IngestionError(IngestError code, const std::string& what)
      : std::runtime_error(what), code(code) {}
  IngestError code;
};

// Joined raw station panel, kept pre-standardization so cross-validation
// can rebuild training-only datasets.
struct RawPanel {
  std::vector<std::string> station_ids;
  std::vector<Eigen::VectorXd> maxima;   // per station
  std::vector<Eigen::VectorXd> years;    // per station, same lengths
  Eigen::MatrixXd X_raw;                 // S x M, pre-transform
  std::vector<std::string> covariate_names;
  std::vector<TransformKind> transforms;
  int n_stations() const { return static_cast<int>(station_ids.size()); }
};

struct IngestionReport {
  int maxima_rows = 0;
  int covariate_rows = 0;
  std::vector<std::string> notes;  // dropped rows with reasons
};

// Delimited text with header; maxima: station_id,year,maximum;
// covariates: station_id followed by named columns. Transforms are looked
// up by column name (Identity when absent).
RawPanel load_raw(const std::string& maxima_path,
                  const std::string& covariates_path,
                  const std::map<std::string, TransformKind>& transforms,
                  IngestionReport* report = nullptr);

// Standardized dataset over a subset of stations (all when empty).
Dataset build_dataset(const RawPanel& panel, const std::vector<int>& stations,
                      Standardizer* record);

struct GroundTruth {
  Eigen::MatrixXd theta;       // S x 3 linked parameters (psi, tau, phi)
  Eigen::Vector3d intercepts;
  Eigen::Vector3d kappa;
  std::vector<int> active;     // indices of covariates with nonzero effects
};

struct SimOptions {
  int n_stations = 20;
  int n_blocks = 33;
  int n_covariates = 4;
  int n_active = 2;
  bool nonlinear = true;
  double effect_scale = 0.45;
  Eigen::Vector3d intercepts{5.7, -1.4, 0.05};
  Eigen::Vector3d kappa{0.15, 0.08, 0.03};
  std::uint64_t seed = 1;
};

struct SyntheticBasin {
  RawPanel panel;
  GroundTruth truth;
};

SyntheticBasin simulate_basin(const SimOptions& opt);

void write_maxima_csv(const std::string& path, const RawPanel& panel);
void write_covariates_csv(const std::string& path, const RawPanel& panel);
void write_truth_json(const std::string& path, const GroundTruth& truth);

struct RunConfig {
  std::string maxima_path;
  std::string covariates_path;
  std::string out_dir = "run";
  std::map<std::string, TransformKind> transforms;
  std::string model = "splines-hs";
  int n_basis = 20;
  std::vector<double> return_periods = {50.0, 100.0};
  int cv_folds = 31;
  SamplerConfig sampler;
  // exploratory station fits are cheap, short chains suffice
  SamplerConfig station_sampler = {.n_chains = 2, .n_warmup = 400,
                                   .n_draws = 400};
  SimOptions sim;

  void validate() const;  // throws on inconsistent settings
};

RunConfig load_config(const std::string& path);
void write_config(const std::string& path, const RunConfig& cfg);

}  // namespace evr
