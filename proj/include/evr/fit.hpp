#pragma once

#include <vector>

#include "evr/io.hpp"
#include "evr/model.hpp"
#include "evr/posterior.hpp"
#include "evr/sampler.hpp"
#include "evr/splines.hpp"

namespace evr {

// Everything a sampler run needs for one model family on one training set.
struct FitInputs {
  ModelSpec spec;
  ParamLayout layout;
  Dataset data;
  std::vector<DecomposedBasis> bases;   // empty for Linear
  std::vector<GroupDesign> designs;     // empty for Linear
  Standardizer std_rec;
};

// Adapts the regression log-joint to the sampler interface.
class GevRegressionTarget : public LogDensity {
 public:
  explicit GevRegressionTarget(const FitInputs& inputs) : in_(inputs) {}
  int dim() const override { return in_.layout.dim(); }
  double value_grad(const Eigen::VectorXd& pos,
                    Eigen::VectorXd* grad) const override;

 private:
  const FitInputs& in_;
};

// Exploratory station fits on the training subset -> linked-scale prior
// calibration. `clamped` collects stations whose shape estimate had to be
// pulled inside (-0.5, 0.5).
PriorCalibration calibrate_from_panel(const RawPanel& panel,
                                      const std::vector<int>& stations,
                                      const SamplerConfig& station_cfg,
                                      std::vector<int>* clamped = nullptr);

// Standardizes covariates and builds spline designs from the training
// stations only (all stations when the subset is empty).
FitInputs prepare_fit(const RawPanel& panel, const std::vector<int>& stations,
                      ModelFamily family, int n_basis,
                      const PriorCalibration& calib);

// Initial point: intercepts at the calibrated means, every other
// coordinate NaN so the sampler jitters it.
Eigen::VectorXd default_init(const FitInputs& inputs);

struct FitResult {
  PosteriorDraws draws;
  double max_rhat = 0.0;
  double min_ess = 0.0;
};

FitResult fit_model(const FitInputs& inputs, SamplerConfig cfg);

// Per-draw, per-observation GEV log-likelihood (B x total blocks), in
// station-major block order. Feeds the leave-one-out criterion.
Eigen::MatrixXd log_lik_matrix(const Eigen::MatrixXd& flat_draws,
                               const FitInputs& inputs);

}  // namespace evr
