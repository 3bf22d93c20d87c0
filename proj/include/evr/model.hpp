#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "evr/gev.hpp"
#include "evr/splines.hpp"

namespace evr {

enum class TransformKind { Identity, Log };

// Per-covariate transform + centering record, reusable out of sample.
struct Standardizer {
  std::vector<TransformKind> transforms;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Eigen::VectorXd apply_row(const Eigen::VectorXd& raw) const;
};

// Applies transforms, centers to mean 0 / sd 1; throws on constant columns
// or nonpositive values under the log transform.
Eigen::MatrixXd standardize_covariates(const Eigen::MatrixXd& raw,
                                       const std::vector<TransformKind>& tr,
                                       Standardizer* record);

struct Dataset {
  std::vector<std::string> station_ids;
  std::vector<Eigen::VectorXd> maxima;  // ragged, one vector per station
  Eigen::MatrixXd X;                    // S x M, standardized
  std::vector<std::string> covariate_names;
  int n_stations() const { return static_cast<int>(maxima.size()); }
  int n_covariates() const { return static_cast<int>(X.cols()); }
  int n_obs() const;
};

struct PriorCalibration {
  Eigen::Vector3d m_hat = Eigen::Vector3d::Zero();  // (psi, tau, phi) means
  Eigen::Vector3d s_hat = Eigen::Vector3d::Ones();  // (psi, tau, phi) sds
};

enum class ModelFamily { Linear, Splines, SplinesHS };

std::string family_name(ModelFamily f);
ModelFamily family_from_name(const std::string& name);

struct ModelSpec {
  ModelFamily family = ModelFamily::Linear;
  int n_basis = 20;  // K, per covariate
  PriorCalibration calib;
  double coef_sd = 2.0;         // beta prior scale
  double scale_prior_sd = 2.0;  // half-normal scale for kappa and omega
};

// Index map over the flat unconstrained parameter vector. Blocks per
// theta in {psi, tau, phi} (t = 0, 1, 2):
//   intercept; beta (Linear/Splines); gamma_raw per covariate (Splines);
//   alpha_raw per covariate (SplinesHS); u_raw; log_kappa;
//   log_omega per covariate (Splines);
//   log_delta / log_lambda per covariate and log_eta (SplinesHS).
// Scale-bearing blocks are non-centered: raw coordinates are standard
// normal and get multiplied by their scales in assemble_predictor.
class ParamLayout {
 public:
  ParamLayout(ModelFamily family, int n_stations, int n_covariates,
              int n_basis);

  int dim() const { return dim_; }
  ModelFamily family() const { return family_; }
  int n_stations() const { return S_; }
  int n_covariates() const { return M_; }
  int n_basis() const { return K_; }

  int intercept(int t) const;
  int beta(int t) const;        // offset of length-M block
  int gamma(int t, int m) const;  // offset of length-(K-2) block
  int alpha(int t, int m) const;  // offset of length-(K-1) block
  int u(int t) const;           // offset of length-S block
  int log_kappa(int t) const;
  int log_omega(int t, int m) const;
  int log_delta(int t, int m) const;  // offset of length-(K-1) block
  int log_lambda(int t, int m) const;
  int log_eta(int t) const;

  std::vector<std::string> coord_names() const;

 private:
  ModelFamily family_;
  int S_, M_, K_, dim_;
  int theta_base_[3];
  int theta_size_ = 0;
};

struct LinkedPredictors {
  Eigen::VectorXd psi, tau, phi;
  const Eigen::VectorXd& theta(int t) const {
    return t == 0 ? psi : (t == 1 ? tau : phi);
  }
};

LinkedPredictors assemble_predictor(const ModelSpec& spec,
                                    const ParamLayout& layout,
                                    const Eigen::VectorXd& v,
                                    const std::vector<GroupDesign>& designs,
                                    const Eigen::MatrixXd& X);

double log_joint(const ModelSpec& spec, const ParamLayout& layout,
                 const Eigen::VectorXd& v, const Dataset& data,
                 const std::vector<GroupDesign>& designs);

// Returns log_joint and fills grad (zero in the sentinel region).
double log_joint_grad(const ModelSpec& spec, const ParamLayout& layout,
                      const Eigen::VectorXd& v, const Dataset& data,
                      const std::vector<GroupDesign>& designs,
                      Eigen::VectorXd& grad);

// Scalar log-prior pieces, shared with the exploratory station fit.
double normal_lpdf(double x, double mean, double sd);
double half_normal_lpdf(double x, double sd);
double half_cauchy_lpdf(double x, double scale);

}  // namespace evr
