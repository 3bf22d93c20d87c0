#include "evr/model.hpp"

#include <cmath>
#include <stdexcept>

namespace evr {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Half-Cauchy log-density derivative w.r.t. log(x).
double hc_dlogx(double x, double scale) {
  const double r2 = (x / scale) * (x / scale);
  return -2.0 * r2 / (1.0 + r2);
}

}  // namespace

double normal_lpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

double half_normal_lpdf(double x, double sd) {
  return 0.69314718055994530942 + normal_lpdf(x, 0.0, sd);
}

double half_cauchy_lpdf(double x, double scale) {
  const double r = x / scale;
  return std::log(2.0 / (3.14159265358979323846 * scale)) - std::log1p(r * r);
}

int Dataset::n_obs() const {
  int n = 0;
  for (const auto& y : maxima) n += static_cast<int>(y.size());
  return n;
}

Eigen::VectorXd Standardizer::apply_row(const Eigen::VectorXd& raw) const {
  const int M = static_cast<int>(transforms.size());
  if (raw.size() != M) {
    throw std::invalid_argument("Standardizer: covariate count mismatch");
  }
  Eigen::VectorXd out(M);
  for (int m = 0; m < M; ++m) {
    double v = raw[m];
    if (transforms[m] == TransformKind::Log) {
      if (!(v > 0.0)) {
        throw std::invalid_argument(
            "Standardizer: nonpositive value under log transform");
      }
      v = std::log(v);
    }
    out[m] = (v - mean[m]) / sd[m];
  }
  return out;
}

Eigen::MatrixXd standardize_covariates(const Eigen::MatrixXd& raw,
                                       const std::vector<TransformKind>& tr,
                                       Standardizer* record) {
  const int S = static_cast<int>(raw.rows());
  const int M = static_cast<int>(raw.cols());
  if (static_cast<int>(tr.size()) != M) {
    throw std::invalid_argument("standardize_covariates: transform count");
  }
  Eigen::MatrixXd X(S, M);
  Eigen::VectorXd mean(M), sd(M);
  for (int m = 0; m < M; ++m) {
    for (int s = 0; s < S; ++s) {
      double v = raw(s, m);
      if (tr[m] == TransformKind::Log) {
        if (!(v > 0.0)) {
          throw std::invalid_argument(
              "standardize_covariates: nonpositive value under log transform");
        }
        v = std::log(v);
      }
      X(s, m) = v;
    }
    mean[m] = X.col(m).mean();
    const double var =
        (X.col(m).array() - mean[m]).square().sum() / (S - 1.0);
    sd[m] = std::sqrt(var);
    if (!(sd[m] > 0.0)) {
      throw std::invalid_argument(
          "standardize_covariates: constant covariate column");
    }
    X.col(m) = (X.col(m).array() - mean[m]) / sd[m];
  }
  if (record != nullptr) {
    record->transforms = tr;
    record->mean = mean;
    record->sd = sd;
  }
  return X;
}

std::string family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::Linear:
      return "linear";
    case ModelFamily::Splines:
      return "splines";
    case ModelFamily::SplinesHS:
      return "splines-hs";
  }
  return "unknown";
}

ModelFamily family_from_name(const std::string& name) {
  if (name == "linear") return ModelFamily::Linear;
  if (name == "splines") return ModelFamily::Splines;
  if (name == "splines-hs" || name == "splines_hs") return ModelFamily::SplinesHS;
  throw std::invalid_argument("unknown model family: " + name);
}

ParamLayout::ParamLayout(ModelFamily family, int n_stations, int n_covariates,
                         int n_basis)
    : family_(family), S_(n_stations), M_(n_covariates), K_(n_basis) {
  int size = 1;  // intercept
  switch (family_) {
    case ModelFamily::Linear:
      size += M_;
      break;
    case ModelFamily::Splines:
      size += M_ + M_ * (K_ - 2);
      break;
    case ModelFamily::SplinesHS:
      size += M_ * (K_ - 1);
      break;
  }
  size += S_ + 1;  // u_raw, log_kappa
  if (family_ == ModelFamily::Splines) size += M_;
  if (family_ == ModelFamily::SplinesHS) size += M_ * (K_ - 1) + M_ + 1;
  theta_size_ = size;
  for (int t = 0; t < 3; ++t) theta_base_[t] = t * size;
  dim_ = 3 * size;
}

int ParamLayout::intercept(int t) const { return theta_base_[t]; }

int ParamLayout::beta(int t) const { return theta_base_[t] + 1; }

int ParamLayout::gamma(int t, int m) const {
  return theta_base_[t] + 1 + M_ + m * (K_ - 2);
}

int ParamLayout::alpha(int t, int m) const {
  return theta_base_[t] + 1 + m * (K_ - 1);
}

int ParamLayout::u(int t) const {
  int off = theta_base_[t] + 1;
  switch (family_) {
    case ModelFamily::Linear:
      off += M_;
      break;
    case ModelFamily::Splines:
      off += M_ + M_ * (K_ - 2);
      break;
    case ModelFamily::SplinesHS:
      off += M_ * (K_ - 1);
      break;
  }
  return off;
}

int ParamLayout::log_kappa(int t) const { return u(t) + S_; }

int ParamLayout::log_omega(int t, int m) const {
  return log_kappa(t) + 1 + m;
}

int ParamLayout::log_delta(int t, int m) const {
  return log_kappa(t) + 1 + m * (K_ - 1);
}

int ParamLayout::log_lambda(int t, int m) const {
  return log_kappa(t) + 1 + M_ * (K_ - 1) + m;
}

int ParamLayout::log_eta(int t) const {
  return log_kappa(t) + 1 + M_ * (K_ - 1) + M_;
}

std::vector<std::string> ParamLayout::coord_names() const {
  static const char* theta[3] = {"psi", "tau", "phi"};
  std::vector<std::string> names(static_cast<std::size_t>(dim_));
  for (int t = 0; t < 3; ++t) {
    const std::string th = theta[t];
    names[intercept(t)] = "beta0_" + th;
    if (family_ != ModelFamily::SplinesHS) {
      for (int m = 0; m < M_; ++m) {
        names[beta(t) + m] = "beta_" + th + "_" + std::to_string(m);
      }
    }
    if (family_ == ModelFamily::Splines) {
      for (int m = 0; m < M_; ++m) {
        for (int k = 0; k < K_ - 2; ++k) {
          names[gamma(t, m) + k] =
              "gamma_" + th + "_" + std::to_string(m) + "_" + std::to_string(k);
        }
        names[log_omega(t, m)] = "log_omega_" + th + "_" + std::to_string(m);
      }
    }
    if (family_ == ModelFamily::SplinesHS) {
      for (int m = 0; m < M_; ++m) {
        for (int k = 0; k < K_ - 1; ++k) {
          names[alpha(t, m) + k] =
              "alpha_" + th + "_" + std::to_string(m) + "_" + std::to_string(k);
          names[log_delta(t, m) + k] = "log_delta_" + th + "_" +
                                       std::to_string(m) + "_" +
                                       std::to_string(k);
        }
        names[log_lambda(t, m)] = "log_lambda_" + th + "_" + std::to_string(m);
      }
      names[log_eta(t)] = "log_eta_" + th;
    }
    for (int s = 0; s < S_; ++s) {
      names[u(t) + s] = "u_" + th + "_" + std::to_string(s);
    }
    names[log_kappa(t)] = "log_kappa_" + th;
  }
  return names;
}

LinkedPredictors assemble_predictor(const ModelSpec& spec,
                                    const ParamLayout& layout,
                                    const Eigen::VectorXd& v,
                                    const std::vector<GroupDesign>& designs,
                                    const Eigen::MatrixXd& X) {
  const int S = layout.n_stations();
  const int M = layout.n_covariates();
  const int K = layout.n_basis();
  LinkedPredictors pred;
  for (int t = 0; t < 3; ++t) {
    Eigen::VectorXd theta =
        Eigen::VectorXd::Constant(S, v[layout.intercept(t)]);
    if (spec.family != ModelFamily::SplinesHS && M > 0) {
      theta += X * v.segment(layout.beta(t), M);
    }
    if (spec.family == ModelFamily::Splines) {
      for (int m = 0; m < M; ++m) {
        const double omega = std::exp(v[layout.log_omega(t, m)]);
        theta += designs[m].Z.rightCols(K - 2) *
                 (omega * v.segment(layout.gamma(t, m), K - 2));
      }
    }
    if (spec.family == ModelFamily::SplinesHS) {
      const double eta = std::exp(v[layout.log_eta(t)]);
      for (int m = 0; m < M; ++m) {
        const double lambda = std::exp(v[layout.log_lambda(t, m)]);
        const Eigen::ArrayXd sdk =
            eta * lambda *
            v.segment(layout.log_delta(t, m), K - 1).array().exp().sqrt();
        theta += designs[m].Z *
                 (sdk * v.segment(layout.alpha(t, m), K - 1).array()).matrix();
      }
    }
    const double kappa = std::exp(v[layout.log_kappa(t)]);
    theta += kappa * v.segment(layout.u(t), S);
    if (t == 0) pred.psi = std::move(theta);
    else if (t == 1) pred.tau = std::move(theta);
    else pred.phi = std::move(theta);
  }
  return pred;
}

namespace {

// Prior terms plus log-Jacobians of the log-scale transforms; the
// non-centered raw blocks carry standard-normal terms.
double log_prior(const ModelSpec& spec, const ParamLayout& layout,
                 const Eigen::VectorXd& v) {
  const int S = layout.n_stations();
  const int M = layout.n_covariates();
  const int K = layout.n_basis();
  double lp = 0.0;
  for (int t = 0; t < 3; ++t) {
    lp += normal_lpdf(v[layout.intercept(t)], spec.calib.m_hat[t],
                      2.0 * spec.calib.s_hat[t]);
    if (spec.family != ModelFamily::SplinesHS) {
      for (int m = 0; m < M; ++m) {
        lp += normal_lpdf(v[layout.beta(t) + m], 0.0, spec.coef_sd);
      }
    }
    if (spec.family == ModelFamily::Splines) {
      for (int m = 0; m < M; ++m) {
        const Eigen::VectorXd g = v.segment(layout.gamma(t, m), K - 2);
        lp += -(K - 2) * kLogSqrt2Pi - 0.5 * g.squaredNorm();
        const double lw = v[layout.log_omega(t, m)];
        lp += half_normal_lpdf(std::exp(lw), spec.scale_prior_sd) + lw;
      }
    }
    if (spec.family == ModelFamily::SplinesHS) {
      for (int m = 0; m < M; ++m) {
        const Eigen::VectorXd a = v.segment(layout.alpha(t, m), K - 1);
        lp += -(K - 1) * kLogSqrt2Pi - 0.5 * a.squaredNorm();
        for (int k = 0; k < K - 1; ++k) {
          const double ld = v[layout.log_delta(t, m) + k];
          lp += half_cauchy_lpdf(std::exp(ld), 1.0) + ld;
        }
        const double ll = v[layout.log_lambda(t, m)];
        lp += half_cauchy_lpdf(std::exp(ll), 1.0) + ll;
      }
      const double le = v[layout.log_eta(t)];
      lp += half_cauchy_lpdf(std::exp(le), spec.calib.s_hat[t]) + le;
    }
    const Eigen::VectorXd u = v.segment(layout.u(t), S);
    lp += -S * kLogSqrt2Pi - 0.5 * u.squaredNorm();
    const double lk = v[layout.log_kappa(t)];
    lp += half_normal_lpdf(std::exp(lk), spec.scale_prior_sd) + lk;
  }
  return lp;
}

}  // namespace

double log_joint(const ModelSpec& spec, const ParamLayout& layout,
                 const Eigen::VectorXd& v, const Dataset& data,
                 const std::vector<GroupDesign>& designs) {
  const LinkedPredictors pred = assemble_predictor(spec, layout, v, designs,
                                                   data.X);
  double ll = 0.0;
  for (int s = 0; s < data.n_stations(); ++s) {
    if (!std::isfinite(pred.psi[s]) || !std::isfinite(pred.tau[s]) ||
        !std::isfinite(pred.phi[s])) {
      return kLogZero;
    }
    const GevParams p{std::exp(pred.psi[s]),
                      std::exp(pred.psi[s] + pred.tau[s]),
                      shape_link_inverse(pred.phi[s])};
    if (!std::isfinite(p.mu) || !std::isfinite(p.sigma) || p.sigma <= 0.0) {
      return kLogZero;
    }
    for (double y : data.maxima[s]) {
      const double lp = gev_logpdf(y, p);
      if (!std::isfinite(lp)) return kLogZero;
      ll += lp;
    }
  }
  return ll + log_prior(spec, layout, v);
}

double log_joint_grad(const ModelSpec& spec, const ParamLayout& layout,
                      const Eigen::VectorXd& v, const Dataset& data,
                      const std::vector<GroupDesign>& designs,
                      Eigen::VectorXd& grad) {
  const int S = layout.n_stations();
  const int M = layout.n_covariates();
  const int K = layout.n_basis();
  grad = Eigen::VectorXd::Zero(layout.dim());

  const LinkedPredictors pred = assemble_predictor(spec, layout, v, designs,
                                                   data.X);
  // Likelihood value and its station-wise partials on the linked scale.
  double ll = 0.0;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(S, 3);  // d ll / d theta_s
  for (int s = 0; s < S; ++s) {
    if (!std::isfinite(pred.psi[s]) || !std::isfinite(pred.tau[s]) ||
        !std::isfinite(pred.phi[s])) {
      return kLogZero;
    }
    const double mu = std::exp(pred.psi[s]);
    const double sigma = std::exp(pred.psi[s] + pred.tau[s]);
    if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma <= 0.0) {
      return kLogZero;
    }
    const double xi = shape_link_inverse(pred.phi[s]);
    const double dxi_dphi = shape_link_inverse_deriv(pred.phi[s]);
    const GevParams p{mu, sigma, xi};
    for (double y : data.maxima[s]) {
      const double lp = gev_logpdf(y, p);
      if (!std::isfinite(lp)) {
        grad.setZero();
        return kLogZero;
      }
      ll += lp;
      const GevScore sc = gev_score(y, p);
      g(s, 0) += sc.d_mu * mu + sc.d_sigma * sigma;
      g(s, 1) += sc.d_sigma * sigma;
      g(s, 2) += sc.d_xi * dxi_dphi;
    }
  }

  for (int t = 0; t < 3; ++t) {
    const Eigen::VectorXd gt = g.col(t);
    // intercept
    {
      const double sd = 2.0 * spec.calib.s_hat[t];
      const double b0 = v[layout.intercept(t)];
      grad[layout.intercept(t)] =
          gt.sum() - (b0 - spec.calib.m_hat[t]) / (sd * sd);
    }
    if (spec.family != ModelFamily::SplinesHS && M > 0) {
      grad.segment(layout.beta(t), M) =
          data.X.transpose() * gt -
          v.segment(layout.beta(t), M) / (spec.coef_sd * spec.coef_sd);
    }
    if (spec.family == ModelFamily::Splines) {
      for (int m = 0; m < M; ++m) {
        const double omega = std::exp(v[layout.log_omega(t, m)]);
        const Eigen::VectorXd w =
            designs[m].Z.rightCols(K - 2).transpose() * gt;
        const Eigen::VectorXd graw = v.segment(layout.gamma(t, m), K - 2);
        grad.segment(layout.gamma(t, m), K - 2) = omega * w - graw;
        grad[layout.log_omega(t, m)] =
            omega * graw.dot(w) -
            omega * omega / (spec.scale_prior_sd * spec.scale_prior_sd) + 1.0;
      }
    }
    if (spec.family == ModelFamily::SplinesHS) {
      const double eta = std::exp(v[layout.log_eta(t)]);
      double eta_acc = 0.0;
      for (int m = 0; m < M; ++m) {
        const double lambda = std::exp(v[layout.log_lambda(t, m)]);
        const Eigen::ArrayXd delta =
            v.segment(layout.log_delta(t, m), K - 1).array().exp();
        const Eigen::ArrayXd sdk = eta * lambda * delta.sqrt();
        const Eigen::ArrayXd w = (designs[m].Z.transpose() * gt).array();
        const Eigen::ArrayXd araw =
            v.segment(layout.alpha(t, m), K - 1).array();
        grad.segment(layout.alpha(t, m), K - 1) = (sdk * w - araw).matrix();
        const Eigen::ArrayXd q = sdk * araw * w;  // d ll / d log(scale parts)
        for (int k = 0; k < K - 1; ++k) {
          grad[layout.log_delta(t, m) + k] =
              0.5 * q[k] + hc_dlogx(delta[k], 1.0) + 1.0;
        }
        grad[layout.log_lambda(t, m)] = q.sum() + hc_dlogx(lambda, 1.0) + 1.0;
        eta_acc += q.sum();
      }
      grad[layout.log_eta(t)] =
          eta_acc + hc_dlogx(eta, spec.calib.s_hat[t]) + 1.0;
    }
    const double kappa = std::exp(v[layout.log_kappa(t)]);
    const Eigen::VectorXd uraw = v.segment(layout.u(t), S);
    grad.segment(layout.u(t), S) = kappa * gt - uraw;
    grad[layout.log_kappa(t)] =
        kappa * uraw.dot(gt) -
        kappa * kappa / (spec.scale_prior_sd * spec.scale_prior_sd) + 1.0;
  }
  return ll + log_prior(spec, layout, v);
}

}  // namespace evr
