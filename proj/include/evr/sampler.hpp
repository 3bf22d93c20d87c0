#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace evr {

// Differentiable unnormalized log-density over R^dim.
class LogDensity {
 public:
  virtual ~LogDensity() = default;
  virtual int dim() const = 0;
  // Returns the log-density; fills grad when non-null.
  virtual double value_grad(const Eigen::VectorXd& pos,
                            Eigen::VectorXd* grad) const = 0;
};

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 1000;
  int n_draws = 1000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 1;
  double init_jitter = 0.5;
  // Coordinates held at these values at initialization (others jittered
  // uniformly in [-init_jitter, init_jitter]).
  std::optional<Eigen::VectorXd> init;
};

struct ChainStats {
  int divergences = 0;
  double step_size = 0.0;
  std::vector<int> tree_depths;
};

struct PosteriorDraws {
  std::vector<Eigen::MatrixXd> chains;       // each n_draws x dim
  std::vector<Eigen::VectorXd> log_density;  // per chain, length n_draws
  std::vector<ChainStats> stats;
  int n_chains = 0;
  int n_draws = 0;
  int dim = 0;

  int total_divergences() const;
  // All chains stacked in chain order: (n_chains * n_draws) x dim.
  Eigen::MatrixXd flat() const;
  // One coordinate across chains.
  std::vector<Eigen::VectorXd> coordinate(int j) const;
};

PosteriorDraws sample(const LogDensity& target, const SamplerConfig& cfg);

// Split-chain potential scale reduction factor. NaN for zero-variance input.
double rhat(const std::vector<Eigen::VectorXd>& chains);

// Effective sample size via pairwise-summed autocorrelations.
double ess(const std::vector<Eigen::VectorXd>& chains);

}  // namespace evr
