#include "evr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evr/rng.hpp"

namespace evr {

namespace {

constexpr double kDivergenceThreshold = 1000.0;

double logsumexp2(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct Edge {
  Eigen::VectorXd q, p, grad;
};

struct Tree {
  Edge minus, plus;
  Eigen::VectorXd q_prop, grad_prop;
  double logp_prop = 0.0;
  Eigen::VectorXd rho;
  double log_sum_weight = -std::numeric_limits<double>::infinity();
  double sum_accept = 0.0;
  int n_leapfrog = 0;
  bool ok = false;
  bool divergent = false;
};

class NutsChain {
 public:
  NutsChain(const LogDensity& target, const SamplerConfig& cfg,
            std::uint64_t seed)
      : target_(target),
        cfg_(cfg),
        rng_(seed),
        inv_mass_(Eigen::VectorXd::Ones(target.dim())) {}

  void run(Eigen::MatrixXd& draws, Eigen::VectorXd& logps, ChainStats& stats);

 private:
  void initialize();
  void find_initial_step_size();
  double hamiltonian(const Edge& e, double logp) const {
    return -logp + 0.5 * e.p.dot(inv_mass_.cwiseProduct(e.p));
  }
  void leapfrog(Edge& e, double dir_eps, double& logp);
  Tree build_tree(int depth, int dir, const Edge& from, double h0);
  // One NUTS transition; returns mean acceptance statistic.
  double transition(int& depth_out, bool& divergent_out);
  void adapt(int iter);

  const LogDensity& target_;
  SamplerConfig cfg_;
  Rng rng_;
  Eigen::VectorXd inv_mass_;
  Eigen::VectorXd q_, grad_;
  double logp_ = 0.0;
  double eps_ = 1.0;

  // dual averaging state
  double da_mu_ = 0.0, da_h_ = 0.0, da_log_eps_bar_ = 0.0;
  int da_count_ = 0;

  // mass-matrix accumulation (Welford)
  Eigen::VectorXd wf_mean_, wf_m2_;
  int wf_n_ = 0;
};

void NutsChain::initialize() {
  const int d = target_.dim();
  for (int attempt = 0; attempt < 100; ++attempt) {
    q_.resize(d);
    for (int j = 0; j < d; ++j) {
      double base = 0.0;
      bool fixed = false;
      if (cfg_.init && j < cfg_.init->size() && std::isfinite((*cfg_.init)[j])) {
        base = (*cfg_.init)[j];
        fixed = true;
      }
      q_[j] = fixed ? base
                    : rng_.uniform(-cfg_.init_jitter, cfg_.init_jitter);
    }
    grad_.resize(d);
    logp_ = target_.value_grad(q_, &grad_);
    if (std::isfinite(logp_) && logp_ > -1e299) return;
  }
  throw std::runtime_error(
      "sampler: failed to find a finite starting point after 100 attempts");
}

void NutsChain::leapfrog(Edge& e, double dir_eps, double& logp) {
  e.p += 0.5 * dir_eps * e.grad;
  e.q += dir_eps * inv_mass_.cwiseProduct(e.p);
  logp = target_.value_grad(e.q, &e.grad);
  e.p += 0.5 * dir_eps * e.grad;
}

void NutsChain::find_initial_step_size() {
  eps_ = 0.1;
  Edge e;
  e.q = q_;
  e.grad = grad_;
  e.p.resize(q_.size());
  for (int j = 0; j < e.p.size(); ++j) {
    e.p[j] = rng_.normal() / std::sqrt(inv_mass_[j]);
  }
  const double h0 = hamiltonian(e, logp_);
  double logp = 0.0;
  Edge trial = e;
  leapfrog(trial, eps_, logp);
  double dh = h0 - hamiltonian(trial, logp);
  const int dir = dh > std::log(0.5) ? 1 : -1;
  for (int it = 0; it < 50; ++it) {
    eps_ *= dir > 0 ? 2.0 : 0.5;
    trial = e;
    leapfrog(trial, eps_, logp);
    dh = h0 - hamiltonian(trial, logp);
    if ((dir > 0 && dh <= std::log(0.5)) || (dir < 0 && dh >= std::log(0.5))) {
      break;
    }
  }
  da_mu_ = std::log(10.0 * eps_);
  da_h_ = 0.0;
  da_log_eps_bar_ = std::log(eps_);
  da_count_ = 0;
}

Tree NutsChain::build_tree(int depth, int dir, const Edge& from, double h0) {
  Tree tr;
  if (depth == 0) {
    Edge e = from;
    double logp = 0.0;
    leapfrog(e, dir * eps_, logp);
    const double h = hamiltonian(e, logp);
    const double dh = h0 - h;  // log weight of the new point
    tr.n_leapfrog = 1;
    if (!std::isfinite(h) || -dh > kDivergenceThreshold) {
      tr.divergent = true;
      tr.ok = false;
      tr.sum_accept = 0.0;
      return tr;
    }
    tr.minus = e;
    tr.plus = e;
    tr.q_prop = e.q;
    tr.grad_prop = e.grad;
    tr.logp_prop = logp;
    tr.rho = e.p;
    tr.log_sum_weight = dh;
    tr.sum_accept = std::min(1.0, std::exp(dh));
    tr.ok = true;
    return tr;
  }

  Tree inner = build_tree(depth - 1, dir, from, h0);
  if (!inner.ok) return inner;
  const Edge& grow_from = dir > 0 ? inner.plus : inner.minus;
  Tree outer = build_tree(depth - 1, dir, grow_from, h0);
  inner.n_leapfrog += outer.n_leapfrog;
  inner.sum_accept += outer.sum_accept;
  if (!outer.ok) {
    inner.divergent = outer.divergent;
    inner.ok = false;
    return inner;
  }
  // multinomial sampling between the sub-trees
  const double total = logsumexp2(inner.log_sum_weight, outer.log_sum_weight);
  if (std::log(rng_.uniform()) < outer.log_sum_weight - total) {
    inner.q_prop = outer.q_prop;
    inner.grad_prop = outer.grad_prop;
    inner.logp_prop = outer.logp_prop;
  }
  inner.log_sum_weight = total;
  if (dir > 0) {
    inner.plus = outer.plus;
  } else {
    inner.minus = outer.minus;
  }
  inner.rho += outer.rho;
  // generalized no-U-turn condition across the combined tree
  const Eigen::VectorXd sharp_minus = inv_mass_.cwiseProduct(inner.minus.p);
  const Eigen::VectorXd sharp_plus = inv_mass_.cwiseProduct(inner.plus.p);
  inner.ok = sharp_minus.dot(inner.rho) > 0 && sharp_plus.dot(inner.rho) > 0;
  return inner;
}

double NutsChain::transition(int& depth_out, bool& divergent_out) {
  Edge e;
  e.q = q_;
  e.grad = grad_;
  e.p.resize(q_.size());
  for (int j = 0; j < e.p.size(); ++j) {
    e.p[j] = rng_.normal() / std::sqrt(inv_mass_[j]);
  }
  const double h0 = hamiltonian(e, logp_);

  Edge minus = e, plus = e;
  Eigen::VectorXd q_prop = q_, grad_prop = grad_;
  double logp_prop = logp_;
  Eigen::VectorXd rho = e.p;
  double log_sum_weight = 0.0;
  double sum_accept = 0.0;
  int n_leapfrog = 0;
  divergent_out = false;
  int depth = 0;
  for (; depth < cfg_.max_tree_depth; ++depth) {
    const int dir = rng_.uniform() < 0.5 ? -1 : 1;
    Tree sub = build_tree(depth, dir, dir > 0 ? plus : minus, h0);
    sum_accept += sub.sum_accept;
    n_leapfrog += sub.n_leapfrog;
    if (!sub.ok) {
      divergent_out = sub.divergent;
      break;
    }
    // biased progressive sampling toward the new sub-tree
    const double p_new = std::exp(
        std::min(0.0, sub.log_sum_weight - log_sum_weight));
    if (rng_.uniform() < p_new) {
      q_prop = sub.q_prop;
      grad_prop = sub.grad_prop;
      logp_prop = sub.logp_prop;
    }
    log_sum_weight = logsumexp2(log_sum_weight, sub.log_sum_weight);
    if (dir > 0) {
      plus = sub.plus;
    } else {
      minus = sub.minus;
    }
    rho += sub.rho;
    const Eigen::VectorXd sharp_minus = inv_mass_.cwiseProduct(minus.p);
    const Eigen::VectorXd sharp_plus = inv_mass_.cwiseProduct(plus.p);
    if (!(sharp_minus.dot(rho) > 0 && sharp_plus.dot(rho) > 0)) {
      ++depth;
      break;
    }
  }
  q_ = q_prop;
  grad_ = grad_prop;
  logp_ = logp_prop;
  depth_out = depth;
  return n_leapfrog > 0 ? sum_accept / n_leapfrog : 0.0;
}

void NutsChain::run(Eigen::MatrixXd& draws, Eigen::VectorXd& logps,
                    ChainStats& stats) {
  initialize();
  find_initial_step_size();

  // warmup schedule: step-size buffers around expanding covariance windows
  const int w = cfg_.n_warmup;
  int init_buf = std::min(75, std::max(1, w * 15 / 100));
  int term_buf = std::min(50, std::max(1, w / 10));
  int window = 25;
  if (init_buf + term_buf + window > w) {
    init_buf = std::max(1, w * 15 / 100);
    term_buf = std::max(1, w * 10 / 100);
    window = std::max(1, w - init_buf - term_buf);
  }
  int window_end = init_buf + window;

  wf_mean_ = Eigen::VectorXd::Zero(target_.dim());
  wf_m2_ = Eigen::VectorXd::Zero(target_.dim());
  wf_n_ = 0;

  for (int iter = 0; iter < w; ++iter) {
    int depth = 0;
    bool div = false;
    const double accept = transition(depth, div);

    // dual averaging
    ++da_count_;
    const double eta = 1.0 / (da_count_ + 10.0);
    da_h_ = (1.0 - eta) * da_h_ + eta * (cfg_.target_accept - accept);
    const double log_eps = da_mu_ - std::sqrt(da_count_) / 0.05 * da_h_;
    const double x = std::pow(da_count_, -0.75);
    da_log_eps_bar_ = x * log_eps + (1.0 - x) * da_log_eps_bar_;
    eps_ = std::exp(log_eps);

    const bool in_window = iter >= init_buf && iter < w - term_buf;
    if (in_window) {
      ++wf_n_;
      const Eigen::VectorXd d1 = q_ - wf_mean_;
      wf_mean_ += d1 / wf_n_;
      wf_m2_ += d1.cwiseProduct(q_ - wf_mean_);
      if (iter + 1 == window_end && wf_n_ > 1) {
        const double shrink = wf_n_ / (wf_n_ + 5.0);
        inv_mass_ = shrink * (wf_m2_ / (wf_n_ - 1.0)).array() +
                    (1.0 - shrink) * 1e-3;
        wf_mean_.setZero();
        wf_m2_.setZero();
        wf_n_ = 0;
        window *= 2;
        window_end = std::min(window_end + window, w - term_buf);
        // restart step-size adaptation around the current scale
        eps_ = std::exp(da_log_eps_bar_);
        da_mu_ = std::log(10.0 * eps_);
        da_h_ = 0.0;
        da_count_ = 0;
        da_log_eps_bar_ = std::log(eps_);
      }
    }
  }
  if (w > 0) eps_ = std::exp(da_log_eps_bar_);
  stats.step_size = eps_;

  draws.resize(cfg_.n_draws, target_.dim());
  logps.resize(cfg_.n_draws);
  stats.tree_depths.resize(cfg_.n_draws);
  stats.divergences = 0;
  for (int i = 0; i < cfg_.n_draws; ++i) {
    int depth = 0;
    bool div = false;
    transition(depth, div);
    if (div) ++stats.divergences;
    draws.row(i) = q_;
    logps[i] = logp_;
    stats.tree_depths[i] = depth;
  }
}

}  // namespace

int PosteriorDraws::total_divergences() const {
  int n = 0;
  for (const auto& s : stats) n += s.divergences;
  return n;
}

Eigen::MatrixXd PosteriorDraws::flat() const {
  Eigen::MatrixXd out(n_chains * n_draws, dim);
  for (int c = 0; c < n_chains; ++c) {
    out.middleRows(c * n_draws, n_draws) = chains[c];
  }
  return out;
}

std::vector<Eigen::VectorXd> PosteriorDraws::coordinate(int j) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(chains.size());
  for (const auto& c : chains) out.push_back(c.col(j));
  return out;
}

PosteriorDraws sample(const LogDensity& target, const SamplerConfig& cfg) {
  if (cfg.n_draws < 1) {
    throw std::invalid_argument("sample: n_draws must be at least 1");
  }
  if (!(cfg.target_accept > 0.0 && cfg.target_accept < 1.0)) {
    throw std::invalid_argument("sample: target_accept outside (0,1)");
  }
  PosteriorDraws out;
  out.n_chains = cfg.n_chains;
  out.n_draws = cfg.n_draws;
  out.dim = target.dim();
  out.chains.resize(cfg.n_chains);
  out.log_density.resize(cfg.n_chains);
  out.stats.resize(cfg.n_chains);
  for (int c = 0; c < cfg.n_chains; ++c) {
    NutsChain chain(target, cfg, cfg.seed + static_cast<std::uint64_t>(c));
    chain.run(out.chains[c], out.log_density[c], out.stats[c]);
  }
  return out;
}

namespace {

std::vector<Eigen::VectorXd> split_halves(
    const std::vector<Eigen::VectorXd>& chains) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& c : chains) {
    const int n = static_cast<int>(c.size()) / 2;
    out.push_back(c.head(n));
    out.push_back(c.segment(n, n));
  }
  return out;
}

}  // namespace

double rhat(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) {
    throw std::invalid_argument("rhat: need at least 2 chains");
  }
  for (const auto& c : chains) {
    if (c.size() < 4) throw std::invalid_argument("rhat: need >= 4 draws");
  }
  const auto sp = split_halves(chains);
  const int m = static_cast<int>(sp.size());
  const int n = static_cast<int>(sp[0].size());
  Eigen::VectorXd means(m), vars(m);
  for (int c = 0; c < m; ++c) {
    means[c] = sp[c].mean();
    vars[c] = (sp[c].array() - means[c]).square().sum() / (n - 1.0);
  }
  const double w_var = vars.mean();
  const double grand = means.mean();
  const double b_var =
      n * (means.array() - grand).square().sum() / (m - 1.0);
  if (!(w_var > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double var_plus = (n - 1.0) / n * w_var + b_var / n;
  return std::sqrt(var_plus / w_var);
}

double ess(const std::vector<Eigen::VectorXd>& chains) {
  for (const auto& c : chains) {
    if (c.size() < 4) throw std::invalid_argument("ess: need >= 4 draws");
  }
  const auto sp = split_halves(chains);
  const int m = static_cast<int>(sp.size());
  const int n = static_cast<int>(sp[0].size());
  Eigen::VectorXd means(m), vars(m);
  for (int c = 0; c < m; ++c) {
    means[c] = sp[c].mean();
    vars[c] = (sp[c].array() - means[c]).square().sum() / (n - 1.0);
  }
  const double w_var = vars.mean();
  if (!(w_var > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  double var_plus = (n - 1.0) / n * w_var;
  if (m > 1) {
    const double grand = means.mean();
    var_plus += (means.array() - grand).square().sum() * n / (m - 1.0) / n;
  }

  auto acov = [&](int lag) {
    double acc = 0.0;
    for (int c = 0; c < m; ++c) {
      double s = 0.0;
      for (int i = lag; i < n; ++i) {
        s += (sp[c][i] - means[c]) * (sp[c][i - lag] - means[c]);
      }
      acc += s / n;
    }
    return acc / m;
  };

  // Geyer initial monotone positive pair sums
  double tau = 1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (int lag = 1; lag + 1 < n; lag += 2) {
    const double rho_a = 1.0 - (w_var - acov(lag)) / var_plus;
    const double rho_b = 1.0 - (w_var - acov(lag + 1)) / var_plus;
    double pair = rho_a + rho_b;
    if (pair < 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    tau += 2.0 * pair;
  }
  return static_cast<double>(m) * n / tau;
}

}  // namespace evr
