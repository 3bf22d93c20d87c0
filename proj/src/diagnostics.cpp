#include "evr/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "evr/posterior.hpp"

namespace evr {

double pit(const Eigen::VectorXd& replicates, double y) {
  if (replicates.size() == 0) {
    throw std::invalid_argument("pit: empty replicates");
  }
  return static_cast<double>((replicates.array() < y).count()) /
         replicates.size();
}

double bayes_pval(const Eigen::VectorXd& rl_draws, const Eigen::VectorXd& y_s,
                  double return_period) {
  if (y_s.size() == 0) {
    throw std::invalid_argument("bayes_pval: empty station sample");
  }
  const double level = 1.0 - 1.0 / return_period;
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("bayes_pval: invalid return period");
  }
  const double q = quantile_type7(
      std::vector<double>(y_s.data(), y_s.data() + y_s.size()), level);
  return static_cast<double>((rl_draws.array() < q).count()) / rl_draws.size();
}

double pval_star(const std::vector<double>& station_pvals) {
  if (station_pvals.empty()) {
    throw std::invalid_argument("pval_star: empty input");
  }
  int in = 0;
  for (double p : station_pvals) {
    if (p > 0.05 && p < 0.95) ++in;
  }
  return static_cast<double>(in) / station_pvals.size();
}

double crps_sample(const Eigen::VectorXd& replicates, double y) {
  const int B = static_cast<int>(replicates.size());
  if (B < 1) {
    throw std::invalid_argument("crps_sample: empty replicates");
  }
  const double term1 = (replicates.array() - y).abs().mean();
  if (B == 1) return term1;
  std::vector<double> x(replicates.data(), replicates.data() + B);
  std::sort(x.begin(), x.end());
  // sum over all ordered pairs |x_i - x_j| from the sorted sample
  double pair_sum = 0.0;
  for (int i = 0; i < B; ++i) {
    pair_sum += (2.0 * i - B + 1.0) * x[i];
  }
  const double spread = 2.0 * pair_sum / (static_cast<double>(B) * B);
  return term1 - 0.5 * spread;
}

double acrps(const std::vector<double>& crps_values) {
  if (crps_values.empty()) {
    throw std::invalid_argument("acrps: empty input");
  }
  double s = 0.0;
  for (double v : crps_values) s += v;
  return s / crps_values.size();
}

LooResult loo_ic(const Eigen::MatrixXd& log_lik) {
  const int B = static_cast<int>(log_lik.rows());
  const int N = static_cast<int>(log_lik.cols());
  if (B < 2 || N < 1) {
    throw std::invalid_argument("loo_ic: degenerate log-likelihood matrix");
  }
  LooResult res;
  res.pointwise.resize(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    const Eigen::VectorXd ll = log_lik.col(n);
    if (!ll.allFinite()) {
      throw std::invalid_argument("loo_ic: non-finite log-likelihood");
    }
    // importance weights 1/p(y_n | theta_b), truncated at mean * sqrt(B)
    const Eigen::ArrayXd lw = -ll.array();
    const double shift = lw.maxCoeff();
    Eigen::ArrayXd w = (lw - shift).exp();
    const double cap = w.mean() * std::sqrt(static_cast<double>(B));
    double w_sum = 0.0, w_max = 0.0;
    for (int b = 0; b < B; ++b) {
      w[b] = std::min(w[b], cap);
      w_sum += w[b];
      w_max = std::max(w_max, w[b]);
    }
    if (w_max / w_sum > 0.5) res.degenerate.push_back(n);
    // log( sum w p / sum w ) via logsumexp
    double num = 0.0;
    for (int b = 0; b < B; ++b) {
      num += w[b] * std::exp(ll[b] - ll.maxCoeff());
    }
    res.pointwise[static_cast<std::size_t>(n)] =
        std::log(num) + ll.maxCoeff() - std::log(w_sum);
    res.elpd += res.pointwise[static_cast<std::size_t>(n)];
  }
  res.looic = -2.0 * res.elpd;
  return res;
}

std::vector<double> DiagnosticsReport::pooled_pit() const {
  std::vector<double> out;
  for (const auto& st : stations) {
    out.insert(out.end(), st.pit_values.begin(), st.pit_values.end());
  }
  return out;
}

std::string DiagnosticsReport::to_json() const {
  nlohmann::json j;
  j["model"] = model;
  if (std::isfinite(looic)) j["looic"] = looic;
  j["stations"] = nlohmann::json::array();
  for (const auto& st : stations) {
    nlohmann::json s;
    s["station_id"] = st.station_id;
    s["pit"] = st.pit_values;
    s["crps"] = st.crps_values;
    s["acrps"] = st.acrps_value;
    s["return_periods"] = st.return_periods;
    s["pvals"] = st.pvals;
    s["interval_widths"] = st.interval_widths;
    j["stations"].push_back(s);
  }
  return j.dump(2);
}

std::string DiagnosticsReport::to_csv() const {
  std::ostringstream os;
  os << "station,metric,period,value\n";
  os.precision(12);
  for (const auto& st : stations) {
    for (double v : st.pit_values) {
      os << st.station_id << ",pit,," << v << "\n";
    }
    os << st.station_id << ",acrps,," << st.acrps_value << "\n";
    for (std::size_t r = 0; r < st.return_periods.size(); ++r) {
      os << st.station_id << ",pval," << st.return_periods[r] << ","
         << st.pvals[r] << "\n";
      os << st.station_id << ",interval_width," << st.return_periods[r] << ","
         << st.interval_widths[r] << "\n";
    }
  }
  return os.str();
}

double ks_uniform_statistic(std::vector<double> values) {
  if (values.empty()) {
    throw std::invalid_argument("ks_uniform_statistic: empty input");
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    d = std::max(d, std::abs((i + 1.0) / n - values[i]));
    d = std::max(d, std::abs(values[i] - i / n));
  }
  return d;
}

}  // namespace evr
