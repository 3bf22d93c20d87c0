#include "evr/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "evr/gev.hpp"
#include "evr/rng.hpp"

namespace evr {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? ""
                                         : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& ctx, int line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw IngestionError(IngestError::Malformed,
                         ctx + ": line " + std::to_string(line) +
                             ": cannot parse number '" + s + "'");
  }
}

}  // namespace

RawPanel load_raw(const std::string& maxima_path,
                  const std::string& covariates_path,
                  const std::map<std::string, TransformKind>& transforms,
                  IngestionReport* report) {
  IngestionReport local;
  IngestionReport& rep = report ? *report : local;

  std::ifstream mf(maxima_path);
  if (!mf) {
    throw IngestionError(IngestError::FileNotFound,
                         "cannot open maxima file: " + maxima_path);
  }
  std::string line;
  if (!std::getline(mf, line)) {
    throw IngestionError(IngestError::Malformed, "empty maxima file");
  }
  {
    const auto h = split_line(line);
    if (h.size() != 3 || h[0] != "station_id" || h[1] != "year" ||
        h[2] != "maximum") {
      throw IngestionError(IngestError::Malformed,
                           "maxima header must be station_id,year,maximum");
    }
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<double, double>>> by_station;
  std::map<std::string, std::size_t> seen_keys_base;
  int lineno = 1;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty()) {
      rep.notes.push_back("maxima line " + std::to_string(lineno) +
                          ": blank, skipped");
      continue;
    }
    const auto f = split_line(line);
    if (f.size() != 3) {
      throw IngestionError(IngestError::Malformed,
                           "maxima line " + std::to_string(lineno) +
                               ": expected 3 fields");
    }
    const double year = parse_double(f[1], "maxima", lineno);
    const double value = parse_double(f[2], "maxima", lineno);
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw IngestionError(IngestError::NonpositiveMaximum,
                           "maxima line " + std::to_string(lineno) +
                               ": nonpositive maximum for station " + f[0]);
    }
    const std::string key = f[0] + "@" + f[1];
    if (seen_keys_base.count(key)) {
      throw IngestionError(IngestError::DuplicateKey,
                           "duplicate (station, year) key: (" + f[0] + ", " +
                               f[1] + ")");
    }
    seen_keys_base[key] = 1;
    if (!by_station.count(f[0])) order.push_back(f[0]);
    by_station[f[0]].push_back({year, value});
    ++rep.maxima_rows;
  }

  std::ifstream cf(covariates_path);
  if (!cf) {
    throw IngestionError(IngestError::FileNotFound,
                         "cannot open covariates file: " + covariates_path);
  }
  if (!std::getline(cf, line)) {
    throw IngestionError(IngestError::Malformed, "empty covariates file");
  }
  const auto header = split_line(line);
  if (header.empty() || header[0] != "station_id") {
    throw IngestionError(IngestError::Malformed,
                         "covariates header must start with station_id");
  }
  const int M = static_cast<int>(header.size()) - 1;
  std::map<std::string, Eigen::VectorXd> cov_rows;
  lineno = 1;
  while (std::getline(cf, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_line(line);
    if (static_cast<int>(f.size()) != M + 1) {
      throw IngestionError(IngestError::Malformed,
                           "covariates line " + std::to_string(lineno) +
                               ": expected " + std::to_string(M + 1) +
                               " fields");
    }
    if (cov_rows.count(f[0])) {
      throw IngestionError(IngestError::DuplicateKey,
                           "duplicate covariate row for station " + f[0]);
    }
    Eigen::VectorXd row(M);
    for (int m = 0; m < M; ++m) {
      row[m] = parse_double(f[m + 1], "covariates", lineno);
    }
    cov_rows[f[0]] = row;
    ++rep.covariate_rows;
  }

  RawPanel panel;
  panel.covariate_names.assign(header.begin() + 1, header.end());
  panel.transforms.resize(static_cast<std::size_t>(M), TransformKind::Identity);
  for (int m = 0; m < M; ++m) {
    const auto it = transforms.find(panel.covariate_names[m]);
    if (it != transforms.end()) panel.transforms[m] = it->second;
  }
  panel.X_raw.resize(static_cast<int>(order.size()), M);
  int s = 0;
  for (const auto& id : order) {
    const auto it = cov_rows.find(id);
    if (it == cov_rows.end()) {
      throw IngestionError(IngestError::MissingCovariates,
                           "no covariate row for station " + id);
    }
    for (int m = 0; m < M; ++m) {
      if (panel.transforms[m] == TransformKind::Log && !(it->second[m] > 0.0)) {
        throw IngestionError(IngestError::LogOfNonpositive,
                             "station " + id + ", covariate " +
                                 panel.covariate_names[m] +
                                 ": nonpositive value under log transform");
      }
    }
    panel.station_ids.push_back(id);
    panel.X_raw.row(s++) = it->second;
    auto obs = by_station[id];
    std::sort(obs.begin(), obs.end());
    Eigen::VectorXd y(obs.size()), yr(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      yr[static_cast<int>(i)] = obs[i].first;
      y[static_cast<int>(i)] = obs[i].second;
    }
    panel.maxima.push_back(y);
    panel.years.push_back(yr);
  }
  for (const auto& [id, row] : cov_rows) {
    if (!by_station.count(id)) {
      rep.notes.push_back("covariate row for station " + id +
                          " has no maxima, dropped");
    }
  }
  return panel;
}

Dataset build_dataset(const RawPanel& panel, const std::vector<int>& stations,
                      Standardizer* record) {
  std::vector<int> idx = stations;
  if (idx.empty()) {
    idx.resize(static_cast<std::size_t>(panel.n_stations()));
    for (int s = 0; s < panel.n_stations(); ++s) idx[s] = s;
  }
  Dataset data;
  data.covariate_names = panel.covariate_names;
  Eigen::MatrixXd raw(idx.size(), panel.X_raw.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    data.station_ids.push_back(panel.station_ids[idx[i]]);
    data.maxima.push_back(panel.maxima[idx[i]]);
    raw.row(static_cast<int>(i)) = panel.X_raw.row(idx[i]);
  }
  if (raw.cols() > 0) {
    data.X = standardize_covariates(raw, panel.transforms, record);
  } else {
    data.X.resize(static_cast<int>(idx.size()), 0);
    if (record) {
      record->transforms.clear();
      record->mean.resize(0);
      record->sd.resize(0);
    }
  }
  return data;
}

namespace {

// True covariate effect on the linked parameter t; shape alternates with
// the covariate's rank among the active set.
double true_effect(int rank, int t, double x, bool nonlinear, double scale) {
  const double att = t == 0 ? 1.0 : (t == 1 ? 0.4 : 0.1);
  if (!nonlinear) return att * scale * 0.8 * x;
  if (rank % 2 == 0) {
    return att * scale * (std::sin(1.6 * x) + 0.3 * x);
  }
  return att * scale * (std::tanh(1.2 * x) - 0.4 * x);
}

}  // namespace

SyntheticBasin simulate_basin(const SimOptions& opt) {
  if (opt.n_stations < 4 || opt.n_blocks < 5) {
    throw std::invalid_argument("simulate_basin: need S >= 4 and T >= 5");
  }
  if (opt.n_active > opt.n_covariates) {
    throw std::invalid_argument("simulate_basin: more active than covariates");
  }
  Rng rng(opt.seed);
  SyntheticBasin out;
  RawPanel& panel = out.panel;
  const int S = opt.n_stations;
  const int M = opt.n_covariates;
  panel.X_raw.resize(S, M);
  for (int s = 0; s < S; ++s) {
    panel.station_ids.push_back("S" + std::to_string(1000 + s));
    for (int m = 0; m < M; ++m) panel.X_raw(s, m) = rng.normal();
  }
  for (int m = 0; m < M; ++m) {
    panel.covariate_names.push_back("x" + std::to_string(m));
    panel.transforms.push_back(TransformKind::Identity);
  }

  Eigen::MatrixXd X_std = panel.X_raw;
  if (M > 0) {
    X_std = standardize_covariates(panel.X_raw, panel.transforms, nullptr);
  }
  out.truth.intercepts = opt.intercepts;
  out.truth.kappa = opt.kappa;
  for (int m = 0; m < opt.n_active; ++m) out.truth.active.push_back(m);
  out.truth.theta.resize(S, 3);
  for (int s = 0; s < S; ++s) {
    for (int t = 0; t < 3; ++t) {
      double th = opt.intercepts[t];
      for (int m = 0; m < opt.n_active; ++m) {
        th += true_effect(m, t, X_std(s, m), opt.nonlinear, opt.effect_scale);
      }
      th += opt.kappa[t] * rng.normal();
      out.truth.theta(s, t) = th;
    }
  }
  for (int s = 0; s < S; ++s) {
    const GevParams p = inverse_link_params(LinkedParams{
        out.truth.theta(s, 0), out.truth.theta(s, 1), out.truth.theta(s, 2)});
    const std::vector<double> y = gev_sample(p, opt.n_blocks, rng);
    Eigen::VectorXd ym(opt.n_blocks), yr(opt.n_blocks);
    for (int t = 0; t < opt.n_blocks; ++t) {
      ym[t] = y[static_cast<std::size_t>(t)];
      yr[t] = 1985 + t;
    }
    panel.maxima.push_back(ym);
    panel.years.push_back(yr);
  }
  return out;
}

void write_maxima_csv(const std::string& path, const RawPanel& panel) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  os << "station_id,year,maximum\n";
  for (int s = 0; s < panel.n_stations(); ++s) {
    for (int t = 0; t < panel.maxima[s].size(); ++t) {
      os << panel.station_ids[s] << "," << panel.years[s][t] << ","
         << panel.maxima[s][t] << "\n";
    }
  }
}

void write_covariates_csv(const std::string& path, const RawPanel& panel) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  os << "station_id";
  for (const auto& n : panel.covariate_names) os << "," << n;
  os << "\n";
  for (int s = 0; s < panel.n_stations(); ++s) {
    os << panel.station_ids[s];
    for (int m = 0; m < panel.X_raw.cols(); ++m) os << "," << panel.X_raw(s, m);
    os << "\n";
  }
}

void write_truth_json(const std::string& path, const GroundTruth& truth) {
  nlohmann::json j;
  j["intercepts"] = {truth.intercepts[0], truth.intercepts[1],
                     truth.intercepts[2]};
  j["kappa"] = {truth.kappa[0], truth.kappa[1], truth.kappa[2]};
  j["active"] = truth.active;
  j["theta"] = nlohmann::json::array();
  for (int s = 0; s < truth.theta.rows(); ++s) {
    j["theta"].push_back(
        {truth.theta(s, 0), truth.theta(s, 1), truth.theta(s, 2)});
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << "\n";
}

void RunConfig::validate() const {
  family_from_name(model);  // throws on unknown family
  if (n_basis < 5) throw std::invalid_argument("config: n_basis must be >= 5");
  for (double r : return_periods) {
    if (!(r > 1.0)) {
      throw std::invalid_argument("config: return periods must exceed 1");
    }
  }
  if (cv_folds < 1) throw std::invalid_argument("config: cv_folds must be >= 1");
  if (sampler.n_draws < 1 || sampler.n_chains < 1) {
    throw std::invalid_argument("config: sampler needs chains and draws");
  }
  if (!(sampler.target_accept > 0.0 && sampler.target_accept < 1.0)) {
    throw std::invalid_argument("config: target_accept outside (0,1)");
  }
}

namespace {

void parse_sampler(const nlohmann::json& j, SamplerConfig& cfg) {
  cfg.n_chains = j.value("chains", cfg.n_chains);
  cfg.n_warmup = j.value("warmup", cfg.n_warmup);
  cfg.n_draws = j.value("draws", cfg.n_draws);
  cfg.target_accept = j.value("target_accept", cfg.target_accept);
  cfg.max_tree_depth = j.value("max_tree_depth", cfg.max_tree_depth);
  cfg.seed = j.value("seed", cfg.seed);
}

nlohmann::json sampler_json(const SamplerConfig& cfg) {
  return {{"chains", cfg.n_chains},
          {"warmup", cfg.n_warmup},
          {"draws", cfg.n_draws},
          {"target_accept", cfg.target_accept},
          {"max_tree_depth", cfg.max_tree_depth},
          {"seed", cfg.seed}};
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw std::invalid_argument("config parse error in " + path + ": " +
                               e.what());
  }
  RunConfig cfg;
  cfg.maxima_path = j.value("maxima", cfg.maxima_path);
  cfg.covariates_path = j.value("covariates", cfg.covariates_path);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.model = j.value("model", cfg.model);
  cfg.n_basis = j.value("n_basis", cfg.n_basis);
  if (j.contains("return_periods")) {
    cfg.return_periods = j["return_periods"].get<std::vector<double>>();
  }
  cfg.cv_folds = j.value("cv_folds", cfg.cv_folds);
  if (j.contains("transforms")) {
    for (const auto& [name, kind] : j["transforms"].items()) {
      const std::string k = kind.get<std::string>();
      if (k == "log" || k == "logarithm") {
        cfg.transforms[name] = TransformKind::Log;
      } else if (k == "identity") {
        cfg.transforms[name] = TransformKind::Identity;
      } else {
        throw std::runtime_error("config: unknown transform '" + k +
                                 "' for covariate " + name);
      }
    }
  }
  if (j.contains("sampler")) parse_sampler(j["sampler"], cfg.sampler);
  if (j.contains("station_sampler")) {
    parse_sampler(j["station_sampler"], cfg.station_sampler);
  }
  if (j.contains("sim")) {
    const auto& sj = j["sim"];
    cfg.sim.n_stations = sj.value("stations", cfg.sim.n_stations);
    cfg.sim.n_blocks = sj.value("blocks", cfg.sim.n_blocks);
    cfg.sim.n_covariates = sj.value("covariates", cfg.sim.n_covariates);
    cfg.sim.n_active = sj.value("active", cfg.sim.n_active);
    cfg.sim.nonlinear = sj.value("nonlinear", cfg.sim.nonlinear);
    cfg.sim.effect_scale = sj.value("effect_scale", cfg.sim.effect_scale);
    cfg.sim.seed = sj.value("seed", cfg.sim.seed);
  }
  cfg.validate();
  return cfg;
}

void write_config(const std::string& path, const RunConfig& cfg) {
  nlohmann::json j;
  j["maxima"] = cfg.maxima_path;
  j["covariates"] = cfg.covariates_path;
  j["out_dir"] = cfg.out_dir;
  j["model"] = cfg.model;
  j["n_basis"] = cfg.n_basis;
  j["return_periods"] = cfg.return_periods;
  j["cv_folds"] = cfg.cv_folds;
  nlohmann::json tj;
  for (const auto& [name, kind] : cfg.transforms) {
    tj[name] = kind == TransformKind::Log ? "log" : "identity";
  }
  j["transforms"] = tj;
  j["sampler"] = sampler_json(cfg.sampler);
  j["station_sampler"] = sampler_json(cfg.station_sampler);
  nlohmann::json sj;
  sj["stations"] = cfg.sim.n_stations;
  sj["blocks"] = cfg.sim.n_blocks;
  sj["covariates"] = cfg.sim.n_covariates;
  sj["active"] = cfg.sim.n_active;
  sj["nonlinear"] = cfg.sim.nonlinear;
  sj["effect_scale"] = cfg.sim.effect_scale;
  sj["seed"] = cfg.sim.seed;
  j["sim"] = sj;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << j.dump(2) << "\n";
}

}  // namespace evr
