#include "urkf/io.hpp"

#include "urkf/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace urkf::io {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

Matrix to_matrix(const json& j, const char* name) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ValidationError(std::string(name) + " must be a non-empty array");
  if (j.front().is_number()) {
    Matrix row(1, static_cast<Eigen::Index>(j.size()));
    for (std::size_t c = 0; c < j.size(); ++c) {
      if (!j[c].is_number()) throw ValidationError(std::string(name) + " has a non-numeric entry");
      row(0, static_cast<Eigen::Index>(c)) = j[c].get<double>();
    }
    return row;
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ValidationError(std::string(name) + " must be a nested array of numbers");
  Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ValidationError(std::string(name) + " has ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw ValidationError(std::string(name) + " has a non-numeric entry");
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return out;
}

Vector to_vector(const json& j, const char* name) {
  const Matrix m = to_matrix(j, name);
  if (m.rows() != 1 && m.cols() != 1) throw ValidationError(std::string(name) + " must be a vector");
  return m.reshaped();
}

json from_matrix(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json from_vector(const std::vector<double>& v) { return json(v); }

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("missing key '") + key + "'");
  return j.at(key);
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(std::string("key '") + key + "' has the wrong type");
  }
}

FilterConfig filter_config_from(const json& j) {
  FilterConfig cfg;
  const json& kind = require(j, "kind");
  if (!kind.is_string()) throw ValidationError("filter 'kind' must be a string");
  cfg.kind = parse_filter_kind(kind.get<std::string>());
  cfg.tolerance = get_or<double>(j, "c", 0.0);
  cfg.theta = get_or<double>(j, "theta", 0.0);
  cfg.solver_tol = get_or<double>(j, "solver_tol", 1e-12);
  cfg.validate();
  return cfg;
}

NoiseDiscretization parse_noise(const std::string& s) {
  if (s == "piecewise_constant") return NoiseDiscretization::kPiecewiseConstant;
  if (s == "continuous_white") return NoiseDiscretization::kContinuousWhite;
  throw ValidationError("noise discretization must be 'piecewise_constant' or 'continuous_white'");
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return ss.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::random_device rd;
  std::filesystem::path tmp = path;
  tmp += ".tmp-" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("error while writing '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

LinearGaussianModel parse_model(const std::string& json_text) {
  const json j = parse_json(json_text, "model");
  LinearGaussianModel model;
  model.A = to_matrix(require(j, "A"), "A");
  model.C = to_matrix(require(j, "C"), "C");
  model.Q = to_matrix(require(j, "Q"), "Q");
  model.R = to_matrix(require(j, "R"), "R");
  validate(model);
  return model;
}

std::string model_json(const LinearGaussianModel& model) {
  json j;
  j["A"] = from_matrix(model.A);
  j["C"] = from_matrix(model.C);
  j["Q"] = from_matrix(model.Q);
  j["R"] = from_matrix(model.R);
  return j.dump(2) + "\n";
}

GaussianBelief parse_belief(const std::string& json_text) {
  const json j = parse_json(json_text, "belief");
  GaussianBelief b;
  b.mean = to_vector(require(j, "mean"), "mean");
  b.cov = to_matrix(require(j, "cov"), "cov");
  if (b.cov.rows() != b.mean.size() || b.cov.cols() != b.mean.size()) {
    throw ValidationError("belief cov must be square with the size of mean");
  }
  require_sym_pd(b.cov, "belief cov");
  return b;
}

FilterConfig parse_filter_config(const std::string& json_text) {
  return filter_config_from(parse_json(json_text, "filter config"));
}

BenchSpec parse_bench_config(const std::string& json_text) {
  const json j = parse_json(json_text, "bench config");
  if (!j.is_object()) throw ValidationError("bench config must be a JSON object");
  BenchSpec spec;
  McConfig& mc = spec.mc;
  mc.trials = get_or<std::size_t>(j, "trials", mc.trials);
  mc.horizon = get_or<std::size_t>(j, "horizon", mc.horizon);
  mc.seed = get_or<std::uint64_t>(j, "seed", mc.seed);
  mc.threads = get_or<unsigned>(j, "threads", mc.threads);
  if (j.contains("filters")) {
    mc.filters.clear();
    for (const auto& f : j.at("filters")) mc.filters.push_back(filter_config_from(f));
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    if (o.is_null()) {
      mc.oracle.reset();
    } else {
      OracleConfig oc;
      oc.kind = parse_filter_kind(get_or<std::string>(o, "kind", "prkf"));
      oc.grid = get_or<std::vector<double>>(o, "grid", {});
      mc.oracle = oc;
    }
  }
  if (j.contains("msd")) {
    const json& m = j.at("msd");
    MsdParams& p = mc.msd;
    p.mass = get_or<double>(m, "mass", p.mass);
    p.spring = get_or<double>(m, "spring", p.spring);
    p.damping = get_or<double>(m, "damping", p.damping);
    p.force_variance = get_or<double>(m, "force_variance", p.force_variance);
    p.disturbance_variance = get_or<double>(m, "disturbance_variance", p.disturbance_variance);
    p.nominal_force_variance = get_or<double>(m, "nominal_force_variance", p.nominal_force_variance);
    p.sample_time = get_or<double>(m, "sample_time", p.sample_time);
    p.measurement_variance = get_or<double>(m, "measurement_variance", p.measurement_variance);
    if (m.contains("nominal_noise")) p.nominal_noise = parse_noise(m.at("nominal_noise").get<std::string>());
    if (m.contains("actual_noise")) p.actual_noise = parse_noise(m.at("actual_noise").get<std::string>());
  }
  const auto names = get_or<std::vector<std::string>>(j, "scenarios", {"drift", "uniform", "deadzone", "outlier"});
  for (const auto& name : names) {
    Scenario s = Scenario::of(parse_scenario_kind(name));
    s.r = mc.msd.measurement_variance;
    spec.scenarios.push_back(s);
  }
  mc.validate();
  return spec;
}

ThetaMaxSearch parse_theta_max_search(const std::string& json_text) {
  const json j = parse_json(json_text, "search config");
  if (!j.is_object()) throw ValidationError("search config must be a JSON object");
  ThetaMaxSearch s;
  s.alpha_points = get_or<int>(j, "alpha_points", s.alpha_points);
  s.gain_points = get_or<int>(j, "gain_points", s.gain_points);
  s.gain_bound = get_or<double>(j, "gain_bound", s.gain_bound);
  s.rho_points = get_or<int>(j, "rho_points", s.rho_points);
  s.refinement_rounds = get_or<int>(j, "refinement_rounds", s.refinement_rounds);
  s.refinement_factor = get_or<double>(j, "refinement_factor", s.refinement_factor);
  s.threads = get_or<unsigned>(j, "threads", s.threads);
  return s;
}

std::vector<Vector> parse_observations_csv(const std::string& text, Eigen::Index m) {
  std::istringstream in(text);
  std::string line;
  std::vector<Vector> ys;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool leading_t = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      header_seen = true;
      leading_t = !cells.empty() && (cells.front() == "t" || cells.front() == " t");
      const auto width = static_cast<Eigen::Index>(cells.size()) - (leading_t ? 1 : 0);
      if (width != m) {
        throw ValidationError("line " + std::to_string(line_no) + ": header has " + std::to_string(width) +
                              " observation columns, model expects " + std::to_string(m));
      }
      continue;
    }
    const std::size_t skip = leading_t ? 1 : 0;
    if (static_cast<Eigen::Index>(cells.size()) != m + static_cast<Eigen::Index>(skip)) {
      throw ValidationError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(m + static_cast<Eigen::Index>(skip)) + " columns, got " +
                            std::to_string(cells.size()));
    }
    Vector y(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const std::string& c = cells[skip + static_cast<std::size_t>(i)];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(c, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || c.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v)) {
        throw ValidationError("line " + std::to_string(line_no) + ": '" + c + "' is not a finite number");
      }
      y(i) = v;
    }
    ys.push_back(y);
  }
  return ys;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
  const Eigen::Index m = traj.observations.empty() ? 0 : traj.observations.front().size();
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",y_" << i;
  os << "\n" << std::setprecision(17);
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < n; ++i) os << "," << traj.states[t](i);
    for (Eigen::Index i = 0; i < m; ++i) os << "," << traj.observations[t](i);
    os << "\n";
  }
  return os.str();
}

std::string lf_trajectory_csv(const LfTrajectory& traj) {
  std::ostringstream os;
  const auto& p = traj.projected;
  const Eigen::Index n = p.states.empty() ? 0 : p.states.front().size();
  const Eigen::Index m = p.observations.empty() ? 0 : p.observations.front().size();
  os << "t";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x_" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",y_" << i;
  for (Eigen::Index i = 1; i <= 3 * n; ++i) os << ",eta_" << i;
  os << "\n" << std::setprecision(17);
  for (std::size_t t = 0; t < p.states.size(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < n; ++i) os << "," << p.states[t](i);
    for (Eigen::Index i = 0; i < m; ++i) os << "," << p.observations[t](i);
    for (Eigen::Index i = 0; i < 3 * n; ++i) os << "," << traj.augmented[t](i);
    os << "\n";
  }
  return os.str();
}

std::string step_log_csv(const std::vector<FilterStep>& steps, Eigen::Index n) {
  std::ostringstream os;
  os << "t,theta,trace_P,trace_V";
  for (Eigen::Index i = 1; i <= n; ++i) os << ",xhat_" << i;
  os << "\n" << std::setprecision(17);
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto& s = steps[t];
    os << t << "," << s.theta << "," << s.filtered_cov.trace() << "," << s.distorted_cov.trace();
    for (Eigen::Index i = 0; i < n; ++i) os << "," << s.filtered_mean(i);
    os << "\n";
  }
  return os.str();
}

std::string mse_csv(const MseReport& report) {
  std::ostringstream os;
  os << "t";
  for (const auto& l : report.labels) os << "," << l;
  os << "\n" << std::setprecision(17);
  const std::size_t horizon = report.mse_t.empty() ? 0 : report.mse_t.front().size();
  for (std::size_t t = 0; t < horizon; ++t) {
    os << t;
    for (const auto& series : report.mse_t) os << "," << series[t];
    os << "\n";
  }
  return os.str();
}

std::string mse_json(const MseReport& report) {
  json j;
  j["scenario"] = std::string(to_string(report.scenario));
  j["filters"] = report.labels;
  j["time_average_mse"] = from_vector(report.time_average);
  j["trials"] = report.trials;
  j["excluded_trials"] = report.excluded_trials;
  j["seed"] = report.seed;
  j["config_hash"] = report.config_hash;
  if (!report.oracle_grid.empty()) {
    j["oracle"] = {{"grid", report.oracle_grid}, {"picks", report.oracle_picks}};
  }
  return j.dump(2) + "\n";
}

std::string cmax_json(const CmaxReport& report) {
  json j;
  j["mode"] = "cmax";
  j["k"] = report.k;
  j["q"] = report.q;
  j["phi_k"] = report.phi.phi;
  j["c_max"] = report.c_max;
  j["pbar_qq"] = from_matrix(report.pbar_qq);
  j["search"] = {{"upper", report.phi.upper},
                 {"iterations", report.phi.iterations},
                 {"min_eig_at_phi", report.phi.min_eig_at_phi}};
  return j.dump(2) + "\n";
}

std::string theta_max_json(const ThetaMaxReport& report, const ThetaMaxSearch& search) {
  auto candidate = [](const ThetaMaxCandidate& c) {
    return json{{"theta_max", c.theta_max}, {"rho", c.rho},      {"alpha", c.alpha},
                {"G", from_matrix(c.gain)}, {"beta", c.beta}, {"sigma", from_matrix(c.sigma)}};
  };
  json j;
  j["mode"] = "thetamax";
  j["k"] = report.k;
  j["phi_k"] = report.phi.phi;
  j["theta_max"] = report.update.theta_max;
  j["update"] = candidate(report.update);
  j["prediction"] = candidate(report.prediction);
  j["search"] = {{"alpha_points", search.alpha_points},
                 {"gain_points", search.gain_points},
                 {"gain_bound", search.gain_bound},
                 {"rho_points", search.rho_points},
                 {"refinements", search.refinement_rounds},
                 {"refinement_factor", search.refinement_factor},
                 {"evaluations", report.grid_evaluations},
                 {"admissible", report.admissible_evaluations}};
  return j.dump(2) + "\n";
}

std::string lf_model_json(const LeastFavorableModel& lf) {
  json j;
  j["n"] = lf.n;
  j["m"] = lf.m;
  j["horizon"] = lf.horizon();
  j["Xi"] = from_matrix(lf.xi);
  json steps = json::array();
  for (std::size_t t = 0; t < lf.a_bar.size(); ++t) {
    steps.push_back({{"t", t},
                     {"A_bar", from_matrix(lf.a_bar[t])},
                     {"B_bar", from_matrix(lf.b_bar[t])},
                     {"C_bar", from_matrix(lf.c_bar[t])},
                     {"D_bar", from_matrix(lf.d_bar[t])}});
  }
  j["steps"] = std::move(steps);
  return j.dump(1) + "\n";
}

std::string manifest_json(const Manifest& manifest) {
  json j;
  j["command"] = manifest.command;
  j["config_hash"] = manifest.config_hash;
  j["tool_version"] = manifest.tool_version;
  j["seed"] = manifest.seed;
  j["outputs"] = manifest.outputs;
  j["started_utc"] = manifest.started_utc;
  j["finished_utc"] = manifest.finished_utc;
  j["parameters"] = manifest.parameters;
  return j.dump(2) + "\n";
}

}  // namespace urkf::io
