#pragma once

#include "urkf/bench.hpp"
#include "urkf/filters.hpp"
#include "urkf/least_favorable.hpp"
#include "urkf/model.hpp"
#include "urkf/stability.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace urkf::io {

/// Whole file as a string. Throws IoError.
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`, so readers never
/// see a partial artifact. Throws IoError.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// {"A": [[..]], "C": [[..]], "Q": [[..]], "R": [[..]]}, row-major. Scalars
/// are accepted for 1×1 entries and a flat list for a single-row C.
[[nodiscard]] LinearGaussianModel parse_model(const std::string& json_text);
[[nodiscard]] std::string model_json(const LinearGaussianModel& model);

/// {"mean": [..], "cov": [[..]]}
[[nodiscard]] GaussianBelief parse_belief(const std::string& json_text);

/// {"kind": "urkf", "c": 0.5, "theta": 0, "solver_tol": 1e-12}
[[nodiscard]] FilterConfig parse_filter_config(const std::string& json_text);

/// Bench configuration; every key is optional:
/// {"trials", "horizon", "seed", "threads", "filters": [{filter config}..],
///  "oracle": {"kind", "grid"} | null, "scenarios": ["drift", ..],
///  "msd": {"mass", "spring", "damping", "force_variance",
///          "disturbance_variance", "sample_time", "measurement_variance",
///          "nominal_noise", "actual_noise"}}
struct BenchSpec {
  McConfig mc;
  std::vector<Scenario> scenarios;
};
[[nodiscard]] BenchSpec parse_bench_config(const std::string& json_text);

/// θ_MAX grid; every key is optional: {"alpha_points", "gain_points",
/// "gain_bound", "rho_points", "refinement_rounds", "refinement_factor", "threads"}
[[nodiscard]] ThetaMaxSearch parse_theta_max_search(const std::string& json_text);

/// Numeric CSV with a header row and one observation vector of width m per
/// row (an optional leading "t" column is dropped). Errors name the line.
[[nodiscard]] std::vector<Vector> parse_observations_csv(const std::string& text, Eigen::Index m);

[[nodiscard]] std::string trajectory_csv(const Trajectory& traj);
[[nodiscard]] std::string lf_trajectory_csv(const LfTrajectory& traj);
/// Columns t, theta, trace_P, trace_V, xhat_1..xhat_n (filtered means).
[[nodiscard]] std::string step_log_csv(const std::vector<FilterStep>& steps, Eigen::Index n);
[[nodiscard]] std::string mse_csv(const MseReport& report);
[[nodiscard]] std::string mse_json(const MseReport& report);
[[nodiscard]] std::string cmax_json(const CmaxReport& report);
[[nodiscard]] std::string theta_max_json(const ThetaMaxReport& report, const ThetaMaxSearch& search);
[[nodiscard]] std::string lf_model_json(const LeastFavorableModel& lf);

struct Manifest {
  std::string command;
  std::string config_hash;
  std::string tool_version;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string started_utc;
  std::string finished_utc;
  std::map<std::string, std::string> parameters;
};
[[nodiscard]] std::string manifest_json(const Manifest& manifest);

}  // namespace urkf::io
