#pragma once

#include "urkf/filters.hpp"
#include "urkf/model.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace urkf {

enum class ScenarioKind {
  kDrift,     // ε̃ ~ N(drift_mean, R)
  kUniform,   // ε̃ ~ U(uniform_low, uniform_high)
  kDeadZone,  // y = p + ε̃ unless |p + ε̃| < dead_zone, then 0; ε̃ ~ N(0, R)
  kOutlier,   // ε̃ ~ N(0, R) w.p. 1 − outlier_prob, else N(0, outlier_inflation · R)
  kNominal,   // control: plant and sensor follow the nominal model exactly
};

[[nodiscard]] std::string_view to_string(ScenarioKind kind);
[[nodiscard]] ScenarioKind parse_scenario_kind(std::string_view name);

struct Scenario {
  ScenarioKind kind = ScenarioKind::kDrift;
  double r = 0.25;
  double drift_mean = 0.1;
  double uniform_low = -0.9;
  double uniform_high = 1.1;
  double dead_zone = 0.1;
  double outlier_prob = 0.1;
  double outlier_inflation = 5.0;

  static Scenario of(ScenarioKind kind) {
    Scenario s;
    s.kind = kind;
    return s;
  }
  void validate() const;
};

/// One scalar reading of displacement `p` under the scenario's sensor.
[[nodiscard]] double sample_measurement(const Scenario& scenario, double p, std::mt19937_64& rng);

/// Truth-assisted tolerance selection for one filter family.
struct OracleConfig {
  FilterKind kind = FilterKind::kPrkf;
  std::vector<double> grid;  // c or θ values; empty means the default grid
};

/// 10 log-spaced points in [min(1e-3, hi/10), hi], hi = min(c_MAX, 2).
[[nodiscard]] std::vector<double> default_oracle_grid(double c_max);

struct McConfig {
  std::size_t trials = 200;
  std::size_t horizon = 200;
  std::uint64_t seed = 1;
  std::vector<FilterConfig> filters = {FilterConfig::kf(), FilterConfig::urkf(0.5)};
  std::optional<OracleConfig> oracle = OracleConfig{};
  MsdParams msd;
  Vector x0_mean = Vector::Zero(2);
  Matrix p0 = 0.05 * Matrix::Identity(2, 2);
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
  /// Canonical text form of every field that affects the results.
  [[nodiscard]] std::string canonical(const Scenario& scenario) const;
};

struct MseReport {
  ScenarioKind scenario = ScenarioKind::kDrift;
  std::vector<std::string> labels;         // one per filter, oracle last
  std::vector<std::vector<double>> mse_t;  // [filter][t], averaged over trials
  std::vector<double> time_average;        // [filter]
  std::vector<std::vector<double>> trial_average;  // [filter][kept trial], squared error averaged over t
  std::vector<double> oracle_grid;
  std::vector<std::size_t> oracle_picks;   // how often each grid value won
  std::size_t trials = 0;
  std::size_t excluded_trials = 0;
  std::uint64_t seed = 0;
  std::string config_hash;  // 16 hex digits
};

/// Simulates `cfg.trials` MSD trajectories under the scenario and averages the
/// squared displacement error of every configured filter over trials.
[[nodiscard]] MseReport run_monte_carlo(const McConfig& cfg, const Scenario& scenario);

struct OracleResult {
  double best = 0.0;
  std::size_t best_index = 0;
  std::vector<double> mse;  // time-averaged displacement MSE per grid value
};

/// Precomputed gain schedules for every grid value of one filter family.
class OracleSweep {
 public:
  OracleSweep(const LinearGaussianModel& model, OracleConfig config, const Matrix& p0, std::size_t horizon);

  /// Evaluates every grid value on one realization; ties go to the smallest value.
  [[nodiscard]] OracleResult evaluate(const Vector& x0_mean, const std::vector<Vector>& states,
                                      const std::vector<Vector>& observations,
                                      std::vector<Vector>* best_estimates = nullptr) const;
  [[nodiscard]] const std::vector<double>& grid() const { return config_.grid; }

 private:
  const LinearGaussianModel* model_;
  OracleConfig config_;
  std::vector<std::vector<Matrix>> gains_;
};

/// Convenience wrapper: the truth must be present (non-empty states matching
/// the observations), otherwise ValidationError.
[[nodiscard]] OracleResult oracle_sweep(const LinearGaussianModel& model, const OracleConfig& config,
                                        const GaussianBelief& init, const Trajectory& truth);

/// FNV-1a 64-bit hash, formatted as 16 lowercase hex digits.
[[nodiscard]] std::string fnv1a_hex(std::string_view text);

}  // namespace urkf
