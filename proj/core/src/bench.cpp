#include "urkf/bench.hpp"

#include "urkf/errors.hpp"
#include "urkf/stability.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

namespace urkf {

namespace {

constexpr std::uint64_t kStreamInit = 0;
constexpr std::uint64_t kStreamProcess = 1;
constexpr std::uint64_t kStreamSensor = 2;

double displacement_mse(const std::vector<Vector>& estimates, const std::vector<Vector>& states) {
  double sum = 0.0;
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    const double d = estimates[t](0) - states[t](0);
    sum += d * d;
  }
  return estimates.empty() ? 0.0 : sum / static_cast<double>(estimates.size());
}

std::vector<Matrix> gain_schedule(const LinearGaussianModel& model, const FilterConfig& config,
                                  const Matrix& p0, std::size_t horizon) {
  std::vector<Matrix> gains;
  gains.reserve(horizon);
  for (auto& s : covariance_pass(model, config, p0, horizon == 0 ? 0 : horizon - 1)) {
    gains.push_back(std::move(s.gain));
  }
  gains.resize(horizon);
  return gains;
}

FilterConfig family_config(FilterKind kind, double value) {
  switch (kind) {
    case FilterKind::kUrkf: return FilterConfig::urkf(value);
    case FilterKind::kPrkf: return FilterConfig::prkf(value);
    case FilterKind::kUrsf: return FilterConfig::ursf(value);
    case FilterKind::kPrsf: return FilterConfig::prsf(value);
    case FilterKind::kKf: break;
  }
  throw ValidationError("oracle family must be urkf, prkf, ursf or prsf");
}

}  // namespace

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kDrift: return "drift";
    case ScenarioKind::kUniform: return "uniform";
    case ScenarioKind::kDeadZone: return "deadzone";
    case ScenarioKind::kOutlier: return "outlier";
    case ScenarioKind::kNominal: return "nominal";
  }
  return "unknown";
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  std::string key;
  for (char ch : name) {
    if (ch == '-' || ch == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  for (ScenarioKind kind : {ScenarioKind::kDrift, ScenarioKind::kUniform, ScenarioKind::kDeadZone,
                            ScenarioKind::kOutlier, ScenarioKind::kNominal}) {
    if (key == to_string(kind)) return kind;
  }
  throw ValidationError("unknown scenario '" + std::string(name) + "'");
}

void Scenario::validate() const {
  if (!(r > 0.0)) throw ValidationError("scenario R must be positive");
  if (!(uniform_low < uniform_high)) throw ValidationError("uniform bounds must satisfy low < high");
  if (dead_zone < 0.0) throw ValidationError("dead-zone threshold must be >= 0");
  if (!(outlier_prob >= 0.0 && outlier_prob <= 1.0)) throw ValidationError("outlier probability must be in [0, 1]");
  if (!(outlier_inflation > 0.0)) throw ValidationError("outlier inflation must be positive");
}

double sample_measurement(const Scenario& scenario, double p, std::mt19937_64& rng) {
  const double sd = std::sqrt(scenario.r);
  switch (scenario.kind) {
    case ScenarioKind::kDrift:
      return p + std::normal_distribution<double>(scenario.drift_mean, sd)(rng);
    case ScenarioKind::kUniform:
      return p + std::uniform_real_distribution<double>(scenario.uniform_low, scenario.uniform_high)(rng);
    case ScenarioKind::kDeadZone: {
      const double z = p + std::normal_distribution<double>(0.0, sd)(rng);
      return std::abs(z) < scenario.dead_zone ? 0.0 : z;
    }
    case ScenarioKind::kOutlier: {
      const bool outlier = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < scenario.outlier_prob;
      const double s = outlier ? std::sqrt(scenario.outlier_inflation) * sd : sd;
      return p + std::normal_distribution<double>(0.0, s)(rng);
    }
    case ScenarioKind::kNominal:
      return p + std::normal_distribution<double>(0.0, sd)(rng);
  }
  return p;
}

std::vector<double> default_oracle_grid(double c_max_value) {
  const double hi = std::min(c_max_value, 2.0);
  if (!(hi > 0.0)) throw ValidationError("oracle grid needs a positive upper end");
  const double lo = std::min(1e-3, hi / 10.0);
  std::vector<double> grid;
  for (int i = 0; i < 10; ++i) grid.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / 9.0));
  return grid;
}

void McConfig::validate() const {
  if (trials < 1) throw ValidationError("trial count M must be >= 1");
  if (horizon < 1) throw ValidationError("horizon N must be >= 1");
  if (filters.empty() && !oracle) throw ValidationError("no filters configured");
  for (const auto& f : filters) f.validate();
  if (oracle && oracle->kind == FilterKind::kKf) throw ValidationError("oracle family must be a robust filter");
  if (x0_mean.size() != 2 || p0.rows() != 2 || p0.cols() != 2) throw ValidationError("initial belief must be 2-dimensional");
  require_sym_pd(p0, "P0");
}

std::string McConfig::canonical(const Scenario& scenario) const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "trials=" << trials << ";horizon=" << horizon << ";seed=" << seed << ";";
  for (const auto& f : filters) os << "filter=" << f.label() << ",tol=" << f.solver_tol << ";";
  if (oracle) {
    os << "oracle=" << to_string(oracle->kind) << ":";
    for (double g : oracle->grid) os << g << ",";
    os << ";";
  }
  os << "msd=" << msd.mass << "," << msd.spring << "," << msd.damping << "," << msd.force_variance << ","
     << msd.disturbance_variance << "," << msd.nominal_force_variance << "," << msd.sample_time << ","
     << msd.measurement_variance << "," << static_cast<int>(msd.nominal_noise) << ","
     << static_cast<int>(msd.actual_noise) << "," << msd.q_floor << ";";
  os << "x0=" << x0_mean.transpose() << ";p0=" << p0.reshaped().transpose() << ";";
  os << "scenario=" << to_string(scenario.kind) << "," << scenario.r << "," << scenario.drift_mean << ","
     << scenario.uniform_low << "," << scenario.uniform_high << "," << scenario.dead_zone << ","
     << scenario.outlier_prob << "," << scenario.outlier_inflation;
  return os.str();
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

OracleSweep::OracleSweep(const LinearGaussianModel& model, OracleConfig config, const Matrix& p0,
                         std::size_t horizon)
    : model_(&model), config_(std::move(config)) {
  if (config_.grid.empty()) throw ValidationError("oracle grid is empty");
  std::sort(config_.grid.begin(), config_.grid.end());
  for (double value : config_.grid) {
    gains_.push_back(gain_schedule(model, family_config(config_.kind, value), p0, horizon));
  }
}

OracleResult OracleSweep::evaluate(const Vector& x0_mean, const std::vector<Vector>& states,
                                   const std::vector<Vector>& observations,
                                   std::vector<Vector>* best_estimates) const {
  if (states.empty() || states.size() != observations.size()) {
    throw ValidationError("oracle sweep needs the true states of the realization");
  }
  OracleResult out;
  for (std::size_t i = 0; i < gains_.size(); ++i) {
    auto estimates = apply_gains(*model_, gains_[i], x0_mean, observations);
    const double mse = displacement_mse(estimates, states);
    out.mse.push_back(mse);
    // Strict improvement only, so ties keep the earlier (smaller) grid value.
    if (i == 0 || mse < out.mse[out.best_index]) {
      out.best_index = i;
      if (best_estimates) *best_estimates = std::move(estimates);
    }
  }
  out.best = config_.grid[out.best_index];
  return out;
}

OracleResult oracle_sweep(const LinearGaussianModel& model, const OracleConfig& config, const GaussianBelief& init,
                          const Trajectory& truth) {
  if (truth.states.empty() || truth.states.size() != truth.observations.size()) {
    throw ValidationError("oracle sweep needs the true states of the realization");
  }
  const OracleSweep sweep(model, config, init.cov, truth.observations.size());
  return sweep.evaluate(init.mean, truth.states, truth.observations);
}

MseReport run_monte_carlo(const McConfig& cfg, const Scenario& scenario) {
  cfg.validate();
  scenario.validate();

  MsdParams params = cfg.msd;
  params.measurement_variance = scenario.r;
  const MsdModels models = msd_discretize(params);
  const LinearGaussianModel& nominal = models.nominal;
  validate(nominal);

  // The control scenario runs the plant exactly as the filters model it.
  const bool control = scenario.kind == ScenarioKind::kNominal;
  const Matrix plant_a = control ? nominal.A : models.actual.A;
  const Matrix plant_q_half = spd_sqrt(control ? nominal.Q : models.actual.Q);
  const Matrix p0_half = spd_sqrt(cfg.p0);

  std::vector<std::vector<Matrix>> gains;
  for (const auto& f : cfg.filters) gains.push_back(gain_schedule(nominal, f, cfg.p0, cfg.horizon));

  std::optional<OracleSweep> sweep;
  MseReport report;
  if (cfg.oracle) {
    OracleConfig oc = *cfg.oracle;
    if (oc.grid.empty()) oc.grid = default_oracle_grid(c_max(nominal).c_max);
    report.oracle_grid = oc.grid;
    sweep.emplace(nominal, oc, cfg.p0, cfg.horizon);
  }

  const std::size_t filters = gains.size() + (sweep ? 1 : 0);
  const std::size_t horizon = cfg.horizon;
  // [trial][filter * horizon + t] squared displacement errors.
  std::vector<std::vector<double>> errors(cfg.trials);
  std::vector<long> picks(cfg.trials, -1);
  std::vector<char> excluded(cfg.trials, 0);

  auto run_trial = [&](std::size_t trial) {
    auto rng_init = rng_stream(cfg.seed, trial, kStreamInit);
    auto rng_process = rng_stream(cfg.seed, trial, kStreamProcess);
    auto rng_sensor = rng_stream(cfg.seed, trial, kStreamSensor);
    std::vector<Vector> states;
    std::vector<Vector> ys;
    states.reserve(horizon);
    ys.reserve(horizon);
    Vector x = cfg.x0_mean + draw_gaussian(p0_half, rng_init);
    for (std::size_t t = 0; t < horizon; ++t) {
      states.push_back(x);
      ys.push_back(Vector::Constant(1, sample_measurement(scenario, x(0), rng_sensor)));
      x = plant_a * x + draw_gaussian(plant_q_half, rng_process);
    }

    std::vector<double>& err = errors[trial];
    err.assign(filters * horizon, 0.0);
    auto record = [&](std::size_t f, const std::vector<Vector>& est) {
      for (std::size_t t = 0; t < horizon; ++t) {
        const double d = est[t](0) - states[t](0);
        err[f * horizon + t] = d * d;
      }
    };
    for (std::size_t f = 0; f < gains.size(); ++f) record(f, apply_gains(nominal, gains[f], cfg.x0_mean, ys));
    if (sweep) {
      std::vector<Vector> best;
      const OracleResult r = sweep->evaluate(cfg.x0_mean, states, ys, &best);
      picks[trial] = static_cast<long>(r.best_index);
      record(gains.size(), best);
    }
    if (!std::all_of(err.begin(), err.end(), [](double v) { return std::isfinite(v); })) excluded[trial] = 1;
  };

  unsigned threads = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cfg.trials)));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t trial = w; trial < cfg.trials; trial += threads) run_trial(trial);
    });
  }
  for (auto& t : pool) t.join();

  for (const auto& f : cfg.filters) report.labels.push_back(f.label());
  if (sweep) report.labels.push_back(std::string(to_string(cfg.oracle->kind)) + "(oracle)");
  report.scenario = scenario.kind;
  report.seed = cfg.seed;
  report.config_hash = fnv1a_hex(cfg.canonical(scenario));
  report.oracle_picks.assign(report.oracle_grid.size(), 0);

  report.mse_t.assign(filters, std::vector<double>(horizon, 0.0));
  report.trial_average.assign(filters, {});
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    if (excluded[trial]) {
      ++report.excluded_trials;
      continue;
    }
    ++report.trials;
    for (std::size_t f = 0; f < filters; ++f) {
      double sum = 0.0;
      for (std::size_t t = 0; t < horizon; ++t) {
        report.mse_t[f][t] += errors[trial][f * horizon + t];
        sum += errors[trial][f * horizon + t];
      }
      report.trial_average[f].push_back(sum / static_cast<double>(horizon));
    }
    if (picks[trial] >= 0) ++report.oracle_picks[static_cast<std::size_t>(picks[trial])];
  }
  if (report.trials == 0) throw NumericalError("every Monte Carlo trial produced a non-finite estimate");
  report.time_average.assign(filters, 0.0);
  for (std::size_t f = 0; f < filters; ++f) {
    for (double& v : report.mse_t[f]) {
      v /= static_cast<double>(report.trials);
      report.time_average[f] += v;
    }
    report.time_average[f] /= static_cast<double>(horizon);
  }
  return report;
}

}  // namespace urkf
