#include "commands.hpp"

#include "urkf/bench.hpp"
#include "urkf/errors.hpp"
#include "urkf/filters.hpp"
#include "urkf/io.hpp"
#include "urkf/least_favorable.hpp"
#include "urkf/model.hpp"
#include "urkf/stability.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#ifndef URKF_VERSION
#define URKF_VERSION "unknown"
#endif

namespace urkf::cli {
namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Short form for file names and messages.
std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Artifact {
  std::string name;
  std::string content;
};

// Everything that determines a command's outputs.
struct Run {
  std::string command;
  std::map<std::string, std::string> parameters;
  std::string inputs;  // concatenated input file contents
  std::uint64_t seed = 0;
  std::string started = utc_now();

  void input(const std::string& label, const std::string& text) { inputs += label + "\n" + text + "\n"; }
};

// Artifacts are only written once every one of them has been computed.
void publish(const Run& run, const fs::path& out_dir, const std::vector<Artifact>& artifacts, std::ostream& out) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::string canonical = run.command + "\n";
  for (const auto& [k, v] : run.parameters) canonical += k + "=" + v + "\n";
  canonical += run.inputs;

  io::Manifest man;
  man.command = run.command;
  man.config_hash = fnv1a_hex(canonical);
  man.tool_version = URKF_VERSION;
  man.seed = run.seed;
  man.parameters = run.parameters;
  man.started_utc = run.started;
  for (const auto& a : artifacts) {
    const fs::path p = out_dir / a.name;
    io::write_atomic(p, a.content);
    man.outputs.push_back(p.string());
    out << "wrote " << p.string() << "\n";
  }
  man.finished_utc = utc_now();
  io::write_atomic(out_dir / "manifest.json", io::manifest_json(man));
}

LinearGaussianModel load_model(const std::string& path, Run& run) {
  const std::string text = io::read_text(path);
  run.input("model", text);
  return io::parse_model(text);
}

// x̂_0 = 0, P_0 = 0.01 I unless a belief file is given.
GaussianBelief load_init(const std::string& path, const LinearGaussianModel& model, Run& run) {
  if (path.empty()) {
    return {Vector::Zero(model.n()), 0.01 * Matrix::Identity(model.n(), model.n())};
  }
  const std::string text = io::read_text(path);
  run.input("init", text);
  GaussianBelief b = io::parse_belief(text);
  if (b.mean.size() != model.n()) throw ValidationError("initial belief dimension does not match the model");
  return b;
}

struct Options {
  std::string model;
  std::string config;
  std::string out;
  std::string init;
  std::string data;
  std::string mode;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::size_t k = 10;
  std::size_t q = 20;
  std::size_t horizon = 300;
  std::size_t count = 1;
  std::vector<double> c;
  std::vector<double> theta;
};

int cmd_bounds(const Options& o, std::ostream& out) {
  Run run;
  run.command = "bounds " + o.mode;
  run.parameters = {{"k", std::to_string(o.k)}, {"q", std::to_string(o.q)}};
  const LinearGaussianModel model = load_model(o.model, run);
  std::vector<Artifact> artifacts;
  if (o.mode == "cmax") {
    const CmaxReport r = c_max(model, o.k, o.q);
    out << "phi_k = " << num(r.phi.phi) << "\nc_MAX = " << num(r.c_max) << "\n";
    artifacts.push_back({"bounds.json", io::cmax_json(r)});
  } else {
    ThetaMaxSearch search;
    if (!o.config.empty()) {
      const std::string text = io::read_text(o.config);
      run.input("search", text);
      search = io::parse_theta_max_search(text);
    }
    search.threads = o.threads;
    const ThetaMaxReport r = theta_max(model, o.k, search);
    out << "phi_k = " << num(r.phi.phi) << "\ntheta_MAX (update, alpha free) = " << num(r.update.theta_max)
        << "\ntheta_MAX (prediction, alpha = 1) = " << num(r.prediction.theta_max) << "\n";
    artifacts.push_back({"bounds.json", io::theta_max_json(r, search)});
  }
  publish(run, o.out, artifacts, out);
  return kOk;
}

// Trace of the filtering-error covariance of each evaluated estimator on the
// least-favorable model synthesized for `attacked`.
std::string worstcase_series(const LinearGaussianModel& model, const GaussianBelief& init,
                             const FilterConfig& attacked, const std::vector<FilterConfig>& evaluated,
                             std::size_t horizon) {
  const ForwardPass fwd = forward_gains(model, attacked, init.cov, horizon);
  const BackwardPass bwd = backward_pass(fwd, model);
  std::vector<std::vector<Matrix>> pis;
  for (const auto& cfg : evaluated) {
    std::vector<Matrix> gains;
    for (const auto& s : covariance_pass(model, cfg, init.cov, horizon)) gains.push_back(s.gain);
    pis.push_back(error_cov_recursion(model, fwd, bwd, gains, init.cov));
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "t";
  for (const auto& cfg : evaluated) csv << "," << to_string(cfg.kind);
  csv << ",theta\n";
  const auto n = model.n();
  for (std::size_t t = 0; t <= horizon; ++t) {
    csv << t;
    for (const auto& pi : pis) csv << "," << pi[t].topLeftCorner(n, n).trace();
    csv << "," << fwd.thetas[t] << "\n";
  }
  return csv.str();
}

int cmd_worstcase(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.c.empty() && o.theta.empty()) throw ValidationError("worstcase needs at least one --c or --theta value");
  Run run;
  run.command = "worstcase";
  run.parameters["horizon"] = std::to_string(o.horizon);
  const LinearGaussianModel model = load_model(o.model, run);
  const GaussianBelief init = load_init(o.init, model, run);
  std::vector<Artifact> artifacts;
  if (!o.c.empty()) {
    try {
      const double cap = c_max(model, o.k, o.q).c_max;
      for (double c : o.c) {
        if (c > cap) err << "warning: c = " << short_num(c) << " exceeds c_MAX = " << short_num(cap) << "\n";
      }
    } catch (const Error& e) {
      err << "warning: c_MAX unavailable: " << e.what() << "\n";
    }
  }
  for (double c : o.c) {
    run.parameters["c=" + short_num(c)] = num(c);
    const std::vector<FilterConfig> eval = {FilterConfig::kf(), FilterConfig::prkf(c), FilterConfig::urkf(c)};
    artifacts.push_back({"worstcase_c=" + short_num(c) + ".csv",
                         worstcase_series(model, init, FilterConfig::urkf(c), eval, o.horizon)});
  }
  for (double th : o.theta) {
    run.parameters["theta=" + short_num(th)] = num(th);
    const std::vector<FilterConfig> eval = {FilterConfig::kf(), FilterConfig::prsf(th), FilterConfig::ursf(th)};
    artifacts.push_back({"worstcase_theta=" + short_num(th) + ".csv",
                         worstcase_series(model, init, FilterConfig::ursf(th), eval, o.horizon)});
  }
  publish(run, o.out, artifacts, out);
  return kOk;
}

FilterConfig resolve_filter(const Options& o, Run& run) {
  const int given = !o.config.empty() + !o.c.empty() + !o.theta.empty();
  if (given > 1) throw ValidationError("give at most one of --config, --c and --theta");
  if (o.c.size() > 1 || o.theta.size() > 1) throw ValidationError("--c and --theta take a single value here");
  FilterConfig cfg = FilterConfig::kf();
  if (!o.config.empty()) {
    const std::string text = io::read_text(o.config);
    run.input("filter", text);
    cfg = io::parse_filter_config(text);
  } else if (!o.c.empty()) {
    cfg = FilterConfig::urkf(o.c[0]);
  } else if (!o.theta.empty()) {
    cfg = FilterConfig::ursf(o.theta[0]);
  }
  cfg.validate();
  run.parameters["filter"] = cfg.label();
  return cfg;
}

int cmd_filter(const Options& o, std::ostream& out) {
  Run run;
  run.command = "filter";
  const LinearGaussianModel model = load_model(o.model, run);
  const FilterConfig cfg = resolve_filter(o, run);
  const GaussianBelief init = load_init(o.init, model, run);
  const std::string data = io::read_text(o.data);
  run.input("data", data);
  const auto ys = io::parse_observations_csv(data, model.m());
  const auto steps = run_filter(model, cfg, init, ys);
  publish(run, o.out, {{"steps.csv", io::step_log_csv(steps, model.n())}}, out);
  return kOk;
}

int cmd_bench(const Options& o, const CLI::App& sub, std::ostream& out) {
  Run run;
  run.command = "bench";
  std::string text = "{}";
  if (!o.config.empty()) {
    text = io::read_text(o.config);
    run.input("config", text);
  }
  io::BenchSpec spec = io::parse_bench_config(text);
  if (sub.count("--seed") > 0) spec.mc.seed = o.seed;
  if (sub.count("--horizon") > 0) spec.mc.horizon = o.horizon;
  if (sub.count("--threads") > 0) spec.mc.threads = o.threads;
  run.seed = spec.mc.seed;
  run.parameters = {{"seed", std::to_string(spec.mc.seed)},
                    {"horizon", std::to_string(spec.mc.horizon)},
                    {"trials", std::to_string(spec.mc.trials)}};
  std::vector<Artifact> artifacts;
  for (const Scenario& s : spec.scenarios) {
    const MseReport r = run_monte_carlo(spec.mc, s);
    const std::string name(to_string(s.kind));
    out << name << ":";
    for (std::size_t f = 0; f < r.labels.size(); ++f) out << " " << r.labels[f] << "=" << short_num(r.time_average[f]);
    out << "\n";
    artifacts.push_back({"mse_" + name + ".csv", io::mse_csv(r)});
    artifacts.push_back({"mse_" + name + ".json", io::mse_json(r)});
  }
  publish(run, o.out, artifacts, out);
  return kOk;
}

// The filter whose least-favorable model is built: U-RKF for --c, U-RSF for --theta.
FilterConfig lf_target(const Options& o, Run& run) {
  if (o.c.size() + o.theta.size() != 1) throw ValidationError("lf needs exactly one --c or --theta value");
  const FilterConfig cfg = o.c.empty() ? FilterConfig::ursf(o.theta[0]) : FilterConfig::urkf(o.c[0]);
  cfg.validate();
  run.parameters["filter"] = cfg.label();
  run.parameters["horizon"] = std::to_string(o.horizon);
  return cfg;
}

LeastFavorableModel synthesize(const Options& o, Run& run, GaussianBelief& init) {
  const LinearGaussianModel model = load_model(o.model, run);
  const FilterConfig cfg = lf_target(o, run);
  init = load_init(o.init, model, run);
  const ForwardPass fwd = forward_gains(model, cfg, init.cov, o.horizon);
  return assemble_lf(fwd, backward_pass(fwd, model), model);
}

int cmd_lf_build(const Options& o, std::ostream& out) {
  Run run;
  run.command = "lf build";
  GaussianBelief init;
  const LeastFavorableModel lf = synthesize(o, run, init);
  publish(run, o.out, {{"lf_model.json", io::lf_model_json(lf)}}, out);
  return kOk;
}

int cmd_lf_simulate(const Options& o, std::ostream& out) {
  if (o.count == 0) throw ValidationError("--count must be positive");
  Run run;
  run.command = "lf simulate";
  run.seed = o.seed;
  run.parameters["seed"] = std::to_string(o.seed);
  run.parameters["count"] = std::to_string(o.count);
  GaussianBelief init;
  const LeastFavorableModel lf = synthesize(o, run, init);
  std::vector<Artifact> artifacts;
  for (std::size_t i = 0; i < o.count; ++i) {
    const std::string name = o.count == 1 ? "lf_trajectory.csv" : "lf_trajectory_" + std::to_string(i) + ".csv";
    artifacts.push_back({name, io::lf_trajectory_csv(simulate_lf(lf, init, o.seed, i))});
  }
  publish(run, o.out, artifacts, out);
  return kOk;
}

void add_model(CLI::App& app, Options& o) {
  app.add_option("--model", o.model, "model JSON {A, C, Q, R}")->required();
}

void add_out(CLI::App& app, Options& o) {
  app.add_option("--out", o.out, "output directory")->required();
}

void add_init(CLI::App& app, Options& o) {
  app.add_option("--init", o.init, "initial belief JSON {mean, cov}; default mean 0, cov 0.01 I");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Robust Kalman filtering under KL ambiguity: bounds, filtering, least-favorable models, benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", URKF_VERSION);

  CLI::App* bounds = app.add_subcommand("bounds", "c_MAX or theta_MAX for a model");
  bounds->add_option("mode", o.mode, "cmax | thetamax")->required()->check(CLI::IsMember({"cmax", "thetamax"}));
  add_model(*bounds, o);
  add_out(*bounds, o);
  bounds->add_option("--k", o.k, "observability window length")->capture_default_str();
  bounds->add_option("--q", o.q, "Riccati steps before P_bar")->capture_default_str();
  bounds->add_option("--config", o.config, "theta_MAX search JSON");
  bounds->add_option("--threads", o.threads, "worker cap, 0 for all cores");

  CLI::App* worst = app.add_subcommand("worstcase", "error variance of KF, P- and U- filters on the least-favorable model");
  add_model(*worst, o);
  add_out(*worst, o);
  add_init(*worst, o);
  worst->add_option("--c", o.c, "budgets (U-RKF attacked)")->delimiter(',');
  worst->add_option("--theta", o.theta, "risk parameters (U-RSF attacked)")->delimiter(',');
  worst->add_option("--horizon", o.horizon, "last time index")->capture_default_str();
  worst->add_option("--k", o.k, "window length for the c_MAX check")->capture_default_str();
  worst->add_option("--q", o.q, "Riccati steps for the c_MAX check")->capture_default_str();

  CLI::App* filter = app.add_subcommand("filter", "run a filter over an observation CSV");
  add_model(*filter, o);
  add_out(*filter, o);
  add_init(*filter, o);
  filter->add_option("--data", o.data, "observation CSV")->required();
  filter->add_option("--config", o.config, "filter config JSON");
  filter->add_option("--c", o.c, "U-RKF budget (instead of --config)");
  filter->add_option("--theta", o.theta, "U-RSF risk parameter (instead of --config)");

  CLI::App* bench = app.add_subcommand("bench", "mass-spring-damper Monte Carlo benchmark");
  add_out(*bench, o);
  bench->add_option("--config", o.config, "bench config JSON");
  bench->add_option("--seed", o.seed, "master seed (overrides the config)");
  bench->add_option("--horizon", o.horizon, "steps per trial (overrides the config)");
  bench->add_option("--threads", o.threads, "worker cap, 0 for all cores");

  CLI::App* lf = app.add_subcommand("lf", "least-favorable model");
  lf->require_subcommand(1);
  CLI::App* lf_build = lf->add_subcommand("build", "write the time-varying least-favorable model");
  CLI::App* lf_sim = lf->add_subcommand("simulate", "draw trajectories from the least-favorable model");
  for (CLI::App* s : {lf_build, lf_sim}) {
    add_model(*s, o);
    add_out(*s, o);
    add_init(*s, o);
    s->add_option("--c", o.c, "budget of the attacked U-RKF");
    s->add_option("--theta", o.theta, "risk parameter of the attacked U-RSF");
    s->add_option("--horizon", o.horizon, "last time index")->capture_default_str();
  }
  lf_sim->add_option("--seed", o.seed, "master seed")->capture_default_str();
  lf_sim->add_option("--count", o.count, "number of trajectories")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (bounds->parsed()) return cmd_bounds(o, out);
    if (worst->parsed()) return cmd_worstcase(o, out, err);
    if (filter->parsed()) return cmd_filter(o, out);
    if (bench->parsed()) return cmd_bench(o, *bench, out);
    if (lf_build->parsed()) return cmd_lf_build(o, out);
    if (lf_sim->parsed()) return cmd_lf_simulate(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kValidation;
}

}  // namespace urkf::cli
