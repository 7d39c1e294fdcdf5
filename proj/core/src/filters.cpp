#include "urkf/filters.hpp"

#include "urkf/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace urkf {

namespace {

bool uses_tolerance(FilterKind kind) { return kind == FilterKind::kUrkf || kind == FilterKind::kPrkf; }
bool uses_theta(FilterKind kind) { return kind == FilterKind::kUrsf || kind == FilterKind::kPrsf; }
bool prediction_side(FilterKind kind) { return kind == FilterKind::kPrkf || kind == FilterKind::kPrsf; }

// θ for a covariance, either solved from the budget or fixed by the config.
double distortion_theta(const FilterConfig& config, const Matrix& p) {
  if (uses_tolerance(config.kind)) {
    if (config.tolerance == 0.0) return 0.0;
    BudgetSolverOptions options;
    options.tolerance = config.solver_tol;
    return solve_budget(p, config.tolerance, options).theta;
  }
  if (uses_theta(config.kind)) return config.theta;
  return 0.0;
}

void check_belief(const LinearGaussianModel& model, const GaussianBelief& belief) {
  if (belief.mean.size() != model.n() || belief.cov.rows() != model.n() || belief.cov.cols() != model.n()) {
    throw ValidationError("belief dimensions do not match the model");
  }
}

}  // namespace

std::string_view to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kKf: return "kf";
    case FilterKind::kUrkf: return "urkf";
    case FilterKind::kPrkf: return "prkf";
    case FilterKind::kUrsf: return "ursf";
    case FilterKind::kPrsf: return "prsf";
  }
  return "unknown";
}

FilterKind parse_filter_kind(std::string_view name) {
  std::string key;
  for (char ch : name) {
    if (ch == '-' || ch == '_') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  for (FilterKind kind : {FilterKind::kKf, FilterKind::kUrkf, FilterKind::kPrkf, FilterKind::kUrsf,
                          FilterKind::kPrsf}) {
    if (key == to_string(kind)) return kind;
  }
  throw ValidationError("unknown filter kind '" + std::string(name) + "'");
}

void FilterConfig::validate() const {
  if (!std::isfinite(tolerance) || tolerance < 0.0) throw ValidationError("tolerance c must be >= 0");
  if (!std::isfinite(theta) || theta < 0.0) throw ValidationError("theta must be >= 0");
  if (!(solver_tol > 0.0)) throw ValidationError("solver tolerance must be positive");
  if (!uses_tolerance(kind) && tolerance != 0.0) {
    throw ValidationError(std::string(to_string(kind)) + " does not take a tolerance c");
  }
  if (!uses_theta(kind) && theta != 0.0) {
    throw ValidationError(std::string(to_string(kind)) + " does not take a fixed theta");
  }
}

std::string FilterConfig::label() const {
  std::ostringstream os;
  os << to_string(kind);
  if (uses_tolerance(kind)) os << "(c=" << tolerance << ")";
  if (uses_theta(kind)) os << "(theta=" << theta << ")";
  return os.str();
}

CovarianceStep covariance_step(const LinearGaussianModel& model, const FilterConfig& config,
                               const Matrix& prior_cov) {
  const auto n = model.n();
  const Matrix eye = Matrix::Identity(n, n);
  CovarianceStep s;
  s.prior_cov = prior_cov;

  if (prediction_side(config.kind)) {
    s.theta = distortion_theta(config, prior_cov);
    s.prior_distorted_cov = distort_covariance(prior_cov, s.theta);
  } else {
    s.prior_distorted_cov = prior_cov;
  }

  const Matrix& p = s.prior_distorted_cov;
  const Matrix pct = p * model.C.transpose();
  const Matrix innovation = symmetrize(model.C * pct + model.R);
  // L = P Cᵀ S^{-1}, solved as S Lᵀ = C P.
  s.gain = spd_solve(innovation, pct.transpose()).transpose();
  s.filtered_cov = symmetrize((eye - s.gain * model.C) * p);

  if (prediction_side(config.kind) || config.kind == FilterKind::kKf) {
    s.distorted_cov = s.filtered_cov;
  } else {
    s.theta = distortion_theta(config, s.filtered_cov);
    s.distorted_cov = distort_covariance(s.filtered_cov, s.theta);
  }
  s.predicted_cov = symmetrize(model.A * s.distorted_cov * model.A.transpose() + model.Q);
  return s;
}

FilterStep filter_step(const LinearGaussianModel& model, const FilterConfig& config,
                       const GaussianBelief& belief, const Vector& y) {
  check_belief(model, belief);
  if (y.size() != model.m()) throw ValidationError("observation dimension does not match the model");
  const CovarianceStep cov = covariance_step(model, config, belief.cov);
  FilterStep out;
  out.gain = cov.gain;
  out.theta = cov.theta;
  out.filtered_mean = belief.mean + cov.gain * (y - model.C * belief.mean);
  out.filtered_cov = cov.filtered_cov;
  out.distorted_cov = cov.distorted_cov;
  out.predicted_mean = model.A * out.filtered_mean;
  out.predicted_cov = cov.predicted_cov;
  return out;
}

FilterStep kf_step(const LinearGaussianModel& model, const GaussianBelief& belief, const Vector& y) {
  return filter_step(model, FilterConfig::kf(), belief, y);
}

FilterStep urkf_step(const LinearGaussianModel& model, const GaussianBelief& belief, const Vector& y,
                     double c, double solver_tol) {
  const FilterConfig config = FilterConfig::urkf(c, solver_tol);
  config.validate();
  return filter_step(model, config, belief, y);
}

FilterStep prkf_step(const LinearGaussianModel& model, const GaussianBelief& belief, const Vector& y,
                     double c, double solver_tol) {
  const FilterConfig config = FilterConfig::prkf(c, solver_tol);
  config.validate();
  return filter_step(model, config, belief, y);
}

FilterStep ursf_step(const LinearGaussianModel& model, const GaussianBelief& belief, const Vector& y,
                     double theta) {
  const FilterConfig config = FilterConfig::ursf(theta);
  config.validate();
  return filter_step(model, config, belief, y);
}

FilterStep prsf_step(const LinearGaussianModel& model, const GaussianBelief& belief, const Vector& y,
                     double theta) {
  const FilterConfig config = FilterConfig::prsf(theta);
  config.validate();
  return filter_step(model, config, belief, y);
}

std::vector<FilterStep> run_filter(const LinearGaussianModel& model, const FilterConfig& config,
                                   const GaussianBelief& init, const std::vector<Vector>& ys) {
  config.validate();
  validate(model);
  check_belief(model, init);
  std::vector<FilterStep> steps;
  steps.reserve(ys.size());
  GaussianBelief belief = init;
  for (std::size_t t = 0; t < ys.size(); ++t) {
    try {
      steps.push_back(filter_step(model, config, belief, ys[t]));
    } catch (const NumericalError& e) {
      rethrow_at_step(e, t);
    }
    belief = {steps.back().predicted_mean, steps.back().predicted_cov};
  }
  return steps;
}

std::vector<CovarianceStep> covariance_pass(const LinearGaussianModel& model, const FilterConfig& config,
                                            const Matrix& prior_cov, std::size_t horizon) {
  config.validate();
  std::vector<CovarianceStep> steps;
  steps.reserve(horizon + 1);
  Matrix p = prior_cov;
  for (std::size_t t = 0; t <= horizon; ++t) {
    try {
      steps.push_back(covariance_step(model, config, p));
    } catch (const NumericalError& e) {
      rethrow_at_step(e, t);
    }
    p = steps.back().predicted_cov;
  }
  return steps;
}

SteadyState steady_state(const LinearGaussianModel& model, const FilterConfig& config,
                         const Matrix& prior_cov, double tol, std::size_t max_iterations) {
  config.validate();
  SteadyState out;
  Matrix p = prior_cov;
  Matrix last_gain;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    try {
      out.step = covariance_step(model, config, p);
    } catch (const NumericalError& e) {
      rethrow_at_step(e, it);
    }
    out.iterations = it + 1;
    if (last_gain.size() != 0) {
      out.gain_change = (out.step.gain - last_gain).cwiseAbs().maxCoeff();
      if (out.gain_change < tol) return out;
    }
    last_gain = out.step.gain;
    p = out.step.predicted_cov;
  }
  throw ConvergenceError("steady_state: gain did not converge within the iteration cap");
}

std::vector<Vector> apply_gains(const LinearGaussianModel& model, const std::vector<Matrix>& gains,
                                const Vector& prior_mean, const std::vector<Vector>& ys) {
  if (gains.size() < ys.size()) throw ValidationError("gain schedule shorter than the observations");
  std::vector<Vector> means;
  means.reserve(ys.size());
  Vector prior = prior_mean;
  for (std::size_t t = 0; t < ys.size(); ++t) {
    means.push_back(prior + gains[t] * (ys[t] - model.C * prior));
    prior = model.A * means.back();
  }
  return means;
}

}  // namespace urkf
