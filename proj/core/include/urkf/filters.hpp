#pragma once

#include "urkf/model.hpp"
#include "urkf/numerics.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace urkf {

enum class FilterKind {
  kKf,    // standard Kalman filter
  kUrkf,  // update-resilient: distorts P_{t|t} with a per-step KL budget c
  kPrkf,  // prediction-resilient: distorts P_t with a per-step KL budget c
  kUrsf,  // update-resilient risk-sensitive: fixed θ on P_{t|t}
  kPrsf,  // prediction risk-sensitive: fixed θ on P_t
};

[[nodiscard]] std::string_view to_string(FilterKind kind);
/// Accepts "kf", "urkf", "prkf", "ursf", "prsf" (case-insensitive, dashes ignored).
[[nodiscard]] FilterKind parse_filter_kind(std::string_view name);

struct FilterConfig {
  FilterKind kind = FilterKind::kKf;
  double tolerance = 0.0;  // c, for kUrkf / kPrkf. c = 0 reduces to the KF.
  double theta = 0.0;      // θ, for kUrsf / kPrsf. θ = 0 reduces to the KF.
  double solver_tol = 1e-12;

  static FilterConfig kf() { return {}; }
  static FilterConfig urkf(double c, double solver_tol = 1e-12) { return {FilterKind::kUrkf, c, 0.0, solver_tol}; }
  static FilterConfig prkf(double c, double solver_tol = 1e-12) { return {FilterKind::kPrkf, c, 0.0, solver_tol}; }
  static FilterConfig ursf(double theta) { return {FilterKind::kUrsf, 0.0, theta}; }
  static FilterConfig prsf(double theta) { return {FilterKind::kPrsf, 0.0, theta}; }

  /// Throws ValidationError when a parameter the kind does not use is set or
  /// the one it uses is negative or non-finite.
  void validate() const;
  /// Short label such as "urkf(c=0.05)".
  [[nodiscard]] std::string label() const;
};

/// Data-independent part of one filter step.
struct CovarianceStep {
  Matrix gain;                 // L_t
  double theta = 0.0;          // θ_t
  Matrix prior_cov;            // P_t
  Matrix prior_distorted_cov;  // P_t, or (P_t^{-1} − θI)^{-1} for prediction-side kinds
  Matrix filtered_cov;         // P_{t|t}
  Matrix distorted_cov;        // V_{t|t}
  Matrix predicted_cov;        // P_{t+1}
};

struct FilterStep {
  Matrix gain;
  double theta = 0.0;
  Vector filtered_mean;   // x̂_{t|t}
  Matrix filtered_cov;    // P_{t|t}
  Matrix distorted_cov;   // V_{t|t}
  Vector predicted_mean;  // x̂_{t+1}
  Matrix predicted_cov;   // P_{t+1}
};

/// One covariance recursion step of the configured filter from prior P_t.
[[nodiscard]] CovarianceStep covariance_step(const LinearGaussianModel& model,
                                             const FilterConfig& config, const Matrix& prior_cov);

[[nodiscard]] FilterStep filter_step(const LinearGaussianModel& model, const FilterConfig& config,
                                     const GaussianBelief& belief, const Vector& y);

[[nodiscard]] FilterStep kf_step(const LinearGaussianModel& model, const GaussianBelief& belief,
                                 const Vector& y);
[[nodiscard]] FilterStep urkf_step(const LinearGaussianModel& model, const GaussianBelief& belief,
                                   const Vector& y, double c, double solver_tol = 1e-12);
[[nodiscard]] FilterStep prkf_step(const LinearGaussianModel& model, const GaussianBelief& belief,
                                   const Vector& y, double c, double solver_tol = 1e-12);
[[nodiscard]] FilterStep ursf_step(const LinearGaussianModel& model, const GaussianBelief& belief,
                                   const Vector& y, double theta);
[[nodiscard]] FilterStep prsf_step(const LinearGaussianModel& model, const GaussianBelief& belief,
                                   const Vector& y, double theta);

/// Folds the configured step over `ys`. A numerical failure is rethrown with
/// the time index attached.
[[nodiscard]] std::vector<FilterStep> run_filter(const LinearGaussianModel& model,
                                                 const FilterConfig& config,
                                                 const GaussianBelief& init,
                                                 const std::vector<Vector>& ys);

/// Covariance-only recursion for t = 0..horizon (horizon + 1 steps).
[[nodiscard]] std::vector<CovarianceStep> covariance_pass(const LinearGaussianModel& model,
                                                          const FilterConfig& config,
                                                          const Matrix& prior_cov,
                                                          std::size_t horizon);

struct SteadyState {
  CovarianceStep step;
  std::size_t iterations = 0;
  double gain_change = 0.0;  // max-abs change of L over the last iteration
};

/// Iterates the covariance recursion until the gain changes by less than
/// `tol` (max-abs). Throws ConvergenceError after `max_iterations`.
[[nodiscard]] SteadyState steady_state(const LinearGaussianModel& model, const FilterConfig& config,
                                       const Matrix& prior_cov, double tol = 1e-12,
                                       std::size_t max_iterations = 100000);

/// Filtered means x̂_{t|t} for a precomputed gain schedule. Because the
/// covariance recursion is data-free, this is the whole filter for any kind.
[[nodiscard]] std::vector<Vector> apply_gains(const LinearGaussianModel& model,
                                              const std::vector<Matrix>& gains,
                                              const Vector& prior_mean, const std::vector<Vector>& ys);

}  // namespace urkf
