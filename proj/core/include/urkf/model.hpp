#pragma once

#include "urkf/numerics.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace urkf {

/// Nominal time-invariant model x_{t+1} = A x_t + w_t, y_t = C x_t + v_t with
/// w ~ N(0, Q), v ~ N(0, R).
struct LinearGaussianModel {
  Matrix A;
  Matrix C;
  Matrix Q;
  Matrix R;

  [[nodiscard]] Eigen::Index n() const { return A.rows(); }
  [[nodiscard]] Eigen::Index m() const { return C.rows(); }
};

struct ValidationReport {
  bool observable = false;
  bool reachable = false;  // always true once Q ≻ 0 has been checked
  std::size_t observability_rank = 0;
};

/// Throws ValidationError on inconsistent dimensions or non-PD Q / R.
/// Observability is reported, not enforced.
ValidationReport validate(const LinearGaussianModel& model);

struct GaussianBelief {
  Vector mean;
  Matrix cov;
};

/// States x_0..x_N and observations y_0..y_N.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> observations;
  std::uint64_t seed = 0;
};

/// How a continuous-time force enters the discrete process noise.
enum class NoiseDiscretization {
  kPiecewiseConstant,  // force held constant over each sample (Q = Γ σ² Γᵀ)
  kContinuousWhite,    // white force integrated exactly (Van Loan)
};

struct MsdParams {
  double mass = 0.1;
  double spring = 5.0;
  double damping = 2.0;
  double force_variance = 0.9;          // actual plant
  double disturbance_variance = 0.09;   // damper disturbance, actual plant
  double nominal_force_variance = 1.0;
  double sample_time = 0.1;
  double measurement_variance = 0.25;
  NoiseDiscretization nominal_noise = NoiseDiscretization::kPiecewiseConstant;
  NoiseDiscretization actual_noise = NoiseDiscretization::kContinuousWhite;
  // Added to a rank-deficient piecewise-constant Q so that Q ≻ 0.
  double q_floor = 1e-9;
};

/// Effective discrete dynamics of the actual plant: x_{t+1} = A x_t + w_t,
/// w ~ N(0, Q). The sensor is scenario-specific and lives in bench.
struct ActualMsdDynamics {
  Matrix A;
  Matrix Q;
};

struct MsdModels {
  LinearGaussianModel nominal;
  ActualMsdDynamics actual;
};

/// Continuous dynamics ẋ = A_c x + B_c (F − c ν), discretized with sample time
/// T_s. C = [1 0], R = measurement_variance.
MsdModels msd_discretize(const MsdParams& params);

/// Discrete (A, Q) for a scalar force of variance `variance` entering through
/// `b`. Exposed for tests of the two conventions.
ActualMsdDynamics discretize_input_noise(const Matrix& a_c, const Matrix& b_c, double variance,
                                         double sample_time, NoiseDiscretization kind);

/// Independent generator for a (seed, trial, stream) triple. Streams never
/// overlap in practice because the three words are mixed through SplitMix64.
std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream);

/// Returns l·z with z a standard normal vector of matching size.
Vector draw_gaussian(const Matrix& l, std::mt19937_64& rng);

/// Simulates N+1 steps of the nominal model from x_0 ~ init.
Trajectory simulate_nominal(const LinearGaussianModel& model, const GaussianBelief& init,
                            std::size_t horizon, std::uint64_t seed);

}  // namespace urkf
