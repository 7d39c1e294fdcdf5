#include "urkf/model.hpp"

#include "urkf/errors.hpp"

#include <cmath>
#include <string>

namespace urkf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

ValidationReport validate(const LinearGaussianModel& model) {
  const auto n = model.A.rows();
  if (n == 0 || model.A.cols() != n) throw ValidationError("A must be a non-empty square matrix");
  if (model.C.cols() != n || model.C.rows() == 0) {
    throw ValidationError("C must have " + std::to_string(n) + " columns (got " +
                          std::to_string(model.C.cols()) + ")");
  }
  const auto m = model.C.rows();
  if (model.Q.rows() != n || model.Q.cols() != n) throw ValidationError("Q must be n x n");
  if (model.R.rows() != m || model.R.cols() != m) throw ValidationError("R must be m x m");
  if (!model.A.allFinite() || !model.C.allFinite()) throw ValidationError("A and C must be finite");
  require_sym_pd(model.Q, "Q");
  require_sym_pd(model.R, "R");

  ValidationReport report;
  report.observability_rank = observability_rank(model.A, model.C);
  report.observable = report.observability_rank == static_cast<std::size_t>(n);
  report.reachable = true;
  return report;
}

ActualMsdDynamics discretize_input_noise(const Matrix& a_c, const Matrix& b_c, double variance,
                                         double sample_time, NoiseDiscretization kind) {
  const auto n = a_c.rows();
  const auto p = b_c.cols();
  ActualMsdDynamics out;
  if (kind == NoiseDiscretization::kPiecewiseConstant) {
    Matrix aug = Matrix::Zero(n + p, n + p);
    aug.topLeftCorner(n, n) = a_c;
    aug.topRightCorner(n, p) = b_c;
    const Matrix e = expm(aug * sample_time);
    out.A = e.topLeftCorner(n, n);
    const Matrix gamma_in = e.topRightCorner(n, p);
    out.Q = symmetrize(variance * gamma_in * gamma_in.transpose());
    return out;
  }
  // Van Loan: exp([[−A, BσBᵀ], [0, Aᵀ]] T) = [[·, A_d^{-1} Q_d], [0, A_dᵀ]].
  Matrix aug = Matrix::Zero(2 * n, 2 * n);
  aug.topLeftCorner(n, n) = -a_c;
  aug.topRightCorner(n, n) = variance * b_c * b_c.transpose();
  aug.bottomRightCorner(n, n) = a_c.transpose();
  const Matrix e = expm(aug * sample_time);
  out.A = e.bottomRightCorner(n, n).transpose();
  out.Q = symmetrize(out.A * e.topRightCorner(n, n));
  return out;
}

MsdModels msd_discretize(const MsdParams& params) {
  if (!(params.mass > 0.0) || !(params.spring > 0.0) || !(params.damping > 0.0)) {
    throw ValidationError("MSD mass, spring and damping must be positive");
  }
  if (!(params.sample_time > 0.0)) throw ValidationError("MSD sample time must be positive");
  if (!(params.force_variance > 0.0) || !(params.nominal_force_variance > 0.0)) {
    throw ValidationError("MSD force variances must be positive");
  }
  if (params.disturbance_variance < 0.0) throw ValidationError("MSD disturbance variance must be >= 0");
  if (!(params.measurement_variance > 0.0)) throw ValidationError("measurement variance must be positive");
  if (params.q_floor < 0.0) throw ValidationError("q_floor must be >= 0");

  Matrix a_c(2, 2);
  a_c << 0.0, 1.0, -params.spring / params.mass, -params.damping / params.mass;
  Matrix b_c(2, 1);
  b_c << 0.0, 1.0 / params.mass;

  MsdModels out;
  const ActualMsdDynamics nominal = discretize_input_noise(
      a_c, b_c, params.nominal_force_variance, params.sample_time, params.nominal_noise);
  out.nominal.A = nominal.A;
  out.nominal.Q = nominal.Q;
  if (params.nominal_noise == NoiseDiscretization::kPiecewiseConstant) {
    out.nominal.Q += params.q_floor * Matrix::Identity(2, 2);
  }
  out.nominal.C = Matrix(1, 2);
  out.nominal.C << 1.0, 0.0;
  out.nominal.R = Matrix::Constant(1, 1, params.measurement_variance);

  // F and ν are independent; −c ν shares the force channel.
  const double input_variance =
      params.force_variance + params.damping * params.damping * params.disturbance_variance;
  out.actual = discretize_input_noise(a_c, b_c, input_variance, params.sample_time, params.actual_noise);
  if (params.actual_noise == NoiseDiscretization::kPiecewiseConstant) {
    out.actual.Q += params.q_floor * Matrix::Identity(2, 2);
  }
  return out;
}

std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t stream) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ (stream * 0xd1b54a32d192ed03ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

Vector draw_gaussian(const Matrix& l, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vector z(l.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return l * z;
}

Trajectory simulate_nominal(const LinearGaussianModel& model, const GaussianBelief& init,
                            std::size_t horizon, std::uint64_t seed) {
  validate(model);
  if (init.mean.size() != model.n() || init.cov.rows() != model.n() || init.cov.cols() != model.n()) {
    throw ValidationError("initial belief dimensions do not match the model");
  }
  auto rng_init = rng_stream(seed, 0, 0);
  auto rng_process = rng_stream(seed, 0, 1);
  auto rng_measure = rng_stream(seed, 0, 2);
  const Matrix q_half = spd_sqrt(model.Q);
  const Matrix r_half = spd_sqrt(model.R);

  Trajectory traj;
  traj.seed = seed;
  traj.states.reserve(horizon + 1);
  traj.observations.reserve(horizon + 1);
  Vector x = init.mean + draw_gaussian(spd_sqrt(init.cov), rng_init);
  for (std::size_t t = 0; t <= horizon; ++t) {
    traj.states.push_back(x);
    traj.observations.push_back(model.C * x + draw_gaussian(r_half, rng_measure));
    x = model.A * x + draw_gaussian(q_half, rng_process);
  }
  return traj;
}

}  // namespace urkf
