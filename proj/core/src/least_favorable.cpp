#include "urkf/least_favorable.hpp"

#include "urkf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace urkf {

ForwardPass forward_gains(const LinearGaussianModel& model, const FilterConfig& config, const Matrix& p0,
                          std::size_t horizon) {
  validate(model);
  const auto steps = covariance_pass(model, config, p0, horizon);
  ForwardPass fwd;
  fwd.config = config;
  for (const auto& s : steps) {
    fwd.gains.push_back(s.gain);
    fwd.thetas.push_back(s.theta);
    fwd.prior_covs.push_back(s.prior_cov);
    fwd.filtered_covs.push_back(s.filtered_cov);
    fwd.distorted_covs.push_back(s.distorted_cov);
  }
  return fwd;
}

BackwardPass backward_pass(const ForwardPass& fwd, const LinearGaussianModel& model, OmegaForm form) {
  if (fwd.config.kind == FilterKind::kPrkf || fwd.config.kind == FilterKind::kPrsf) {
    throw ValidationError("least-favorable synthesis needs an update-side forward pass (kf, urkf or ursf)");
  }
  if (fwd.gains.empty()) throw ValidationError("empty forward pass");
  const auto n = model.n();
  const auto m = model.m();
  const std::size_t horizon = fwd.horizon();
  const Matrix eye_n = Matrix::Identity(n, n);
  const Matrix eye_m = Matrix::Identity(m, m);
  const Matrix r_inv = symmetrize(spd_solve(model.R, eye_m));

  BackwardPass bwd;
  bwd.omega_inv.assign(horizon + 2, Matrix::Zero(n, n));
  bwd.w.resize(horizon + 1);
  bwd.o.resize(horizon + 1);
  bwd.f.resize(horizon + 1);
  bwd.upsilon.resize(horizon + 1);

  for (std::size_t i = horizon + 1; i-- > 0;) {
    const Matrix& l = fwd.gains[i];
    const Matrix w = symmetrize(fwd.thetas[i] * eye_n + bwd.omega_inv[i + 1]);
    const Matrix o_inv = symmetrize(r_inv - l.transpose() * w * l);
    Eigen::LLT<Matrix> llt(o_inv);
    if (llt.info() != Eigen::Success) {
      throw InfeasibleError("R^-1 - L'WL is not positive definite; budget too large for the least favorable model", i);
    }
    const Matrix o = symmetrize(llt.solve(eye_m));
    const Matrix f = -o * l.transpose() * w * (eye_n - l * model.C);
    const Matrix a_bar = model.A - l * model.C * model.A;

    Matrix omega;
    if (form == OmegaForm::kRiccati) {
      const Matrix wl = w * l;
      omega = a_bar.transpose() * (w + wl * o * wl.transpose()) * a_bar;
    } else {
      const Matrix fa = f * model.A;
      omega = fa.transpose() * o_inv * fa + a_bar.transpose() * w * a_bar;
    }
    bwd.omega_inv[i] = symmetrize(omega);
    bwd.w[i] = w;
    bwd.o[i] = o;
    bwd.f[i] = f;
    try {
      bwd.upsilon[i] = spd_sqrt(o);
    } catch (const NumericalError& e) {
      rethrow_at_step(e, i);
    }
  }
  return bwd;
}

LeastFavorableModel assemble_lf(const ForwardPass& fwd, const BackwardPass& bwd,
                                const LinearGaussianModel& model) {
  if (bwd.f.size() != fwd.gains.size()) throw ValidationError("forward and backward horizons differ");
  const auto n = model.n();
  const auto m = model.m();
  const Matrix eye_n = Matrix::Identity(n, n);

  LeastFavorableModel lf;
  lf.n = n;
  lf.m = m;
  lf.xi = Matrix::Zero(n + m, n + m);
  lf.xi.topLeftCorner(n, n) = model.Q;
  lf.xi.bottomRightCorner(m, m) = Matrix::Identity(m, m);

  for (std::size_t t = 0; t < fwd.gains.size(); ++t) {
    const Matrix& l = fwd.gains[t];
    const Matrix& f = bwd.f[t];
    const Matrix& ups = bwd.upsilon[t];
    const Matrix fa = f * model.A;

    Matrix a_bar = Matrix::Zero(3 * n, 3 * n);
    a_bar.block(0, 0, n, n) = model.A;
    a_bar.block(n, n, n, n) = model.A - l * model.C * model.A - l * fa;
    a_bar.block(n, 2 * n, n, n) = eye_n - l * f - l * model.C;

    Matrix b_bar = Matrix::Zero(3 * n, n + m);
    b_bar.block(0, 0, n, n) = eye_n;
    b_bar.block(n, n, n, m) = -l * ups;
    b_bar.block(2 * n, 0, n, n) = eye_n;

    Matrix c_bar(m, 3 * n);
    c_bar << model.C, fa, f;

    Matrix d_bar = Matrix::Zero(m, n + m);
    d_bar.block(0, n, m, m) = ups;

    lf.a_bar.push_back(std::move(a_bar));
    lf.b_bar.push_back(std::move(b_bar));
    lf.c_bar.push_back(std::move(c_bar));
    lf.d_bar.push_back(std::move(d_bar));
  }
  return lf;
}

LfTrajectory simulate_lf(const LeastFavorableModel& lf, const GaussianBelief& init, std::uint64_t seed,
                         std::uint64_t trial) {
  const auto n = lf.n;
  if (init.mean.size() != n || init.cov.rows() != n) throw ValidationError("initial belief dimension mismatch");
  auto rng_init = rng_stream(seed, trial, 0);
  auto rng_noise = rng_stream(seed, trial, 1);
  const Matrix xi_half = spd_sqrt(lf.xi);

  LfTrajectory out;
  out.projected.seed = seed;
  Vector eta = Vector::Zero(3 * n);
  const Vector x0 = init.mean + draw_gaussian(spd_sqrt(init.cov), rng_init);
  eta.head(n) = x0;
  eta.tail(n) = x0 - init.mean;
  for (std::size_t t = 0; t < lf.a_bar.size(); ++t) {
    const Vector v = draw_gaussian(xi_half, rng_noise);
    out.augmented.push_back(eta);
    out.projected.states.push_back(eta.head(n));
    out.projected.observations.push_back(lf.c_bar[t] * eta + lf.d_bar[t] * v);
    eta = lf.a_bar[t] * eta + lf.b_bar[t] * v;
  }
  return out;
}

std::vector<Matrix> error_cov_recursion(const LinearGaussianModel& model, const ForwardPass& fwd,
                                        const BackwardPass& bwd, const std::vector<Matrix>& eval_gains,
                                        const Matrix& p0) {
  if (eval_gains.size() != fwd.gains.size() || bwd.f.size() != fwd.gains.size()) {
    throw ValidationError("error_cov_recursion: horizon mismatch");
  }
  const auto n = model.n();
  const auto m = model.m();
  const Matrix eye_n = Matrix::Identity(n, n);
  const Matrix& a = model.A;
  const Matrix& c = model.C;

  Matrix xi = Matrix::Zero(n + m, n + m);
  xi.topLeftCorner(n, n) = model.Q;
  xi.bottomRightCorner(m, m) = Matrix::Identity(m, m);

  Matrix pi = Matrix::Zero(3 * n, 3 * n);
  pi.bottomRightCorner(n, n) = p0;
  std::vector<Matrix> out;
  out.reserve(fwd.gains.size());
  for (std::size_t t = 0; t < fwd.gains.size(); ++t) {
    const Matrix& le = eval_gains[t];
    const Matrix& l = fwd.gains[t];
    const Matrix& f = bwd.f[t];
    const Matrix fa = f * a;

    Matrix gamma_t = Matrix::Zero(3 * n, 3 * n);
    gamma_t.block(0, 0, n, n) = a - le * c * a;
    gamma_t.block(0, n, n, n) = -le * fa;
    gamma_t.block(0, 2 * n, n, n) = eye_n - le * f - le * c;
    gamma_t.block(n, n, n, n) = a - l * c * a - l * fa;
    gamma_t.block(n, 2 * n, n, n) = eye_n - l * f - l * c;

    Matrix x_t = Matrix::Zero(3 * n, n + m);
    x_t.block(0, n, n, m) = -le * bwd.upsilon[t];
    x_t.block(n, n, n, m) = -l * bwd.upsilon[t];
    x_t.block(2 * n, 0, n, n) = eye_n;

    pi = symmetrize(gamma_t * pi * gamma_t.transpose() + x_t * xi * x_t.transpose());
    out.push_back(pi);
  }
  return out;
}

SteadyStateW steady_state_w(const LinearGaussianModel& model, const Matrix& gain, double theta,
                            const SteadyStateWOptions& options) {
  const auto n = model.n();
  const auto m = model.m();
  if (gain.rows() != n || gain.cols() != m) throw ValidationError("steady_state_w: gain must be n x m");
  if (theta < 0.0) throw ValidationError("steady_state_w: theta must be >= 0");
  const Matrix eye_n = Matrix::Identity(n, n);
  const Matrix r_inv = symmetrize(spd_solve(model.R, Matrix::Identity(m, m)));
  const Matrix a_bar = (eye_n - gain * model.C) * model.A;

  auto step = [&](const Matrix& w, std::size_t it) {
    const Matrix o_inv = symmetrize(r_inv - gain.transpose() * w * gain);
    Eigen::LLT<Matrix> llt(o_inv);
    if (llt.info() != Eigen::Success) {
      throw InfeasibleError("steady_state_w: R^-1 - L'WL lost definiteness; reduce theta or c", it);
    }
    const Matrix wl = w * gain;
    return Matrix(symmetrize(a_bar.transpose() * (w + wl * llt.solve(wl.transpose())) * a_bar +
                             theta * eye_n));
  };

  SteadyStateW out;
  Matrix w = theta * eye_n;
  std::size_t calm = 0;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    const Matrix next = step(w, it);
    const double scale = std::max(next.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double change = (next - w).cwiseAbs().maxCoeff() / scale;
    w = next;
    out.iterations = it;
    calm = change < options.rel_tol || theta == 0.0 ? calm + 1 : 0;
    if (calm >= options.window) break;
  }
  if (calm < options.window) {
    throw ConvergenceError("steady_state_w: no fixed point within the iteration cap; try a smaller theta or c");
  }
  out.w = w;
  out.residual = (step(w, out.iterations) - w).cwiseAbs().maxCoeff();
  const Matrix lwl = gain.transpose() * w * gain - r_inv;
  out.j = a_bar.transpose() * w * gain * lwl.inverse();
  out.spectral_radius = spectral_radius(a_bar - gain * out.j.transpose());
  return out;
}

JointPair one_step_joints(const LinearGaussianModel& model, const ForwardPass& fwd, std::size_t t) {
  if (t >= fwd.gains.size()) throw ValidationError("one_step_joints: t outside the forward pass");
  const auto n = model.n();
  const auto m = model.m();
  const Matrix& p = fwd.prior_covs[t];
  const Matrix& l = fwd.gains[t];
  const Matrix pct = p * model.C.transpose();
  const Matrix ky = symmetrize(model.C * pct + model.R);

  JointPair out;
  out.nominal = Matrix(n + m, n + m);
  out.nominal << p, pct, pct.transpose(), ky;
  out.nominal = symmetrize(out.nominal);
  out.distorted = out.nominal;
  out.distorted.topLeftCorner(n, n) = symmetrize(fwd.distorted_covs[t] + l * ky * l.transpose());
  return out;
}

double one_step_kl(const LinearGaussianModel& model, const ForwardPass& fwd, std::size_t t) {
  const JointPair joints = one_step_joints(model, fwd, t);
  const Vector zero = Vector::Zero(joints.nominal.rows());
  return gaussian_kl(zero, joints.distorted, zero, joints.nominal);
}

}  // namespace urkf
