#include "fixtures.hpp"

#include "urkf/errors.hpp"
#include "urkf/least_favorable.hpp"

#include <gtest/gtest.h>

using namespace urkf;
using namespace urkf::testing;

namespace {

struct Built {
  ForwardPass fwd;
  BackwardPass bwd;
  LeastFavorableModel lf;
};

Built build(const LinearGaussianModel& m, const FilterConfig& cfg, const Matrix& p0, std::size_t horizon) {
  Built b;
  b.fwd = forward_gains(m, cfg, p0, horizon);
  b.bwd = backward_pass(b.fwd, m);
  b.lf = assemble_lf(b.fwd, b.bwd, m);
  return b;
}

// KL(N(0, s0) ‖ N(0, s1)) from explicit inverses and determinants.
double kl_direct(const Matrix& s0, const Matrix& s1) {
  const double k = static_cast<double>(s0.rows());
  return 0.5 * ((s1.inverse() * s0).trace() - k + std::log(s1.determinant() / s0.determinant()));
}

LinearGaussianModel scalar_model(double a, double c, double q, double r) {
  LinearGaussianModel m;
  m.A = Matrix::Constant(1, 1, a);
  m.C = Matrix::Constant(1, 1, c);
  m.Q = Matrix::Constant(1, 1, q);
  m.R = Matrix::Constant(1, 1, r);
  return m;
}

}  // namespace

TEST(BackwardPass, TerminalConditions) {
  const auto m = worst_case_model();
  const auto b = build(m, FilterConfig::urkf(1e-2), 0.01 * Matrix::Identity(2, 2), 40);
  ASSERT_EQ(b.bwd.omega_inv.size(), 42u);
  EXPECT_EQ(b.bwd.omega_inv[41], Matrix::Zero(2, 2));
  EXPECT_LE(max_abs(b.bwd.w[40] - b.fwd.thetas[40] * Matrix::Identity(2, 2)), 0.0);
  for (std::size_t t = 0; t <= 40; ++t) {
    EXPECT_LE(max_abs(b.bwd.w[t] - (b.fwd.thetas[t] * Matrix::Identity(2, 2) + b.bwd.omega_inv[t + 1])), 1e-14);
    EXPECT_LE(max_abs(b.bwd.upsilon[t] * b.bwd.upsilon[t].transpose() - b.bwd.o[t]), 1e-12);
    EXPECT_GT(min_eig(b.bwd.o[t]), 0.0);
  }
}

TEST(BackwardPass, MatchesExplicitInverseRecursion) {
  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_model(rng, 2 + trial % 3, 1 + trial % 2);
    const auto n = m.n();
    const auto b = build(m, FilterConfig::urkf(1e-3), Matrix::Identity(n, n), 30);
    for (std::size_t t = 0; t <= 30; ++t) {
      const Matrix& l = b.fwd.gains[t];
      const Matrix w = b.bwd.w[t];
      const Matrix a_bar = (Matrix::Identity(n, n) - l * m.C) * m.A;
      const Matrix oracle = a_bar.transpose() * (w.inverse() - l * m.R * l.transpose()).inverse() * a_bar;
      EXPECT_LE(max_abs(b.bwd.omega_inv[t] - oracle), 1e-8 * std::max(1.0, max_abs(oracle)));
      const Matrix o = (m.R.inverse() - l.transpose() * w * l).inverse();
      EXPECT_LE(max_abs(b.bwd.o[t] - o), 1e-9 * max_abs(o));
    }
  }
}

TEST(BackwardPass, RiccatiAndComposedFormsAgree) {
  for (const auto& cfg : {FilterConfig::urkf(5e-2), FilterConfig::urkf(1e-2), FilterConfig::ursf(3.4e-3)}) {
    const auto m = cfg.kind == FilterKind::kUrsf ? risk_sensitive_model() : worst_case_model();
    const auto fwd = forward_gains(m, cfg, 0.01 * Matrix::Identity(2, 2), 200);
    const auto a = backward_pass(fwd, m, OmegaForm::kRiccati);
    const auto b = backward_pass(fwd, m, OmegaForm::kComposed);
    for (std::size_t t = 0; t < a.omega_inv.size(); ++t) {
      EXPECT_LE(max_abs(a.omega_inv[t] - b.omega_inv[t]), 1e-10 * std::max(1.0, max_abs(a.omega_inv[t])));
    }
  }
}

TEST(BackwardPass, RejectsPredictionSideFilters) {
  const auto m = worst_case_model();
  const auto fwd = forward_gains(m, FilterConfig::prkf(1e-2), 0.01 * Matrix::Identity(2, 2), 10);
  EXPECT_THROW((void)backward_pass(fwd, m), ValidationError);
}

TEST(BackwardPass, OversizedGainIsInfeasibleAtAStep) {
  // R^{-1} − LᵀWL < 0 from the terminal step on: 1 − 10²·0.5 < 0.
  const auto m = scalar_model(0.5, 1.0, 1.0, 1.0);
  ForwardPass fwd;
  fwd.config = FilterConfig::ursf(0.5);
  for (int t = 0; t <= 8; ++t) {
    fwd.gains.push_back(Matrix::Constant(1, 1, t < 8 ? 0.1 : 10.0));
    fwd.thetas.push_back(0.5);
  }
  try {
    (void)backward_pass(fwd, m);
    FAIL() << "expected the backward pass to break";
  } catch (const InfeasibleError& e) {
    ASSERT_TRUE(e.step().has_value());
    EXPECT_EQ(*e.step(), 8u);
  }
}

TEST(AssembleLf, BlockStructure) {
  const auto m = worst_case_model();
  const auto b = build(m, FilterConfig::urkf(1e-2), 0.01 * Matrix::Identity(2, 2), 20);
  ASSERT_EQ(b.lf.a_bar.size(), 21u);
  const auto n = 2;
  for (std::size_t t = 0; t <= 20; ++t) {
    const Matrix& a = b.lf.a_bar[t];
    EXPECT_EQ(a.rows(), 3 * n);
    EXPECT_EQ(a.block(0, 0, n, n), m.A);
    EXPECT_EQ(a.block(0, n, n, 2 * n), Matrix::Zero(n, 2 * n));
    EXPECT_EQ(a.block(n, 0, n, n), Matrix::Zero(n, n));
    EXPECT_EQ(a.block(2 * n, 0, n, 3 * n), Matrix::Zero(n, 3 * n));
    const Matrix& bb = b.lf.b_bar[t];
    EXPECT_EQ(bb.block(0, 0, n, n), Matrix::Identity(n, n));
    EXPECT_EQ(bb.block(2 * n, 0, n, n), Matrix::Identity(n, n));
    EXPECT_EQ(bb.block(0, n, n, 1), Matrix::Zero(n, 1));
    EXPECT_EQ(bb.block(n, 0, n, n), Matrix::Zero(n, n));
    EXPECT_EQ(bb.block(2 * n, n, n, 1), Matrix::Zero(n, 1));
    EXPECT_EQ(b.lf.c_bar[t].leftCols(n), m.C);
    EXPECT_EQ(b.lf.d_bar[t].leftCols(n), Matrix::Zero(1, n));
    EXPECT_EQ(b.lf.d_bar[t].rightCols(1), b.bwd.upsilon[t]);
  }
  EXPECT_EQ(b.lf.xi.topLeftCorner(n, n), m.Q);
  EXPECT_EQ(b.lf.xi(n, n), 1.0);
}

TEST(AssembleLf, ZeroBudgetIsTheNominalModel) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = random_model(rng, 2 + trial % 3, 1 + trial % 2);
    const auto n = m.n();
    const auto b = build(m, FilterConfig::kf(), Matrix::Identity(n, n), 15);
    for (std::size_t t = 0; t <= 15; ++t) {
      EXPECT_LE(max_abs(b.bwd.f[t]), 0.0);
      EXPECT_LE(max_abs(b.bwd.o[t] - m.R), 1e-12);
      EXPECT_LE(max_abs(b.lf.c_bar[t].rightCols(2 * n)), 0.0);
    }
    // Π's top-left block is the KF filtering covariance.
    const auto pi = error_cov_recursion(m, b.fwd, b.bwd, b.fwd.gains, Matrix::Identity(n, n));
    for (std::size_t t = 0; t <= 15; ++t) {
      EXPECT_LE(max_abs(pi[t].topLeftCorner(n, n) - b.fwd.filtered_covs[t]), 1e-10);
      EXPECT_LE(max_abs(pi[t].block(n, n, n, n) - b.fwd.filtered_covs[t]), 1e-10);
    }
  }
}

TEST(OneStepKl, EqualsTheBudget) {
  const auto m = worst_case_model();
  for (double c : {1e-3, 1e-2, 5e-2}) {
    const auto fwd = forward_gains(m, FilterConfig::urkf(c), 0.01 * Matrix::Identity(2, 2), 50);
    for (std::size_t t = 0; t <= 50; t += 7) {
      EXPECT_NEAR(one_step_kl(m, fwd, t), c, 1e-10);
      const JointPair j = one_step_joints(m, fwd, t);
      EXPECT_NEAR(kl_direct(j.distorted, j.nominal), c, 1e-9);
    }
  }
}

TEST(OneStepKl, RandomModels) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model(rng, 1 + trial % 4, 1 + trial % 3);
    const auto fwd = forward_gains(m, FilterConfig::urkf(0.02), Matrix::Identity(m.n(), m.n()), 5);
    for (std::size_t t = 0; t <= 5; ++t) {
      const JointPair j = one_step_joints(m, fwd, t);
      EXPECT_NEAR(kl_direct(j.distorted, j.nominal), 0.02, 1e-8);
    }
  }
}

TEST(ErrorCovariance, PositiveSemidefinite) {
  const auto m = worst_case_model();
  const auto b = build(m, FilterConfig::urkf(5e-2), 0.01 * Matrix::Identity(2, 2), 100);
  const auto kf = forward_gains(m, FilterConfig::kf(), 0.01 * Matrix::Identity(2, 2), 100);
  for (const auto* gains : {&b.fwd.gains, &kf.gains}) {
    const auto pi = error_cov_recursion(m, b.fwd, b.bwd, *gains, 0.01 * Matrix::Identity(2, 2));
    for (const auto& p : pi) EXPECT_GE(min_eig(p), -1e-10);
  }
}

TEST(ErrorCovariance, MatchesMonteCarloOfTheLfModel) {
  const auto m = worst_case_model();
  const Matrix p0 = 0.01 * Matrix::Identity(2, 2);
  const std::size_t horizon = 30;
  const auto b = build(m, FilterConfig::urkf(5e-2), p0, horizon);
  const auto pi = error_cov_recursion(m, b.fwd, b.bwd, b.fwd.gains, p0);
  const GaussianBelief init{Vector::Zero(2), p0};

  const int trials = 20000;
  Matrix s = Matrix::Zero(2, 2);
  for (int i = 0; i < trials; ++i) {
    const auto traj = simulate_lf(b.lf, init, 5, static_cast<std::uint64_t>(i));
    const auto means = apply_gains(m, b.fwd.gains, init.mean, traj.projected.observations);
    const Vector e = traj.projected.states[horizon] - means[horizon];
    s += e * e.transpose();
  }
  s /= trials;
  const Matrix target = pi[horizon].topLeftCorner(2, 2);
  EXPECT_NEAR(s.trace(), target.trace(), 0.04 * target.trace());
}

TEST(SimulateLf, InitialStateAndDeterminism) {
  const auto m = worst_case_model();
  const auto b = build(m, FilterConfig::urkf(1e-2), 0.01 * Matrix::Identity(2, 2), 10);
  const GaussianBelief init{(Vector(2) << 1.0, 2.0).finished(), 0.01 * Matrix::Identity(2, 2)};
  const auto t1 = simulate_lf(b.lf, init, 9, 3);
  const auto t2 = simulate_lf(b.lf, init, 9, 3);
  ASSERT_EQ(t1.augmented.size(), 11u);
  const Vector& eta = t1.augmented[0];
  EXPECT_EQ(eta.segment(2, 2), Vector::Zero(2));
  EXPECT_LE((eta.tail(2) - (eta.head(2) - init.mean)).cwiseAbs().maxCoeff(), 1e-15);
  for (std::size_t t = 0; t <= 10; ++t) {
    EXPECT_EQ(t1.augmented[t], t2.augmented[t]);
    EXPECT_EQ(t1.projected.observations[t], t2.projected.observations[t]);
  }
}

TEST(SimulateLf, ZeroBudgetMeasurementNoiseIsR) {
  LinearGaussianModel m = worst_case_model();
  m.R(0, 0) = 0.3;
  const auto b = build(m, FilterConfig::kf(), 0.01 * Matrix::Identity(2, 2), 5);
  double s = 0.0;
  const int trials = 20000;
  for (int i = 0; i < trials; ++i) {
    const auto traj = simulate_lf(b.lf, {Vector::Zero(2), 0.01 * Matrix::Identity(2, 2)}, 1,
                                  static_cast<std::uint64_t>(i));
    const Vector r = traj.projected.observations[3] - m.C * traj.projected.states[3];
    s += r.squaredNorm();
  }
  EXPECT_NEAR(s / trials, 0.3, 0.3 * 0.04);
}

TEST(SteadyStateW, ScalarFixedPointIsTheSmallerRoot) {
  const auto m = scalar_model(0.9, 1.0, 1.0, 0.5);
  const SteadyState kf = steady_state(m, FilterConfig::kf(), Matrix::Identity(1, 1));
  const Matrix gain = kf.step.gain;
  const double theta = 0.05;
  const auto res = steady_state_w(m, gain, theta);
  const double l = gain(0, 0);
  const double ab = (1.0 - l) * 0.9;
  // l²r W² − (1 − ā² + θ l² r) W + θ = 0
  const double qa = l * l * 0.5;
  const double qb = -(1.0 - ab * ab + theta * l * l * 0.5);
  const double root = (-qb - std::sqrt(qb * qb - 4.0 * qa * theta)) / (2.0 * qa);
  EXPECT_NEAR(res.w(0, 0), root, 1e-10 * root);
  EXPECT_LT(res.residual, 1e-12);
  EXPECT_LT(res.spectral_radius, 1.0);
}

TEST(SteadyStateW, MatchesTheMiddleOfALongBackwardPass) {
  const auto m = risk_sensitive_model();
  const double theta = 3.4e-3;
  const auto b = build(m, FilterConfig::ursf(theta), 0.01 * Matrix::Identity(2, 2), 600);
  const auto res = steady_state_w(m, b.fwd.gains[300], theta);
  EXPECT_LT(res.residual, 1e-9 * max_abs(res.w));
  EXPECT_LE(max_abs(res.w - b.bwd.w[300]), 1e-7 * max_abs(res.w));
}

TEST(SteadyStateW, ZeroThetaGivesZero) {
  const auto m = worst_case_model();
  const SteadyState kf = steady_state(m, FilterConfig::kf(), Matrix::Identity(2, 2));
  const auto res = steady_state_w(m, kf.step.gain, 0.0);
  EXPECT_EQ(res.w, Matrix::Zero(2, 2));
}

TEST(SteadyStateW, RejectsBadInput) {
  const auto m = worst_case_model();
  EXPECT_THROW((void)steady_state_w(m, Matrix::Zero(1, 2), 0.1), ValidationError);
  EXPECT_THROW((void)steady_state_w(m, Matrix::Zero(2, 1), -0.1), ValidationError);
}
