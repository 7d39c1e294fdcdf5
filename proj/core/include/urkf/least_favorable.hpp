#pragma once

#include "urkf/filters.hpp"
#include "urkf/model.hpp"

#include <cstdint>
#include <vector>

namespace urkf {

/// Covariance recursion of the filter whose adversary is being synthesized,
/// for t = 0..N.
struct ForwardPass {
  FilterConfig config;
  std::vector<Matrix> gains;           // L_t
  std::vector<double> thetas;          // θ_t
  std::vector<Matrix> prior_covs;      // P_t
  std::vector<Matrix> filtered_covs;   // P_{t|t}
  std::vector<Matrix> distorted_covs;  // V_{t|t}

  [[nodiscard]] std::size_t horizon() const { return gains.empty() ? 0 : gains.size() - 1; }
};

/// Runs the covariance recursion of `config` (KF, U-RKF or U-RSF) from P_0.
[[nodiscard]] ForwardPass forward_gains(const LinearGaussianModel& model, const FilterConfig& config,
                                        const Matrix& p0, std::size_t horizon);

/// Backward recursion quantities, all indexed by t = 0..N.
struct BackwardPass {
  std::vector<Matrix> omega_inv;  // Ω_t^{-1}; entry N+1 is the zero terminal condition
  std::vector<Matrix> w;          // W_{t+1} = θ_t I + Ω_{t+1}^{-1}
  std::vector<Matrix> o;          // O_t = (R^{-1} − L_tᵀ W_{t+1} L_t)^{-1}
  std::vector<Matrix> f;          // F_t = −O_t L_tᵀ W_{t+1} (I − L_t C)
  std::vector<Matrix> upsilon;    // lower Cholesky factor of O_t
};

enum class OmegaForm {
  kRiccati,   // Āᵀ(W + W L O Lᵀ W)Ā, i.e. Āᵀ(W^{-1} − LRLᵀ)^{-1}Ā without inverting W
  kComposed,  // (FA)ᵀ O^{-1} (FA) + Āᵀ W Ā
};

/// Throws InfeasibleError (with t) when R^{-1} − L_tᵀ W_{t+1} L_t is not PD.
[[nodiscard]] BackwardPass backward_pass(const ForwardPass& fwd, const LinearGaussianModel& model,
                                         OmegaForm form = OmegaForm::kRiccati);

/// Time-varying model on the augmented state η_t = [x_t; e_{t−1}; ε_{t−1}]:
/// η_{t+1} = Ā_t η_t + B̄_t v_t, y_t = C̄_t η_t + D̄_t v_t, v_t ~ N(0, Ξ).
struct LeastFavorableModel {
  std::vector<Matrix> a_bar;  // 3n × 3n
  std::vector<Matrix> b_bar;  // 3n × (n+m)
  std::vector<Matrix> c_bar;  // m × 3n
  std::vector<Matrix> d_bar;  // m × (n+m)
  Matrix xi;                  // blockdiag(Q, I_m)
  Eigen::Index n = 0;
  Eigen::Index m = 0;

  [[nodiscard]] std::size_t horizon() const { return a_bar.empty() ? 0 : a_bar.size() - 1; }
};

[[nodiscard]] LeastFavorableModel assemble_lf(const ForwardPass& fwd, const BackwardPass& bwd,
                                              const LinearGaussianModel& model);

struct LfTrajectory {
  std::vector<Vector> augmented;  // η_0..η_N
  Trajectory projected;           // x_t and y_t
};

/// Draws one trajectory of the least-favorable model. x_0 ~ init and the
/// filter being attacked starts from init.mean, so e_{−1} = 0 and
/// ε_{−1} = x_0 − x̂_0 (the t = 0 prediction error).
[[nodiscard]] LfTrajectory simulate_lf(const LeastFavorableModel& lf, const GaussianBelief& init,
                                       std::uint64_t seed, std::uint64_t trial = 0);

/// Π_t = cov([e′_t; e_t; ε_t]) for t = 0..N, where e′ is the filtering error
/// of an estimator with gains `eval_gains` run on the least-favorable model
/// and e that of the filter in `fwd`. Starts from Π_{−1} = blockdiag(0, 0, P_0).
[[nodiscard]] std::vector<Matrix> error_cov_recursion(const LinearGaussianModel& model,
                                                      const ForwardPass& fwd, const BackwardPass& bwd,
                                                      const std::vector<Matrix>& eval_gains,
                                                      const Matrix& p0);

struct SteadyStateW {
  Matrix w;
  Matrix j;  // J = ĀᵀWL(LᵀWL − R^{-1})^{-1}
  double spectral_radius = 0.0;  // of Ā − L Jᵀ
  double residual = 0.0;         // max-abs fixed-point residual
  std::size_t iterations = 0;
};

struct SteadyStateWOptions {
  double rel_tol = 1e-10;
  std::size_t window = 10;  // consecutive iterations below rel_tol
  std::size_t max_iterations = 100000;
};

/// Fixed point of W ← Āᵀ(W^{-1} − LRLᵀ)^{-1}Ā + θI, Ā = (I − LC)A, from W = θI.
/// Throws ConvergenceError on non-convergence and InfeasibleError when
/// R^{-1} − LᵀWL loses definiteness along the way.
[[nodiscard]] SteadyStateW steady_state_w(const LinearGaussianModel& model, const Matrix& gain,
                                          double theta, const SteadyStateWOptions& options = {});

/// One-step joint of (x_t, y_t) given the past under the nominal model and
/// under the least-favorable distortion at step t of `fwd`.
struct JointPair {
  Matrix nominal;    // [[P, PCᵀ], [CP, CPCᵀ + R]]
  Matrix distorted;  // same with the xx block replaced by V_{t|t} + L K_y Lᵀ
};

[[nodiscard]] JointPair one_step_joints(const LinearGaussianModel& model, const ForwardPass& fwd,
                                        std::size_t t);

/// KL divergence of the distorted joint from the nominal one at step t.
[[nodiscard]] double one_step_kl(const LinearGaussianModel& model, const ForwardPass& fwd, std::size_t t);

}  // namespace urkf
