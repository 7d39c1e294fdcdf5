#pragma once

#include "urkf/model.hpp"

#include <string>

namespace urkf {

/// Window-k stacks used to build R_k. Blocks are ordered newest first, so the
/// top block of 𝒪 is CA^{k−1} and the bottom one is C.
struct GramianParts {
  std::size_t k = 0;
  Matrix obs;    // 𝒪_k, km × n
  Matrix obs_r;  // 𝒪_k^R = [A^{k−1}; ...; I], kn × n
  Matrix noise;  // 𝒬_k = I_k ⊗ R, km × km
  Matrix h;      // ℋ_k, km × kn, block (i, j) = C A^{j−i−1} Q^{1/2} for j > i
  Matrix l;      // ℒ_k, kn × kn, block (i, j) = A^{j−i−1} Q^{1/2} for j > i
};

/// Throws ValidationError when k < n.
[[nodiscard]] GramianParts build_gramian_parts(const LinearGaussianModel& model, std::size_t k);

/// Evaluates R_k(φ) = 𝒪ᵀ(𝒬 + ℋℋᵀ)^{-1}𝒪 + 𝒥ᵀ S^{-1} 𝒥 with
/// S = M − φ^{-1} I, M = ℒ(I + ℋᵀ𝒬^{-1}ℋ)^{-1}ℒᵀ and 𝒥 = 𝒪^R − ℒℋᵀ(𝒬 + ℋℋᵀ)^{-1}𝒪.
/// The φ-independent pieces and the eigendecomposition of M are computed once.
class RkEvaluator {
 public:
  explicit RkEvaluator(const GramianParts& parts);

  /// Throws NumericalError when φ^{-1} hits an eigenvalue of M.
  [[nodiscard]] Matrix operator()(double phi) const;
  [[nodiscard]] double min_eigenvalue(double phi) const;
  /// 1/λ_max(M): S is singular there. +∞ when M = 0.
  [[nodiscard]] double breakpoint() const { return breakpoint_; }

 private:
  Matrix base_;       // 𝒪ᵀ(𝒬 + ℋℋᵀ)^{-1}𝒪
  Matrix projected_;  // Uᵀ𝒥 with M = U diag(μ) Uᵀ
  Vector mu_;
  double breakpoint_ = 0.0;
};

[[nodiscard]] Matrix rk_matrix(const GramianParts& parts, double phi);

struct PhiSearchOptions {
  double rel_tol = 1e-9;  // bisection stops when hi − lo ≤ rel_tol · lo
  int max_iterations = 400;
};

struct PhiResult {
  double phi = 0.0;          // largest φ found with R_k(φ) ≻ 0
  double upper = 0.0;        // right end of the search interval
  double min_eig_at_phi = 0.0;
  int iterations = 0;
};

/// Largest φ with R_k(φ) ≻ 0, by bisection on the sign of λ_min(R_k(φ)) over
/// (0, 1/λ_max(M)). Throws ValidationError when R_k is not PD even for tiny φ
/// (the model is not observable over the window).
[[nodiscard]] PhiResult phi_max(const LinearGaussianModel& model, std::size_t k,
                                const PhiSearchOptions& options = {});

/// P̄_{q|q}: q undistorted Riccati steps from P̄_0 = Q, then a measurement update.
[[nodiscard]] Matrix pbar_filtered(const LinearGaussianModel& model, std::size_t q);

struct CmaxReport {
  std::size_t k = 0;
  std::size_t q = 0;
  PhiResult phi;
  Matrix pbar_qq;
  double c_max = 0.0;  // γ(P̄_{q|q}, φ_k)
};

[[nodiscard]] CmaxReport c_max(const LinearGaussianModel& model, std::size_t k = 10, std::size_t q = 20,
                               const PhiSearchOptions& options = {});

struct SigmaBeta {
  Matrix sigma;  // Σ = ρ²FΣFᵀ + GRGᵀ + Q, F = A − αGC
  double beta = 0.0;
};

/// Throws ValidationError when α ∉ (0, 1], ρ ≤ 1 or ρ · r(A − αGC) ≥ 1.
[[nodiscard]] SigmaBeta sigma_beta(const LinearGaussianModel& model, const Matrix& gain, double alpha,
                                   double rho);

struct ThetaMaxSearch {
  int alpha_points = 100;     // uniform in (0, 1]
  int gain_points = 21;       // per entry of G, uniform in [−gain_bound, gain_bound]
  double gain_bound = 10.0;
  int rho_points = 50;        // log-spaced, strictly inside (1, 1/r)
  int refinement_rounds = 3;
  double refinement_factor = 10.0;
  unsigned threads = 0;       // 0: hardware concurrency
};

struct ThetaMaxCandidate {
  double rho = 0.0;
  double alpha = 0.0;
  Matrix gain;
  double beta = 0.0;
  Matrix sigma;
  double theta_max = 0.0;  // min(β, φ_k)
};

struct ThetaMaxReport {
  std::size_t k = 0;
  PhiResult phi;
  ThetaMaxCandidate update;      // α free
  ThetaMaxCandidate prediction;  // α = 1
  std::size_t grid_evaluations = 0;
  std::size_t admissible_evaluations = 0;
};

/// Maximizes β over (ρ, α, G) on the grid, refines by repeated coordinate sweeps, and
/// reports θ_MAX = min(β, φ_k) for α free and for α = 1. Ties are broken
/// towards the lexicographically smallest (ρ, α, G).
[[nodiscard]] ThetaMaxReport theta_max(const LinearGaussianModel& model, std::size_t k = 10,
                                       const ThetaMaxSearch& search = {});

struct RsfBoundCertificate {
  bool holds = false;
  std::string reason;
  SigmaBeta sigma_beta;
};

/// Checks 0 ≺ P_0 ⪯ Σ_{ρ,α} and θ ≤ β_{ρ,α}, the conditions under which the
/// U-RSF recursion stays below Σ_{ρ,α} with V_{t|t} ≻ 0 at every step.
[[nodiscard]] RsfBoundCertificate rsf_bound_guard(const LinearGaussianModel& model, double theta,
                                                   const Matrix& p0, const Matrix& gain, double alpha, double rho);

}  // namespace urkf
