#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <utility>

namespace urkf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Result of inverting the γ budget function for a fixed covariance.
struct BudgetSolveResult {
  double theta = 0.0;
  double achieved_budget = 0.0;
  int iterations = 0;
};

struct BudgetSolverOptions {
  double tolerance = 1e-12;   // absolute, on |γ(P,θ) − c|
  int max_iterations = 200;
  double edge_margin = 1e-9;  // right bracket is (1 − margin)/σ_max(P)
};

/// Returns (X + Xᵀ)/2.
[[nodiscard]] Matrix symmetrize(const Matrix& x);

/// True when `x` is square, symmetric to `rel_tol` (relative to its max-abs
/// entry) and admits a Cholesky factorization.
[[nodiscard]] bool is_sym_pd(const Matrix& x, double rel_tol = 1e-10);

/// Throws ValidationError unless `x` is symmetric positive definite.
void require_sym_pd(const Matrix& x, const char* name);

/// γ(P,θ) = ½(ln det(I − θP) + tr((I − θP)^{-1} − I)).
///
/// This is the KL cost of distorting a Gaussian covariance P into
/// (P^{-1} − θI)^{-1}. It is evaluated on the eigenvalues of P so it stays
/// accurate near the blow-up at θ → 1/σ_max(P). Throws DomainError when
/// θ·σ_max(P) ≥ 1 and ValidationError for θ < 0.
[[nodiscard]] double gamma(const Matrix& p, double theta);

/// Finds θ with γ(P,θ) = c by bisection on (0, (1 − margin)/σ_max(P)).
/// γ is strictly increasing in θ, so the root is unique.
[[nodiscard]] BudgetSolveResult solve_budget(const Matrix& p, double budget,
                                             const BudgetSolverOptions& options = {});

/// KL divergence D(N(mean0, cov0) ‖ N(mean1, cov1)).
[[nodiscard]] double gaussian_kl(const Vector& mean0, const Matrix& cov0, const Vector& mean1,
                                 const Matrix& cov1);

/// Lower Cholesky factor L with LLᵀ = P. Throws FactorizationError when P is
/// not positive definite.
[[nodiscard]] Matrix spd_sqrt(const Matrix& p);

/// (smallest, largest) eigenvalue of a symmetric matrix.
[[nodiscard]] std::pair<double, double> spectral_extrema(const Matrix& s);

/// max |λ_i(F)| for a general square matrix.
[[nodiscard]] double spectral_radius(const Matrix& f);

/// Solves X = F X Fᵀ + V. Requires spectral radius of F < 1; throws
/// NumericalError otherwise. Kronecker direct solve up to dimension 20,
/// doubling iteration above.
[[nodiscard]] Matrix solve_discrete_lyapunov(const Matrix& f, const Matrix& v);

/// (P^{-1} − θI)^{-1} computed on the eigenbasis of P. Throws DomainError
/// when θ·σ_max(P) ≥ 1.
[[nodiscard]] Matrix distort_covariance(const Matrix& p, double theta);

/// Solves S X = B for symmetric positive definite S via Cholesky.
[[nodiscard]] Matrix spd_solve(const Matrix& s, const Matrix& b);

/// Rank of the observability matrix [C; CA; ...; CA^{n-1}].
[[nodiscard]] std::size_t observability_rank(const Matrix& a, const Matrix& c);

/// Matrix exponential (Eigen's scaling-and-squaring Padé implementation).
[[nodiscard]] Matrix expm(const Matrix& a);

}  // namespace urkf
