#include "urkf/numerics.hpp"

#include "urkf/errors.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace urkf {

namespace {

constexpr std::size_t kKroneckerMaxDim = 20;

// log1p(−x) + x/(1 − x) = Σ_{k≥2} (k−1)/k · x^k. The closed form cancels
// badly for tiny x, which is exactly the regime of c → 0 budgets.
double gamma_term(double x) {
  if (std::abs(x) < 1e-2) {
    double sum = 0.0;
    double power = x;
    for (int k = 2; k <= 10; ++k) {
      power *= x;
      sum += (static_cast<double>(k - 1) / k) * power;
    }
    return sum;
  }
  return std::log1p(-x) + x / (1.0 - x);
}

Eigen::VectorXd symmetric_eigenvalues(const Matrix& p) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(p, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigenvalue decomposition failed");
  }
  return solver.eigenvalues();
}

double gamma_from_eigenvalues(const Eigen::VectorXd& eig, double theta) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    sum += gamma_term(theta * eig(i));
  }
  return 0.5 * sum;
}

void require_square(const Matrix& x, const char* name) {
  if (x.rows() != x.cols() || x.rows() == 0) {
    throw ValidationError(std::string(name) + " must be a non-empty square matrix");
  }
}

bool is_symmetric(const Matrix& x, double rel_tol) {
  if (x.rows() != x.cols()) return false;
  const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
  return (x - x.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

}  // namespace

Matrix symmetrize(const Matrix& x) { return 0.5 * (x + x.transpose()); }

bool is_sym_pd(const Matrix& x, double rel_tol) {
  if (x.rows() == 0 || !is_symmetric(x, rel_tol)) return false;
  if (!x.allFinite()) return false;
  Eigen::LLT<Matrix> llt(symmetrize(x));
  return llt.info() == Eigen::Success;
}

void require_sym_pd(const Matrix& x, const char* name) {
  if (!is_sym_pd(x)) {
    throw ValidationError(std::string(name) + " must be symmetric positive definite");
  }
}

double gamma(const Matrix& p, double theta) {
  require_square(p, "P");
  if (!(theta >= 0.0)) throw ValidationError("gamma: theta must be nonnegative");
  if (theta == 0.0) return 0.0;
  const Eigen::VectorXd eig = symmetric_eigenvalues(p);
  if (theta * eig.maxCoeff() >= 1.0) {
    throw DomainError("gamma: theta * sigma_max(P) >= 1 (distortion leaves the PD cone)");
  }
  return gamma_from_eigenvalues(eig, theta);
}

BudgetSolveResult solve_budget(const Matrix& p, double budget, const BudgetSolverOptions& options) {
  require_square(p, "P");
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw ValidationError("solve_budget: budget c must be positive and finite");
  }
  const Eigen::VectorXd eig = symmetric_eigenvalues(p);
  const double sigma_max = eig.maxCoeff();
  if (!(sigma_max > 0.0)) {
    throw InfeasibleError("solve_budget: P has no positive eigenvalue, gamma is identically zero");
  }

  double lo = 0.0;
  double hi = (1.0 - options.edge_margin) / sigma_max;
  const double g_hi = gamma_from_eigenvalues(eig, hi);
  if (g_hi < budget) {
    throw InfeasibleError("solve_budget: budget exceeds gamma at the edge of the domain");
  }

  BudgetSolveResult best{hi, g_hi, 0};
  for (int it = 1; it <= options.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = gamma_from_eigenvalues(eig, mid);
    if (std::abs(g - budget) < std::abs(best.achieved_budget - budget)) {
      best = {mid, g, it};
    }
    if (std::abs(g - budget) <= options.tolerance) {
      return {mid, g, it};
    }
    if (g < budget) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (!(hi - lo > std::numeric_limits<double>::epsilon() * hi)) break;
    best.iterations = it;
  }
  // Bracket collapsed at machine precision; accept if close in relative terms.
  if (std::abs(best.achieved_budget - budget) > 1e3 * options.tolerance * std::max(1.0, budget)) {
    throw ConvergenceError("solve_budget: bisection stalled away from the budget");
  }
  return best;
}

double gaussian_kl(const Vector& mean0, const Matrix& cov0, const Vector& mean1,
                   const Matrix& cov1) {
  const auto k = mean0.size();
  if (mean1.size() != k || cov0.rows() != k || cov0.cols() != k || cov1.rows() != k ||
      cov1.cols() != k) {
    throw ValidationError("gaussian_kl: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt0(symmetrize(cov0));
  Eigen::LLT<Matrix> llt1(symmetrize(cov1));
  if (llt0.info() != Eigen::Success || llt1.info() != Eigen::Success) {
    throw FactorizationError("gaussian_kl: covariance not positive definite");
  }
  const Vector diff = mean1 - mean0;
  const double trace_term = llt1.solve(cov0).trace();
  const double quad = diff.dot(llt1.solve(diff));
  const Matrix l0 = llt0.matrixL();
  const Matrix l1 = llt1.matrixL();
  const double logdet0 = 2.0 * l0.diagonal().array().log().sum();
  const double logdet1 = 2.0 * l1.diagonal().array().log().sum();
  const double kl = 0.5 * (trace_term + quad - static_cast<double>(k) + logdet1 - logdet0);
  return std::max(0.0, kl);
}

Matrix spd_sqrt(const Matrix& p) {
  require_square(p, "P");
  if (!is_symmetric(p, 1e-10)) throw ValidationError("spd_sqrt: input is not symmetric");
  Eigen::LLT<Matrix> llt(symmetrize(p));
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("spd_sqrt: matrix is not positive definite");
  }
  return llt.matrixL();
}

std::pair<double, double> spectral_extrema(const Matrix& s) {
  require_square(s, "S");
  if (!is_symmetric(s, 1e-10)) throw ValidationError("spectral_extrema: input is not symmetric");
  const Eigen::VectorXd eig = symmetric_eigenvalues(symmetrize(s));
  return {eig.minCoeff(), eig.maxCoeff()};
}

double spectral_radius(const Matrix& f) {
  require_square(f, "F");
  Eigen::EigenSolver<Matrix> solver(f, false);
  if (solver.info() != Eigen::Success) throw NumericalError("eigenvalue decomposition failed");
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix solve_discrete_lyapunov(const Matrix& f, const Matrix& v) {
  require_square(f, "F");
  if (v.rows() != f.rows() || v.cols() != f.cols()) {
    throw ValidationError("solve_discrete_lyapunov: F and V dimensions differ");
  }
  if (spectral_radius(f) >= 1.0) {
    throw NumericalError("solve_discrete_lyapunov: spectral radius of F >= 1, no unique solution");
  }
  const auto n = f.rows();
  if (static_cast<std::size_t>(n) <= kKroneckerMaxDim) {
    const Matrix kron = Eigen::kroneckerProduct(f, f);
    const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
    const Vector rhs = Eigen::Map<const Vector>(v.data(), n * n);
    const Vector x = lhs.fullPivLu().solve(rhs);
    return symmetrize(Eigen::Map<const Matrix>(x.data(), n, n));
  }
  // Smith doubling: X = Σ F^k V F^kᵀ, squaring the step every pass.
  Matrix x = v;
  Matrix fk = f;
  for (int it = 0; it < 64; ++it) {
    x += fk * x * fk.transpose();
    fk = fk * fk;
    if (fk.cwiseAbs().maxCoeff() < 1e-18) break;
  }
  return symmetrize(x);
}

Matrix distort_covariance(const Matrix& p, double theta) {
  require_square(p, "P");
  if (theta == 0.0) return p;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(p));
  if (solver.info() != Eigen::Success) throw NumericalError("eigen decomposition failed");
  const Eigen::VectorXd& eig = solver.eigenvalues();
  if (eig.minCoeff() <= 0.0) throw FactorizationError("distort_covariance: P is not positive definite");
  if (theta * eig.maxCoeff() >= 1.0) {
    throw DomainError("distort_covariance: theta * sigma_max(P) >= 1, P^{-1} - theta I not PD");
  }
  const Eigen::VectorXd scaled = eig.array() / (1.0 - theta * eig.array());
  const Matrix& u = solver.eigenvectors();
  return symmetrize(u * scaled.asDiagonal() * u.transpose());
}

Matrix spd_solve(const Matrix& s, const Matrix& b) {
  Eigen::LLT<Matrix> llt(symmetrize(s));
  if (llt.info() != Eigen::Success) throw FactorizationError("spd_solve: matrix is not positive definite");
  return llt.solve(b);
}

std::size_t observability_rank(const Matrix& a, const Matrix& c) {
  const auto n = a.rows();
  Matrix obs(c.rows() * n, n);
  Matrix block = c;
  for (Eigen::Index i = 0; i < n; ++i) {
    obs.middleRows(i * c.rows(), c.rows()) = block;
    block = block * a;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(obs);
  return static_cast<std::size_t>(qr.rank());
}

Matrix expm(const Matrix& a) {
  require_square(a, "A");
  return a.exp();
}

}  // namespace urkf
