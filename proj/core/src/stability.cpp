#include "urkf/stability.hpp"

#include "urkf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>
#include <tuple>
#include <vector>

namespace urkf {

namespace {

double min_sym_eigenvalue(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(s), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigenvalue decomposition failed");
  return solver.eigenvalues().minCoeff();
}

// β for one search point, or nullopt when (ρ, α, G) is not admissible.
std::optional<double> beta_at(const LinearGaussianModel& model, const Matrix& c_r_c, const Matrix& gain,
                              double alpha, double rho) {
  const Matrix f = rho * (model.A - alpha * gain * model.C);
  if (!(rho > 1.0) || spectral_radius(f) >= 1.0) return std::nullopt;
  const Matrix v = gain * model.R * gain.transpose() + model.Q;
  const Matrix sigma = solve_discrete_lyapunov(f, v);
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const auto n = model.n();
  const Matrix sigma_inv = llt.solve(Matrix::Identity(n, n));
  const Matrix m = (rho * rho - 1.0) / (rho * rho) * sigma_inv + (1.0 - alpha * alpha) * c_r_c;
  return min_sym_eigenvalue(m);
}

struct Point {
  double rho = 0.0;
  double alpha = 0.0;
  Vector g;  // G in column-major order
  double beta = -std::numeric_limits<double>::infinity();
  bool valid = false;
};

bool lex_less(const Point& a, const Point& b) {
  if (a.rho != b.rho) return a.rho < b.rho;
  if (a.alpha != b.alpha) return a.alpha < b.alpha;
  for (Eigen::Index i = 0; i < a.g.size(); ++i) {
    if (a.g(i) != b.g(i)) return a.g(i) < b.g(i);
  }
  return false;
}

bool better(const Point& a, const Point& b) {
  if (!a.valid) return false;
  if (!b.valid) return true;
  if (a.beta != b.beta) return a.beta > b.beta;
  return lex_less(a, b);
}

constexpr int kMaxSweeps = 50;

class BetaSearch {
 public:
  BetaSearch(const LinearGaussianModel& model, const ThetaMaxSearch& search)
      : model_(model), search_(search) {
    c_r_c_ = model.C.transpose() * spd_solve(model.R, model.C);
  }

  Matrix gain_matrix(const Vector& g) const {
    return Eigen::Map<const Matrix>(g.data(), model_.n(), model_.m());
  }

  void evaluate(Point& p, std::size_t& evaluations, std::size_t& admissible) const {
    ++evaluations;
    const auto beta = beta_at(model_, c_r_c_, gain_matrix(p.g), p.alpha, p.rho);
    p.valid = beta.has_value();
    p.beta = beta.value_or(-std::numeric_limits<double>::infinity());
    if (p.valid) ++admissible;
  }

  // log(1/r) for the current (α, G), capped for nilpotent closed loops.
  double log_rho_span(double alpha, const Vector& g) const {
    const double r = spectral_radius(model_.A - alpha * gain_matrix(g) * model_.C);
    if (r >= 1.0) return 0.0;
    return -std::log(std::max(r, 1e-6));
  }

  Point grid(const std::vector<double>& alphas, std::size_t& evaluations, std::size_t& admissible) const {
    const auto entries = static_cast<std::size_t>(model_.n() * model_.m());
    const auto points = static_cast<std::size_t>(search_.gain_points);
    std::size_t gain_cells = 1;
    for (std::size_t i = 0; i < entries; ++i) gain_cells *= points;
    const std::size_t cells = alphas.size() * gain_cells;

    unsigned threads = search_.threads == 0 ? std::thread::hardware_concurrency() : search_.threads;
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells)));

    std::vector<Point> best(threads);
    std::vector<std::size_t> evals(threads, 0);
    std::vector<std::size_t> admits(threads, 0);
    auto worker = [&](unsigned w) {
      const std::size_t begin = cells * w / threads;
      const std::size_t end = cells * (w + 1) / threads;
      for (std::size_t cell = begin; cell < end; ++cell) {
        Point p;
        p.alpha = alphas[cell / gain_cells];
        p.g = Vector(static_cast<Eigen::Index>(entries));
        std::size_t idx = cell % gain_cells;
        for (std::size_t e = 0; e < entries; ++e) {
          p.g(static_cast<Eigen::Index>(e)) = gain_value(idx % points);
          idx /= points;
        }
        const double span = log_rho_span(p.alpha, p.g);
        if (span <= 0.0) continue;
        for (int i = 1; i <= search_.rho_points; ++i) {
          p.rho = std::exp(span * i / (search_.rho_points + 1));
          evaluate(p, evals[w], admits[w]);
          if (better(p, best[w])) best[w] = p;
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < threads; ++w) pool.emplace_back(worker, w);
    worker(0);
    for (auto& t : pool) t.join();

    Point out;
    for (unsigned w = 0; w < threads; ++w) {
      evaluations += evals[w];
      admissible += admits[w];
      if (better(best[w], out)) out = best[w];
    }
    return out;
  }

  // One pass over every coordinate; true when some neighbour improved on `best`.
  bool sweep(Point& best, bool alpha_free, double scale, std::size_t& evaluations, std::size_t& admissible) const {
    const double alpha_step = scale / search_.alpha_points;
    const double gain_step = scale * 2.0 * search_.gain_bound / std::max(1, search_.gain_points - 1);
    bool moved = false;
    // Coordinate 0 is log ρ, 1 is α, then the entries of G.
    const Eigen::Index coords = 2 + best.g.size();
    for (Eigen::Index c = 0; c < coords; ++c) {
      if (c == 1 && !alpha_free) continue;
      const Point center = best;
      const double log_step = log_rho_span(center.alpha, center.g) / (search_.rho_points + 1) * scale;
      for (int k = -10; k <= 10; ++k) {
        if (k == 0) continue;
        Point p = center;
        if (c == 0) {
          p.rho = std::exp(std::log(center.rho) + k * log_step);
        } else if (c == 1) {
          p.alpha = center.alpha + k * alpha_step;
          if (!(p.alpha > 0.0) || p.alpha > 1.0) continue;
        } else {
          double& g = p.g(c - 2);
          g += k * gain_step;
          if (std::abs(g) > search_.gain_bound) continue;
        }
        evaluate(p, evaluations, admissible);
        if (better(p, best)) {
          best = p;
          moved = true;
        }
      }
    }
    return moved;
  }

  Point refine(Point best, bool alpha_free, std::size_t& evaluations, std::size_t& admissible) const {
    double scale = 1.0;
    for (int round = 0; round < search_.refinement_rounds; ++round) {
      scale /= search_.refinement_factor;
      for (int pass = 0; pass < kMaxSweeps; ++pass) {
        if (!sweep(best, alpha_free, scale, evaluations, admissible)) break;
      }
    }
    return best;
  }

  ThetaMaxCandidate finish(const Point& p, double phi) const {
    if (!p.valid) throw InfeasibleError("theta_max: no admissible (rho, alpha, G) in the search set");
    ThetaMaxCandidate out;
    out.rho = p.rho;
    out.alpha = p.alpha;
    out.gain = gain_matrix(p.g);
    const SigmaBeta sb = sigma_beta(model_, out.gain, out.alpha, out.rho);
    out.sigma = sb.sigma;
    out.beta = sb.beta;
    out.theta_max = std::min(out.beta, phi);
    return out;
  }

 private:
  double gain_value(std::size_t j) const {
    if (search_.gain_points == 1) return 0.0;
    return -search_.gain_bound + 2.0 * search_.gain_bound * static_cast<double>(j) / (search_.gain_points - 1);
  }

  const LinearGaussianModel& model_;
  const ThetaMaxSearch& search_;
  Matrix c_r_c_;
};

}  // namespace

GramianParts build_gramian_parts(const LinearGaussianModel& model, std::size_t k) {
  const auto n = model.n();
  const auto m = model.m();
  if (k < static_cast<std::size_t>(n)) throw ValidationError("window length k must be >= n");
  const auto kk = static_cast<Eigen::Index>(k);
  const Matrix q_half = spd_sqrt(model.Q);

  std::vector<Matrix> powers(k + 1);  // A^0..A^k
  powers[0] = Matrix::Identity(n, n);
  for (std::size_t j = 1; j <= k; ++j) powers[j] = powers[j - 1] * model.A;

  GramianParts parts;
  parts.k = k;
  parts.obs = Matrix(kk * m, n);
  parts.obs_r = Matrix(kk * n, n);
  parts.noise = Matrix::Zero(kk * m, kk * m);
  parts.h = Matrix::Zero(kk * m, kk * n);
  parts.l = Matrix::Zero(kk * n, kk * n);
  for (Eigen::Index i = 0; i < kk; ++i) {
    parts.obs.middleRows(i * m, m) = model.C * powers[static_cast<std::size_t>(kk - 1 - i)];
    parts.obs_r.middleRows(i * n, n) = powers[static_cast<std::size_t>(kk - 1 - i)];
    parts.noise.block(i * m, i * m, m, m) = model.R;
    for (Eigen::Index j = i + 1; j < kk; ++j) {
      const Matrix lj = powers[static_cast<std::size_t>(j - i - 1)] * q_half;
      parts.l.block(i * n, j * n, n, n) = lj;
      parts.h.block(i * m, j * n, m, n) = model.C * lj;
    }
  }
  return parts;
}

RkEvaluator::RkEvaluator(const GramianParts& parts) {
  const Eigen::Index kn = parts.l.rows();
  const Matrix outer = symmetrize(parts.noise + parts.h * parts.h.transpose());
  const Matrix outer_inv_obs = spd_solve(outer, parts.obs);
  base_ = symmetrize(parts.obs.transpose() * outer_inv_obs);

  const Matrix inner =
      symmetrize(Matrix::Identity(kn, kn) + parts.h.transpose() * spd_solve(parts.noise, parts.h));
  const Matrix m = symmetrize(parts.l * spd_solve(inner, parts.l.transpose()));
  const Matrix j = parts.obs_r - parts.l * parts.h.transpose() * outer_inv_obs;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw NumericalError("R_k: eigendecomposition of M failed");
  mu_ = solver.eigenvalues();
  projected_ = solver.eigenvectors().transpose() * j;
  const double mu_max = mu_.maxCoeff();
  breakpoint_ = mu_max > 0.0 ? 1.0 / mu_max : std::numeric_limits<double>::infinity();
}

Matrix RkEvaluator::operator()(double phi) const {
  if (!(phi > 0.0)) throw ValidationError("R_k: phi must be positive");
  const double inv_phi = 1.0 / phi;
  Vector s_inv(mu_.size());
  for (Eigen::Index i = 0; i < mu_.size(); ++i) {
    const double d = mu_(i) - inv_phi;
    if (std::abs(d) <= 1e-14 * inv_phi) throw NumericalError("R_k: S_k is singular at this phi (breakpoint)");
    s_inv(i) = 1.0 / d;
  }
  return symmetrize(base_ + projected_.transpose() * s_inv.asDiagonal() * projected_);
}

double RkEvaluator::min_eigenvalue(double phi) const { return min_sym_eigenvalue((*this)(phi)); }

Matrix rk_matrix(const GramianParts& parts, double phi) { return RkEvaluator(parts)(phi); }

PhiResult phi_max(const LinearGaussianModel& model, std::size_t k, const PhiSearchOptions& options) {
  const RkEvaluator rk(build_gramian_parts(model, k));
  PhiResult out;

  double hi = rk.breakpoint();
  if (std::isfinite(hi)) {
    hi *= 1.0 - 1e-12;
  } else {
    // M = 0: R_k = base − φ 𝒥ᵀ𝒥 decreases in φ; grow the bracket until it crosses.
    hi = 1.0;
    while (rk.min_eigenvalue(hi) > 0.0) {
      hi *= 2.0;
      if (hi > 1e300) break;
    }
  }
  out.upper = hi;
  double lo = hi * 1e-12;
  if (!(rk.min_eigenvalue(lo) > 0.0)) {
    throw ValidationError("phi_max: R_k is not positive definite for small phi; (A, C) is not observable over k steps");
  }
  if (rk.min_eigenvalue(hi) > 0.0) {
    out.phi = hi;
    out.min_eig_at_phi = rk.min_eigenvalue(hi);
    return out;
  }
  for (int it = 1; it <= options.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (rk.min_eigenvalue(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    out.iterations = it;
    if (hi - lo <= options.rel_tol * lo) break;
  }
  out.phi = lo;
  out.min_eig_at_phi = rk.min_eigenvalue(lo);
  return out;
}

Matrix pbar_filtered(const LinearGaussianModel& model, std::size_t q) {
  const auto n = model.n();
  const Matrix eye = Matrix::Identity(n, n);
  auto update = [&](const Matrix& p) {
    const Matrix pct = p * model.C.transpose();
    const Matrix gain = spd_solve(model.C * pct + model.R, pct.transpose()).transpose();
    return Matrix(symmetrize((eye - gain * model.C) * p));
  };
  Matrix p = model.Q;
  for (std::size_t t = 0; t < q; ++t) p = symmetrize(model.A * update(p) * model.A.transpose() + model.Q);
  return update(p);
}

CmaxReport c_max(const LinearGaussianModel& model, std::size_t k, std::size_t q,
                 const PhiSearchOptions& options) {
  const ValidationReport report = validate(model);
  if (!report.observable) throw ValidationError("c_max: (A, C) is not observable");
  CmaxReport out;
  out.k = k;
  out.q = q;
  out.phi = phi_max(model, k, options);
  out.pbar_qq = pbar_filtered(model, q);
  out.c_max = gamma(out.pbar_qq, out.phi.phi);
  return out;
}

SigmaBeta sigma_beta(const LinearGaussianModel& model, const Matrix& gain, double alpha, double rho) {
  if (gain.rows() != model.n() || gain.cols() != model.m()) throw ValidationError("G must be n x m");
  if (!(alpha > 0.0) || alpha > 1.0) throw ValidationError("alpha must lie in (0, 1]");
  if (!(rho > 1.0)) throw ValidationError("rho must exceed 1");
  const Matrix f = model.A - alpha * gain * model.C;
  if (rho * spectral_radius(f) >= 1.0) {
    throw ValidationError("rho times the spectral radius of A - alpha G C must be below 1");
  }
  SigmaBeta out;
  out.sigma = solve_discrete_lyapunov(rho * f, gain * model.R * gain.transpose() + model.Q);
  const auto n = model.n();
  const Matrix sigma_inv = spd_solve(out.sigma, Matrix::Identity(n, n));
  const Matrix c_r_c = model.C.transpose() * spd_solve(model.R, model.C);
  out.beta = min_sym_eigenvalue((rho * rho - 1.0) / (rho * rho) * sigma_inv + (1.0 - alpha * alpha) * c_r_c);
  return out;
}

ThetaMaxReport theta_max(const LinearGaussianModel& model, std::size_t k, const ThetaMaxSearch& search) {
  const ValidationReport report = validate(model);
  if (!report.observable) throw ValidationError("theta_max: (A, C) is not observable");
  if (search.alpha_points < 1 || search.gain_points < 1 || search.rho_points < 1 ||
      search.refinement_rounds < 0 || !(search.refinement_factor > 1.0) || !(search.gain_bound >= 0.0)) {
    throw ValidationError("theta_max: invalid search configuration");
  }
  ThetaMaxReport out;
  out.k = k;
  out.phi = phi_max(model, k);

  const BetaSearch beta_search(model, search);
  std::vector<double> alphas;
  for (int i = 1; i <= search.alpha_points; ++i) alphas.push_back(static_cast<double>(i) / search.alpha_points);

  Point free = beta_search.grid(alphas, out.grid_evaluations, out.admissible_evaluations);
  free = beta_search.refine(free, true, out.grid_evaluations, out.admissible_evaluations);
  Point fixed = beta_search.grid({1.0}, out.grid_evaluations, out.admissible_evaluations);
  fixed = beta_search.refine(fixed, false, out.grid_evaluations, out.admissible_evaluations);

  out.update = beta_search.finish(free, out.phi.phi);
  out.prediction = beta_search.finish(fixed, out.phi.phi);
  return out;
}

RsfBoundCertificate rsf_bound_guard(const LinearGaussianModel& model, double theta, const Matrix& p0,
                                    const Matrix& gain, double alpha, double rho) {
  RsfBoundCertificate out;
  try {
    out.sigma_beta = sigma_beta(model, gain, alpha, rho);
  } catch (const Error& e) {
    out.reason = std::string("inadmissible (G, alpha, rho): ") + e.what();
    return out;
  }
  if (!is_sym_pd(p0)) {
    out.reason = "P0 is not symmetric positive definite";
    return out;
  }
  if (theta < 0.0) {
    out.reason = "theta must be >= 0";
    return out;
  }
  if (theta == 0.0) {
    out.holds = true;
    out.reason = "theta = 0 reduces to the Kalman filter";
    return out;
  }
  const Matrix& sigma = out.sigma_beta.sigma;
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (min_sym_eigenvalue(sigma - p0) < -1e-10 * scale) {
    out.reason = "ordering violated: P0 is not below Sigma";
    return out;
  }
  if (theta > out.sigma_beta.beta * (1.0 + 1e-12)) {
    out.reason = "theta exceeds beta";
    return out;
  }
  out.holds = true;
  out.reason = "0 < P0 <= Sigma and theta <= beta";
  return out;
}

}  // namespace urkf
