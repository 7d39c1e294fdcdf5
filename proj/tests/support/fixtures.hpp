#pragma once

#include "urkf/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace urkf::testing {

// Worst-case example: A = [[0.1, 1], [0, 0.6]].
inline LinearGaussianModel worst_case_model() {
  LinearGaussianModel m;
  m.A = Matrix(2, 2);
  m.A << 0.1, 1.0, 0.0, 0.6;
  m.C = Matrix(1, 2);
  m.C << 1.0, -1.0;
  m.Q = Matrix(2, 2);
  m.Q << 0.9050, 0.8150, 0.8150, 0.7450;
  m.R = Matrix::Identity(1, 1);
  return m;
}

// Risk-sensitive example: A = [[0.1, 1], [0, 0.95]].
inline LinearGaussianModel risk_sensitive_model() {
  LinearGaussianModel m;
  m.A = Matrix(2, 2);
  m.A << 0.1, 1.0, 0.0, 0.95;
  m.C = Matrix(1, 2);
  m.C << 1.0, -1.0;
  m.Q = Matrix(2, 2);
  m.Q << 0.9050, 0.8575, 0.8575, 1.7225;
  m.R = Matrix::Identity(1, 1);
  return m;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = normal(rng);
  return out;
}

inline Matrix random_spd(std::mt19937_64& rng, Eigen::Index n, double floor = 0.1) {
  const Matrix g = random_matrix(rng, n, n);
  const Matrix s = g * g.transpose() / static_cast<double>(n) + floor * Matrix::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

// Random model with spectral radius of A below `radius` and PD noises.
inline LinearGaussianModel random_model(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m,
                                        double radius = 0.95) {
  LinearGaussianModel model;
  Matrix a = random_matrix(rng, n, n);
  Eigen::EigenSolver<Matrix> es(a, false);
  const double r = es.eigenvalues().cwiseAbs().maxCoeff();
  std::uniform_real_distribution<double> u(0.2, radius);
  model.A = a * (u(rng) / std::max(r, 1e-9));
  model.C = random_matrix(rng, m, n);
  model.Q = random_spd(rng, n);
  model.R = random_spd(rng, m);
  return model;
}

inline double min_eig(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_abs(const Matrix& x) { return x.cwiseAbs().maxCoeff(); }

}  // namespace urkf::testing
