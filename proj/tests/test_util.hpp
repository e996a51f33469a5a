#pragma once

#include <random>
#include <string>

#include "squidstore/quantum.hpp"

namespace squidstore::testing {

inline std::string data_path(const std::string& name) { return std::string(SQUIDSTORE_DATA_DIR) + "/" + name; }

inline Vector random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  return v.normalized();
}

inline QuantumState random_pure(std::mt19937_64& rng, int n = 2) { return QuantumState::pure(random_vector(rng, n)); }

/// Mixed state from a random Ginibre matrix, full rank with probability one.
inline QuantumState random_mixed(std::mt19937_64& rng, int n = 2) {
  std::normal_distribution<double> g;
  Matrix a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = cplx(g(rng), g(rng));
  Matrix rho = a * a.adjoint();
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint());
  return QuantumState::mixed(rho);
}

inline Operator random_hermitian(std::mt19937_64& rng, const Dims& dims, double scale = 1.0) {
  std::normal_distribution<double> g;
  const int n = product(dims);
  Matrix a(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) a(r, c) = cplx(g(rng), g(rng));
  return {scale * 0.5 * (a + a.adjoint()), dims};
}

/// exp(-i H t / hbar) by scaling and squaring of a truncated Taylor series.
inline Matrix taylor_propagator(const Matrix& h, double t, double hbar = kHbar) {
  const Matrix a = (-kI * t / hbar) * h;
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm / std::pow(2.0, squarings) > 0.25) ++squarings;
  const Matrix b = a / std::pow(2.0, squarings);
  Matrix term = Matrix::Identity(h.rows(), h.cols()), sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * b / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

/// Operator norm (largest singular value).
inline double op_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace squidstore::testing
