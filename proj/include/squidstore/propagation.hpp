#pragma once

// Time-ordered evolution of piecewise-smooth Hamiltonians: piecewise-constant
// steps sampled at step midpoints, with whole-trajectory step halving until
// two successive refinements agree.

#include <cmath>
#include <string>
#include <vector>

#include "squidstore/quantum.hpp"

namespace squidstore {

struct PiecewiseOptions {
  double dt_init = 0.05;  // ps
  double tol = 1e-8;
  int max_halvings = 12;
};

struct PiecewiseResult {
  // Cumulative propagators U(breakpoints[k], breakpoints[0]).
  std::vector<Matrix> at_breakpoints;
  long steps = 0;
  int halvings = 0;
  double achieved_tol = 0.0;
};

namespace detail {

inline Matrix step_propagator(const Matrix& h, double dt) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Eigen::VectorXd& e = es.eigenvalues();
  Vector phases(e.size());
  for (Eigen::Index k = 0; k < e.size(); ++k) phases(k) = std::exp(-kI * (e(k) * dt / kHbar));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

template <class HamiltonianAt, class ConstantOn>
PiecewiseResult propagate_level(HamiltonianAt& h_at, ConstantOn& constant_on,
                                const std::vector<double>& bp, int dim, double dt_init,
                                int level) {
  PiecewiseResult r;
  Matrix u = Matrix::Identity(dim, dim);
  r.at_breakpoints.push_back(u);
  for (std::size_t k = 0; k + 1 < bp.size(); ++k) {
    const double a = bp[k], b = bp[k + 1];
    if (b > a) {
      long n = 1;
      if (!constant_on(a, b)) {
        n = std::max(1L, static_cast<long>(std::ceil((b - a) / dt_init - 1e-9)));
        n <<= level;
      }
      const double dt = (b - a) / static_cast<double>(n);
      for (long s = 0; s < n; ++s) {
        const Operator h = h_at(a + (static_cast<double>(s) + 0.5) * dt);
        if (!h.is_hermitian()) throw PhysicsError("propagate: Hamiltonian is not Hermitian");
        u = step_propagator(h.matrix(), dt) * u;
      }
      r.steps += n;
    }
    r.at_breakpoints.push_back(u);
  }
  return r;
}

}  // namespace detail

/// `h_at(t)` returns the Hamiltonian (ueV) at time t. `constant_on(a, b)`
/// reports whether the Hamiltonian is constant on [a, b], in which case the
/// interval is a single exact step. `breakpoints` must be sorted and contain
/// every point where the Hamiltonian is not smooth. `distance(prev, next)`
/// scores two successive refinements of the final propagator.
template <class HamiltonianAt, class ConstantOn, class Distance>
PiecewiseResult propagate_adaptive(HamiltonianAt h_at, ConstantOn constant_on,
                                   const std::vector<double>& breakpoints, int dim,
                                   const PiecewiseOptions& opts, Distance distance) {
  if (breakpoints.empty()) throw std::invalid_argument("propagate: no breakpoints");
  if (!(opts.dt_init > 0.0)) throw std::invalid_argument("propagate: dt_init must be positive");
  PiecewiseResult prev =
      detail::propagate_level(h_at, constant_on, breakpoints, dim, opts.dt_init, 0);
  for (int level = 1; level <= opts.max_halvings; ++level) {
    PiecewiseResult next =
        detail::propagate_level(h_at, constant_on, breakpoints, dim, opts.dt_init, level);
    const double diff = distance(prev.at_breakpoints.back(), next.at_breakpoints.back());
    next.halvings = level;
    next.achieved_tol = diff;
    if (diff <= opts.tol) return next;
    prev = std::move(next);
  }
  throw PhysicsError("propagate: no convergence to tol " + std::to_string(opts.tol) + " after " +
                     std::to_string(opts.max_halvings) + " halvings");
}

}  // namespace squidstore
