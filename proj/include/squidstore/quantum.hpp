#pragma once

// Dense linear algebra on small tensor-product Hilbert spaces.
//
// Tensor ordering: the leftmost factor is the slowest-varying index. Every
// module builds composite spaces as qubit 1, qubit 2, then resonator.
//
// Qubit basis index 0 is the charge state |0> (no excess Cooper pair) and
// index 1 is |1>. Pauli matrices follow the charge-qubit convention
//   sx = |1><0| + |0><1|,  sy = -i(|1><0| - |0><1|),  sz = |0><0| - |1><1|.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "squidstore/constants.hpp"

namespace squidstore {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Dims = std::vector<int>;

inline constexpr cplx kI{0.0, 1.0};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a simulation cannot produce a trustworthy answer
// (non-Hermitian generator, truncation overflow, non-convergence, ...).
class PhysicsError : public Error {
 public:
  using Error::Error;
};

inline int product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), 1, std::multiplies<>());
}

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

class Operator {
 public:
  Operator() = default;
  Operator(Matrix mat, Dims dims) : mat_(std::move(mat)), dims_(std::move(dims)) {
    if (dims_.empty() || std::any_of(dims_.begin(), dims_.end(), [](int d) { return d < 1; }))
      throw std::invalid_argument("Operator: subsystem dimensions must be positive");
    const int n = product(dims_);
    if (mat_.rows() != n || mat_.cols() != n)
      throw std::invalid_argument("Operator: matrix is " + std::to_string(mat_.rows()) + "x" +
                                  std::to_string(mat_.cols()) + " but dims give " +
                                  std::to_string(n));
  }
  explicit Operator(Matrix mat) : Operator(mat, Dims{static_cast<int>(mat.rows())}) {}

  static Operator identity(const Dims& dims) {
    const int n = product(dims);
    return {Matrix::Identity(n, n), dims};
  }
  static Operator zero(const Dims& dims) {
    const int n = product(dims);
    return {Matrix::Zero(n, n), dims};
  }

  int dim() const { return static_cast<int>(mat_.rows()); }
  const Dims& dims() const { return dims_; }
  const Matrix& matrix() const { return mat_; }
  cplx operator()(int r, int c) const { return mat_(r, c); }

  Operator adjoint() const { return {mat_.adjoint(), dims_}; }

  // max|A - A^dag| <= rel_tol * max|A|
  bool is_hermitian(double rel_tol = 1e-12) const {
    const double scale = max_abs(mat_);
    return max_abs(mat_ - mat_.adjoint()) <= rel_tol * scale;
  }

  Operator& operator+=(const Operator& o) {
    require_same(o);
    mat_ += o.mat_;
    return *this;
  }
  Operator& operator-=(const Operator& o) {
    require_same(o);
    mat_ -= o.mat_;
    return *this;
  }
  Operator& operator*=(cplx s) {
    mat_ *= s;
    return *this;
  }

  friend Operator operator+(Operator a, const Operator& b) { return a += b; }
  friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
  friend Operator operator*(cplx s, Operator a) { return a *= s; }
  friend Operator operator*(Operator a, cplx s) { return a *= s; }
  friend Operator operator*(double s, Operator a) { return a *= cplx(s); }
  friend Operator operator*(const Operator& a, const Operator& b) {
    a.require_same(b);
    return {a.mat_ * b.mat_, a.dims_};
  }

 private:
  void require_same(const Operator& o) const {
    if (dims_ != o.dims_) throw std::invalid_argument("Operator: subsystem dimensions differ");
  }

  Matrix mat_;
  Dims dims_;
};

/// Kronecker product; subsystem labels are concatenated.
inline Operator tensor_product(const Operator& a, const Operator& b) {
  const int na = a.dim(), nb = b.dim();
  Matrix out(na * nb, na * nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) out.block(i * nb, j * nb, nb, nb) = a(i, j) * b.matrix();
  Dims dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  return {std::move(out), std::move(dims)};
}

/// Places a single-subsystem operator at `site` of the composite space `dims`.
inline Operator embed(const Operator& local, int site, const Dims& dims) {
  if (site < 0 || site >= static_cast<int>(dims.size()))
    throw std::invalid_argument("embed: site out of range");
  if (local.dim() != dims[site]) throw std::invalid_argument("embed: local dimension mismatch");
  Operator out = site == 0 ? local : Operator::identity({dims[0]});
  for (int s = 1; s < static_cast<int>(dims.size()); ++s)
    out = tensor_product(out, s == site ? local : Operator::identity({dims[s]}));
  return out;
}

namespace pauli {

inline Operator sx() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return Operator(m);
}
inline Operator sy() {
  Matrix m(2, 2);
  m << 0, kI, -kI, 0;
  return Operator(m);
}
inline Operator sz() {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  return Operator(m);
}
// |1><0|: adds a Cooper pair.
inline Operator charge_raise() {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 0) = 1;
  return Operator(m);
}
// |0><1|
inline Operator charge_lower() { return charge_raise().adjoint(); }

}  // namespace pauli

namespace fock {

// Truncated annihilation operator on levels 0..n_max.
inline Operator annihilation(int n_max) {
  if (n_max < 1) throw std::invalid_argument("fock: n_max must be >= 1");
  Matrix m = Matrix::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) m(n - 1, n) = std::sqrt(static_cast<double>(n));
  return Operator(m);
}
inline Operator creation(int n_max) { return annihilation(n_max).adjoint(); }
inline Operator number(int n_max) {
  Matrix m = Matrix::Zero(n_max + 1, n_max + 1);
  for (int n = 0; n <= n_max; ++n) m(n, n) = static_cast<double>(n);
  return Operator(m);
}

}  // namespace fock

class QuantumState {
 public:
  enum class Kind { pure, mixed };

  static constexpr double kNormTol = 1e-10;

  static QuantumState pure(Vector amplitudes, Dims dims) {
    if (amplitudes.size() != product(dims))
      throw std::invalid_argument("QuantumState: amplitude count does not match dims");
    const double norm2 = amplitudes.squaredNorm();
    if (std::abs(norm2 - 1.0) > kNormTol)
      throw std::invalid_argument("QuantumState: pure state not normalized (|psi|^2 = " +
                                  std::to_string(norm2) + ")");
    QuantumState s;
    s.kind_ = Kind::pure;
    s.dims_ = std::move(dims);
    s.psi_ = std::move(amplitudes);
    return s;
  }

  static QuantumState pure(Vector amplitudes) {
    const int n = static_cast<int>(amplitudes.size());
    return pure(std::move(amplitudes), Dims{n});
  }

  static QuantumState mixed(Matrix rho, Dims dims) {
    const int n = product(dims);
    if (rho.rows() != n || rho.cols() != n)
      throw std::invalid_argument("QuantumState: density matrix does not match dims");
    if (max_abs(rho - rho.adjoint()) > kNormTol)
      throw std::invalid_argument("QuantumState: density matrix not Hermitian");
    if (std::abs(rho.trace() - cplx(1.0)) > kNormTol)
      throw std::invalid_argument("QuantumState: density matrix trace != 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kNormTol)
      throw std::invalid_argument("QuantumState: density matrix not positive semidefinite");
    QuantumState s;
    s.kind_ = Kind::mixed;
    s.dims_ = std::move(dims);
    s.rho_ = std::move(rho);
    return s;
  }

  static QuantumState mixed(Matrix rho) {
    const int n = static_cast<int>(rho.rows());
    return mixed(std::move(rho), Dims{n});
  }

  /// Product basis state |levels[0], levels[1], ...>.
  static QuantumState basis(const Dims& dims, const std::vector<int>& levels) {
    if (levels.size() != dims.size()) throw std::invalid_argument("basis: level count mismatch");
    int index = 0;
    for (std::size_t s = 0; s < dims.size(); ++s) {
      if (levels[s] < 0 || levels[s] >= dims[s])
        throw std::invalid_argument("basis: level out of range");
      index = index * dims[s] + levels[s];
    }
    Vector v = Vector::Zero(product(dims));
    v(index) = 1.0;
    return pure(std::move(v), dims);
  }

  Kind kind() const { return kind_; }
  bool is_pure() const { return kind_ == Kind::pure; }
  int dim() const { return product(dims_); }
  const Dims& dims() const { return dims_; }

  const Vector& amplitudes() const {
    if (kind_ != Kind::pure) throw std::logic_error("QuantumState: mixed state has no amplitudes");
    return psi_;
  }

  Matrix density() const { return kind_ == Kind::pure ? Matrix(psi_ * psi_.adjoint()) : rho_; }

  double trace() const {
    return kind_ == Kind::pure ? psi_.squaredNorm() : rho_.trace().real();
  }
  double purity() const {
    if (kind_ == Kind::pure) return psi_.squaredNorm() * psi_.squaredNorm();
    return (rho_ * rho_).trace().real();
  }

  /// U psi or U rho U^dag. Does not re-check normalization.
  QuantumState transformed(const Matrix& u) const {
    QuantumState s = *this;
    if (kind_ == Kind::pure)
      s.psi_ = u * psi_;
    else
      s.rho_ = u * rho_ * u.adjoint();
    return s;
  }
  QuantumState transformed(const Operator& u) const {
    if (u.dims() != dims_) throw std::invalid_argument("transformed: dimension mismatch");
    return transformed(u.matrix());
  }

 private:
  QuantumState() = default;

  Kind kind_ = Kind::pure;
  Dims dims_;
  Vector psi_;
  Matrix rho_;
};

inline QuantumState tensor_product(const QuantumState& a, const QuantumState& b) {
  Dims dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  if (a.is_pure() && b.is_pure()) {
    const Vector& x = a.amplitudes();
    const Vector& y = b.amplitudes();
    Vector v(x.size() * y.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) v.segment(i * y.size(), y.size()) = x(i) * y;
    return QuantumState::pure(std::move(v), std::move(dims));
  }
  const Operator ra(a.density(), a.dims());
  const Operator rb(b.density(), b.dims());
  return QuantumState::mixed(tensor_product(ra, rb).matrix(), std::move(dims));
}

inline cplx expectation(const Operator& op, const QuantumState& s) {
  if (op.dim() != s.dim()) throw std::invalid_argument("expectation: dimension mismatch");
  if (s.is_pure()) return s.amplitudes().dot(op.matrix() * s.amplitudes());
  return (op.matrix() * s.density()).trace();
}

/// exp(-i H t / hbar) via Hermitian eigendecomposition. H in ueV, t in ps.
inline Operator propagator(const Operator& h, double t, double hbar = kHbar) {
  if (!std::isfinite(t)) throw std::invalid_argument("propagator: time must be finite");
  if (!h.is_hermitian()) throw PhysicsError("propagator: generator is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
  const Eigen::VectorXd& e = es.eigenvalues();
  Vector phases(e.size());
  for (Eigen::Index k = 0; k < e.size(); ++k) phases(k) = std::exp(-kI * (e(k) * t / hbar));
  const Matrix& v = es.eigenvectors();
  return {v * phases.asDiagonal() * v.adjoint(), h.dims()};
}

inline QuantumState evolve(const Operator& h, double t, const QuantumState& state,
                           double hbar = kHbar) {
  if (h.dim() != state.dim()) throw std::invalid_argument("evolve: dimension mismatch");
  return state.transformed(propagator(h, t, hbar).matrix());
}

/// Reduced state on the subsystems listed in `keep` (any order; result keeps
/// the original subsystem order).
inline QuantumState partial_trace(const QuantumState& state, std::vector<int> keep) {
  const Dims& dims = state.dims();
  const int ns = static_cast<int>(dims.size());
  std::sort(keep.begin(), keep.end());
  if (keep.empty() || std::adjacent_find(keep.begin(), keep.end()) != keep.end() ||
      keep.front() < 0 || keep.back() >= ns)
    throw std::invalid_argument("partial_trace: invalid subsystem index set");

  std::vector<bool> kept(ns, false);
  for (int k : keep) kept[k] = true;
  std::vector<int> stride(ns, 1);
  for (int s = ns - 2; s >= 0; --s) stride[s] = stride[s + 1] * dims[s + 1];

  Dims kdims, tdims;
  std::vector<int> kstride, tstride;
  for (int s = 0; s < ns; ++s) {
    (kept[s] ? kdims : tdims).push_back(dims[s]);
    (kept[s] ? kstride : tstride).push_back(stride[s]);
  }
  // Full-space offset for every multi-index of a subsystem group.
  auto offsets = [](const Dims& d, const std::vector<int>& st) {
    std::vector<int> out{0};
    for (std::size_t g = 0; g < d.size(); ++g) {
      std::vector<int> next;
      next.reserve(out.size() * d[g]);
      for (int base : out)
        for (int l = 0; l < d[g]; ++l) next.push_back(base + l * st[g]);
      out = std::move(next);
    }
    return out;
  };
  const std::vector<int> koff = offsets(kdims, kstride);
  const std::vector<int> toff = offsets(tdims, tstride);

  const Matrix rho = state.density();
  const int nk = static_cast<int>(koff.size());
  Matrix out = Matrix::Zero(nk, nk);
  for (int r = 0; r < nk; ++r)
    for (int c = 0; c < nk; ++c) {
      cplx acc = 0.0;
      for (int t : toff) acc += rho(koff[r] + t, koff[c] + t);
      out(r, c) = acc;
    }
  out = 0.5 * (out + out.adjoint()).eval();
  return QuantumState::mixed(std::move(out), std::move(kdims));
}

namespace detail {

inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double state_fidelity(const QuantumState& a, const QuantumState& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("state_fidelity: dimension mismatch");
  if (a.is_pure() && b.is_pure()) return std::norm(a.amplitudes().dot(b.amplitudes()));
  if (a.is_pure()) return std::max(0.0, a.amplitudes().dot(b.density() * a.amplitudes()).real());
  if (b.is_pure()) return std::max(0.0, b.amplitudes().dot(a.density() * b.amplitudes()).real());
  // Rank-one density matrices: the matrix square root would amplify
  // round-off eigenvalues to ~1e-8, so use the dominant eigenvector.
  for (const QuantumState* s : {&a, &b})
    if (std::abs(s->purity() - 1.0) <= 1e-12) {
      Eigen::SelfAdjointEigenSolver<Matrix> es(s->density());
      const Vector psi = es.eigenvectors().col(s->dim() - 1);
      const Matrix other = (s == &a ? b : a).density();
      return std::max(0.0, psi.dot(other * psi).real());
    }

  const Matrix sa = detail::psd_sqrt(a.density());
  const Matrix m = sa * b.density() * sa;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  const double tr = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return tr * tr;
}

/// Max-entry norm of AB - BA.
inline double commutator_norm(const Operator& a, const Operator& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("commutator_norm: dimension mismatch");
  return max_abs(a.matrix() * b.matrix() - b.matrix() * a.matrix());
}

}  // namespace squidstore
