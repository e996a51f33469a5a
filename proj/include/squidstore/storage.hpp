#pragma once

// Two-qubit storage unit: reduced Hamiltonian, XY reduction at the
// degeneracy point, swap dynamics under constant or ramped coupler flux, and
// scoring of the stored state.
//
// Sign convention. With H_xy = -E_J3 cos(pi f3) (sx sx - sy sy) the
// numerically exact propagator in the charge basis is
//     U(t) = C * swap_unitary(xi) * C^dag,   C = sz (x) W,
// where W is the tilde relabeling of qubit 2 and swap_unitary is the printed
// matrix with +i sin(xi) off the diagonal. The sz factor flips that sign to the
// -i sin(xi) of exp(-iHt/hbar). After a quarter swap (xi = pi/2), qubit 1 in
// |m> and qubit 2 in |0~> = -|1> end as |0> (x) (-i)^m |m~>, so the stored
// qubit-2 state is R rho_1 R^dag with R = W diag(1, -i).

#include <cmath>
#include <vector>

#include "squidstore/circuit.hpp"
#include "squidstore/propagation.hpp"
#include "squidstore/quantum.hpp"
#include "squidstore/waveform.hpp"

namespace squidstore {

inline Operator build_two_qubit_hamiltonian(const CircuitEnergies& en, const DeviceParams& p,
                                            const BiasPoint& bias, bool include_e3) {
  using namespace pauli;
  const Operator id = Operator::identity({2});
  const auto [omega1, omega2] = bias.omegas(en);
  Operator h = omega1 * tensor_product(sz(), id) + omega2 * tensor_product(id, sz());
  if (include_e3) h += en.e_3 * tensor_product(sz(), sz());
  h -= effective_josephson(p.e_j1, bias.f1) * tensor_product(sx(), id);
  h -= effective_josephson(p.e_j2, bias.f2) * tensor_product(id, sx());
  h -= effective_josephson(p.e_j3, bias.f3) *
       (tensor_product(sx(), sx()) - tensor_product(sy(), sy()));
  return h;
}

/// Coupler term alone: -E_J3 cos(pi f3) (sx sx - sy sy).
inline Operator xy_hamiltonian(double e_j3, double f3 = 0.0) {
  using namespace pauli;
  return -effective_josephson(e_j3, f3) *
         (tensor_product(sx(), sx()) - tensor_product(sy(), sy()));
}

/// Columns are |0~> = -|1> and |1~> = |0> in charge coordinates.
inline Operator tilde_basis_map() {
  Matrix w(2, 2);
  w << 0, 1, -1, 0;
  return Operator(w);
}

inline Operator swap_unitary(double xi) {
  Matrix u = Matrix::Identity(4, 4);
  u(1, 1) = u(2, 2) = std::cos(xi);
  u(1, 2) = u(2, 1) = kI * std::sin(xi);
  return {u, Dims{2, 2}};
}

/// C with exp(-i H_xy t / hbar) = C swap_unitary(xi) C^dag.
inline Operator swap_convention_map() { return tensor_product(pauli::sz(), tilde_basis_map()); }

/// R: stored qubit-2 state is R rho_1 R^dag.
inline Operator storage_correction() {
  Matrix phase = Matrix::Zero(2, 2);
  phase(0, 0) = 1.0;
  phase(1, 1) = -kI;
  return Operator(tilde_basis_map().matrix() * phase);
}

/// R': with qubit 1 starting in |0>, its final state is R' rho_2 R'^dag.
inline Operator storage_correction_qubit1() {
  Matrix phase = Matrix::Zero(2, 2);
  phase(0, 0) = 1.0;
  phase(1, 1) = -kI;
  return Operator(phase * tilde_basis_map().matrix().adjoint());
}

/// sz1 + (tilde sz2) written in the charge basis; conserved by the coupler.
inline Operator total_effective_spin() {
  using namespace pauli;
  const Operator w = tilde_basis_map();
  const Operator sz2_tilde(w.matrix() * sz().matrix() * w.matrix().adjoint());
  return tensor_product(sz(), Operator::identity({2})) +
         tensor_product(Operator::identity({2}), sz2_tilde);
}

/// Quarter-swap time pi hbar / (4 E_J3) in ps.
inline double swap_time(double e_j3) { return kPi * kHbar / (4.0 * e_j3); }

/// (2 E_J3 / hbar) * integral_0^t cos(pi f3(t')) dt'.
inline double accumulated_phase(const Waveform& f3, double t, double e_j3) {
  if (t == 0.0) return 0.0;
  f3.check_ordering();
  if (const auto gap = f3.first_gap(0.0, t))
    throw WaveformError("flux waveform has a gap on [" + std::to_string(gap->first) + ", " +
                        std::to_string(gap->second) + "] ps");
  const double integral =
      integrate_over(f3, [](double f) { return std::cos(kPi * f); }, 0.0, t);
  return 2.0 * e_j3 / kHbar * integral;
}

struct StorageControls {
  double f1 = 0.5, f2 = 0.5;
  Waveform f3;  // flux quanta vs ps
  double n_g1 = 0.5, n_g2 = 0.5;
  bool include_e3 = false;
  double duration = 0.0;  // ps
};

struct StorageReport {
  QuantumState final_state;
  QuantumState qubit1;
  QuantumState qubit2;
  Operator propagator;
  double xi_bar = 0;
  double zz_phase = 0;            // E_3 t / hbar, rad
  double fidelity_raw = 0;        // F(rho_1, qubit 2)
  double fidelity_corrected = 0;  // F(R rho_1 R^dag, qubit 2)
  double fidelity_qubit1 = 0;     // F(R' rho_2 R'^dag, qubit 1)
};

/// Time-ordered propagator of the reduced two-qubit Hamiltonian under `ctl`.
inline PiecewiseResult storage_propagator(const DeviceParams& p, const StorageControls& ctl,
                                          const PiecewiseOptions& opts = {1e-2, 1e-10, 14}) {
  if (!(ctl.duration >= 0.0) || !std::isfinite(ctl.duration))
    throw std::invalid_argument("storage: duration must be finite and >= 0");
  if (!std::isfinite(ctl.f1) || !std::isfinite(ctl.f2))
    throw std::invalid_argument("storage: fluxes must be finite");
  const CircuitEnergies en = derive_energies(p);
  if (ctl.duration > 0.0) {
    ctl.f3.check_ordering();
    if (const auto gap = ctl.f3.first_gap(0.0, ctl.duration))
      throw WaveformError("flux waveform has a gap at t = " + std::to_string(gap->first) + " ps");
  }
  std::vector<double> bp{0.0};
  for (double t : ctl.f3.breakpoints(0.0, ctl.duration)) bp.push_back(t);
  bp.push_back(ctl.duration);
  std::sort(bp.begin(), bp.end());

  auto h_at = [&](double t) {
    BiasPoint b{ctl.n_g1, ctl.n_g2, ctl.f1, ctl.f2, ctl.f3.value(t)};
    return build_two_qubit_hamiltonian(en, p, b, ctl.include_e3);
  };
  auto constant_on = [&](double a, double b) { return ctl.f3.constant_on(a, b); };
  auto distance = [](const Matrix& a, const Matrix& b) { return max_abs(a - b); };
  return propagate_adaptive(h_at, constant_on, bp, 4, opts, distance);
}

inline StorageReport run_storage(const DeviceParams& p, const QuantumState& rho1,
                                 const QuantumState& rho2, const StorageControls& ctl,
                                 const PiecewiseOptions& opts = {1e-2, 1e-10, 14}) {
  if (rho1.dim() != 2 || rho2.dim() != 2)
    throw std::invalid_argument("run_storage: both inputs must be single-qubit states");
  const CircuitEnergies en = derive_energies(p);
  const PiecewiseResult prop = storage_propagator(p, ctl, opts);
  const Operator u(prop.at_breakpoints.back(), Dims{2, 2});

  QuantumState final_state = tensor_product(rho1, rho2).transformed(u);
  QuantumState q1 = partial_trace(final_state, {0});
  QuantumState q2 = partial_trace(final_state, {1});

  const QuantumState target2 = rho1.transformed(storage_correction());
  const QuantumState target1 = rho2.transformed(storage_correction_qubit1());

  StorageReport r{final_state, q1, q2, u};
  r.xi_bar = accumulated_phase(ctl.f3, ctl.duration, p.e_j3);
  r.zz_phase = ctl.include_e3 ? en.e_3 * ctl.duration / kHbar : 0.0;
  r.fidelity_raw = state_fidelity(rho1, q2);
  r.fidelity_corrected = state_fidelity(target2, q2);
  r.fidelity_qubit1 = state_fidelity(target1, q1);
  return r;
}

struct ZZPhase {
  Operator factor;  // exp(-i (E_3 t / hbar) sz sz)
  double angle = 0;  // E_3 t / hbar
  double residual = 0;  // max|U_full - U_xy U_zz|
};

/// ZZ phase accumulated alongside the swap at the degeneracy point (f3 = 0).
inline ZZPhase zz_phase_factor(double e_3, double e_j3, double t) {
  using namespace pauli;
  const Operator zz = tensor_product(sz(), sz());
  const Operator h_xy = xy_hamiltonian(e_j3, 0.0);
  const Operator u_zz = propagator(e_3 * zz, t);
  const Operator u_xy = propagator(h_xy, t);
  const Operator u_full = propagator(h_xy + e_3 * zz, t);
  return {u_zz, e_3 * t / kHbar, max_abs(u_full.matrix() - (u_xy * u_zz).matrix())};
}

struct SwapSchedule {
  Waveform f3;
  double ramp = 0;  // ps, each way
  double hold = 0;  // ps at f3 = 0
  double duration = 0;
};

/// Coupler flux schedule 1/2 -> 0 -> 1/2 whose accumulated phase is exactly
/// `target_xi` (pi/2 for a full state swap): ramps of the given shape, then a
/// hold retimed to make up the remainder.
inline SwapSchedule make_swap_schedule(double e_j3, double ramp, Shape shape = Shape::raised_cosine,
                                       double target_xi = kPi / 2) {
  if (!(ramp >= 0.0)) throw std::invalid_argument("make_swap_schedule: ramp must be >= 0");
  double ramp_integral = 0.0;
  if (ramp > 0.0) {
    const Waveform up = Waveform::ramp(shape, 0.5, 0.0, 0.0, ramp);
    ramp_integral = integrate_over(up, [](double f) { return std::cos(kPi * f); }, 0.0, ramp);
  }
  const double hold = target_xi * kHbar / (2.0 * e_j3) - 2.0 * ramp_integral;
  if (hold < 0.0) throw PhysicsError("make_swap_schedule: ramps alone exceed the target phase");
  SwapSchedule s;
  s.ramp = ramp;
  s.hold = hold;
  if (ramp > 0.0) s.f3.then(shape, 0.5, 0.0, ramp);
  if (hold > 0.0) s.f3.then(Shape::constant, 0.0, 0.0, hold);
  if (ramp > 0.0) s.f3.then(shape, 0.0, 0.5, ramp);
  s.duration = 2.0 * ramp + hold;
  return s;
}

}  // namespace squidstore
