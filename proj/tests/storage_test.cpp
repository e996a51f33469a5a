#include <gtest/gtest.h>

#include <random>

#include "squidstore/storage.hpp"
#include "test_util.hpp"

using namespace squidstore;
using namespace squidstore::testing;

namespace {

DeviceParams reference_device() {
  DeviceParams p;
  p.c_j1 = 400;
  p.c_g1 = 20;
  p.c_sh1 = 9480;
  p.c_j2 = 390;
  p.c_g2 = 10;
  p.c_j3 = 100;
  p.e_j1 = 5;
  p.e_j2 = 100;
  p.e_j3 = 100;
  return p;
}

QuantumState tilde_zero() { return QuantumState::pure(tilde_basis_map().matrix().col(0)); }

StorageControls held_coupler(double duration, bool include_e3 = false) {
  StorageControls ctl;
  ctl.duration = duration;
  ctl.include_e3 = include_e3;
  if (duration > 0) ctl.f3 = Waveform::constant(0.0, 0.0, duration);
  return ctl;
}

Matrix conjugated_swap(double xi) {
  const Matrix c = swap_convention_map().matrix();
  return c * swap_unitary(xi).matrix() * c.adjoint();
}

}  // namespace

TEST(Convention, CouplerPropagatorIsMappedSwapMatrix) {
  for (double e_j3 : {20.0, 100.0, 310.0})
    for (double t : {0.3, 2.0, 5.17, 11.0}) {
      const double xi = 2.0 * e_j3 * t / kHbar;
      EXPECT_LT(max_abs(taylor_propagator(xy_hamiltonian(e_j3).matrix(), t) - conjugated_swap(xi)), 1e-12);
    }
}

TEST(Convention, TildeMapSquaresToMinusIdentity) {
  const Matrix w = tilde_basis_map().matrix();
  EXPECT_LT(max_abs(w * w + Matrix::Identity(2, 2)), 1e-15);
  EXPECT_LT(max_abs(storage_correction().matrix().adjoint() * storage_correction().matrix() - Matrix::Identity(2, 2)),
            1e-15);
}

TEST(Conservation, CouplerConservesTotalEffectiveSpin) {
  EXPECT_LE(commutator_norm(xy_hamiltonian(100.0), total_effective_spin()), 1e-12);
  using namespace pauli;
  EXPECT_LE(commutator_norm(tensor_product(sz(), sz()), xy_hamiltonian(100.0)), 1e-14);
}

TEST(Swap, QuarterSwapTimeAtReferenceCoupling) { EXPECT_NEAR(swap_time(100.0), 5.16958462, 1e-8); }

TEST(Swap, StoresAnyPureStateWithQubitTwoInTildeZero) {
  std::mt19937_64 rng(31);
  const DeviceParams p = reference_device();
  for (int trial = 0; trial < 20; ++trial) {
    const QuantumState rho1 = random_pure(rng);
    const StorageReport r = run_storage(p, rho1, tilde_zero(), held_coupler(swap_time(p.e_j3)));
    EXPECT_NEAR(r.xi_bar, kPi / 2, 1e-12);
    EXPECT_NEAR(r.fidelity_corrected, 1.0, 1e-10);
    EXPECT_NEAR(r.qubit1.density()(0, 0).real(), 1.0, 1e-10);
  }
}

TEST(Swap, QubitTwoCoherenceScalesWithItsInitialPolarization) {
  // Populations swap exactly; the stored coherence picks up a factor
  // p0~ - p1~ from qubit 2's initial tilde populations.
  std::mt19937_64 rng(32);
  const DeviceParams p = reference_device();
  const Matrix w = tilde_basis_map().matrix(), rc = storage_correction().matrix();
  for (double p0 : {1.0, 0.8, 0.5, 0.3, 0.0}) {
    const QuantumState rho1 = random_pure(rng);
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = p0;
    d(1, 1) = 1.0 - p0;
    const QuantumState rho2 = QuantumState::mixed(w * d * w.adjoint());
    const StorageReport r = run_storage(p, rho1, rho2, held_coupler(swap_time(p.e_j3)));
    Matrix expected = rho1.density();
    expected(0, 1) *= 2.0 * p0 - 1.0;
    expected(1, 0) *= 2.0 * p0 - 1.0;
    EXPECT_LT(max_abs(r.qubit2.density() - rc * expected * rc.adjoint()), 1e-10) << "p0 = " << p0;
  }
}

TEST(Swap, QubitOneReceivesQubitTwoWhenStartingInZero) {
  std::mt19937_64 rng(33);
  const DeviceParams p = reference_device();
  for (int trial = 0; trial < 10; ++trial) {
    const QuantumState rho2 = random_mixed(rng);
    const StorageReport r =
        run_storage(p, QuantumState::basis({2}, {0}), rho2, held_coupler(swap_time(p.e_j3)));
    EXPECT_NEAR(r.fidelity_qubit1, 1.0, 1e-10);
  }
}

TEST(Swap, PropagatorMatchesClosedFormForRampedFlux) {
  const DeviceParams p = reference_device();
  for (Shape shape : {Shape::linear, Shape::raised_cosine}) {
    const SwapSchedule s = make_swap_schedule(p.e_j3, 2.0, shape);
    StorageControls ctl;
    ctl.f3 = s.f3;
    ctl.duration = s.duration;
    const PiecewiseResult prop = storage_propagator(p, ctl);
    const double xi = accumulated_phase(s.f3, s.duration, p.e_j3);
    EXPECT_NEAR(xi, kPi / 2, 1e-11);
    EXPECT_LT(op_norm(prop.at_breakpoints.back() - conjugated_swap(xi)), 1e-8) << shape_name(shape);
  }
}

TEST(Swap, LinearRampRetimingHasClosedForm) {
  const SwapSchedule s = make_swap_schedule(100.0, 2.0, Shape::linear);
  EXPECT_NEAR(s.hold, swap_time(100.0) - 2.0 * 2.0 * 2.0 / kPi, 1e-11);
  EXPECT_LT(s.duration, 15.0);
  EXPECT_THROW(make_swap_schedule(100.0, 20.0, Shape::linear), PhysicsError);
}

TEST(Swap, GapInFluxIsAnError) {
  StorageControls ctl;
  ctl.duration = 4.0;
  ctl.f3 = Waveform({{0, 1, Shape::constant, 0, 0}, {2, 4, Shape::constant, 0, 0}});
  EXPECT_THROW(run_storage(reference_device(), tilde_zero(), tilde_zero(), ctl), WaveformError);
}

TEST(Swap, ZeroDurationIsIdentity) {
  std::mt19937_64 rng(34);
  const QuantumState rho1 = random_pure(rng);
  const StorageReport r = run_storage(reference_device(), rho1, tilde_zero(), held_coupler(0.0));
  EXPECT_LT(max_abs(r.propagator.matrix() - Matrix::Identity(4, 4)), 1e-15);
  EXPECT_NEAR(r.fidelity_raw, state_fidelity(rho1, tilde_zero()), 1e-12);
}

TEST(ZZ, FactorizesAndLeavesPopulationsUnchanged) {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> e3(0.1, 5.0), ej(10.0, 300.0), tt(0.0, 20.0);
  for (int trial = 0; trial < 20; ++trial)
    EXPECT_LE(zz_phase_factor(e3(rng), ej(rng), tt(rng)).residual, 1e-12);

  const DeviceParams p = reference_device();
  const QuantumState rho1 = random_pure(rng);
  const StorageReport off = run_storage(p, rho1, tilde_zero(), held_coupler(swap_time(p.e_j3), false));
  const StorageReport on = run_storage(p, rho1, tilde_zero(), held_coupler(swap_time(p.e_j3), true));
  for (int k = 0; k < 4; ++k)
    EXPECT_NEAR(off.final_state.density()(k, k).real(), on.final_state.density()(k, k).real(), 1e-10);
  EXPECT_NEAR(on.zz_phase, derive_energies(p).e_3 / p.e_j3 * kPi / 4, 1e-12);
}
