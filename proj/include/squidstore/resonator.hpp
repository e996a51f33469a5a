#pragma once

// Transmission-line resonator bus: mode frequency and zero-point flux from
// the line geometry, qubit-resonator Hamiltonians with and without the
// rotating-wave approximation, and the two-stage state transfer between the
// storage qubits of two units.
//
// Resonance is 2|Omega_2| = hbar omega (Omega sz has splitting 2 Omega). The
// transfer runs with Omega_2 = -hbar omega / 2 so the one-Cooper-pair state
// |1> is the excited level, matching the mapping alpha|1> + beta|0> ->
// photon. sigma_+ is always the raiser of the Omega sz ladder.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "squidstore/constants.hpp"
#include "squidstore/keyvalue.hpp"
#include "squidstore/quantum.hpp"

namespace squidstore {

struct ResonatorGeometry {
  double length_m = 0;      // L
  double ind_per_m = 0;     // l, H/m
  double cap_per_m = 0;     // c, F/m
  double loop_area_m2 = 0;  // S
  double distance_m = 0;    // d
  int mode_index = 1;       // n0
  int n_max = 8;            // Fock truncation

  void validate() const {
    if (!(length_m > 0 && ind_per_m > 0 && cap_per_m > 0 && distance_m > 0))
      throw std::invalid_argument("ResonatorGeometry: line parameters must be positive");
    if (!(loop_area_m2 >= 0)) throw std::invalid_argument("ResonatorGeometry: negative loop area");
    if (mode_index < 1) throw std::invalid_argument("ResonatorGeometry: mode_index must be >= 1");
    if (n_max < 2) throw std::invalid_argument("ResonatorGeometry: n_max must be >= 2");
  }
};

struct ResonatorMode {
  double omega = 0;            // rad/s
  double hbar_omega = 0;       // ueV
  double flux_zero_point = 0;  // Wb
  double b_zero_point = 0;     // T
  double g = 0;                // dimensionless
  bool lamb_dicke = true;      // g < 1
};

/// omega_n0 = n0 pi / (L sqrt(l c)).
inline ResonatorMode mode_frequency(const ResonatorGeometry& geom) {
  geom.validate();
  ResonatorMode m;
  m.omega = geom.mode_index * kPi / (geom.length_m * std::sqrt(geom.ind_per_m * geom.cap_per_m));
  m.hbar_omega = PhysicalConstants::hbar * m.omega / PhysicalConstants::J_per_ueV;
  return m;
}

/// Zero-point field (1/d) sqrt(hbar l omega / L), flux S * B, and
/// g = S sqrt(hbar l omega) / (d Phi0 sqrt(L)).
inline ResonatorMode coupling_constant(const ResonatorGeometry& geom, ResonatorMode mode) {
  geom.validate();
  const double root =
      std::sqrt(PhysicalConstants::hbar * geom.ind_per_m * mode.omega / geom.length_m);
  mode.b_zero_point = root / geom.distance_m;
  mode.flux_zero_point = geom.loop_area_m2 * mode.b_zero_point;
  mode.g = mode.flux_zero_point / PhysicalConstants::Phi0;
  mode.lamb_dicke = mode.g < 1.0;
  return mode;
}

inline ResonatorMode resonator_mode(const ResonatorGeometry& geom) {
  return coupling_constant(geom, mode_frequency(geom));
}

/// Factor by which S/d must be scaled to reach `target_g`.
inline double area_scale_for_coupling(const ResonatorMode& mode, double target_g) {
  if (!(mode.g > 0)) throw PhysicsError("area_scale_for_coupling: g is zero");
  return target_g / mode.g;
}

inline ResonatorGeometry parse_geometry(std::string_view text) {
  static const std::set<std::string> keys{"line_length_m", "ind_per_m",  "cap_per_m", "loop_area_m2",
                                          "distance_m",    "mode_index", "n_max"};
  const auto kv = parse_key_values(text, keys);
  auto get = [&](const char* k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw FormatError(std::string("missing key `") + k + "`", 0);
    return it->second;
  };
  auto get_int = [&](const char* k, int fallback) {
    const auto it = kv.find(k);
    if (it == kv.end()) return fallback;
    if (it->second != std::floor(it->second))
      throw FormatError(std::string("`") + k + "` must be an integer", 0);
    return static_cast<int>(it->second);
  };
  ResonatorGeometry g;
  g.length_m = get("line_length_m");
  g.ind_per_m = get("ind_per_m");
  g.cap_per_m = get("cap_per_m");
  g.loop_area_m2 = get("loop_area_m2");
  g.distance_m = get("distance_m");
  g.mode_index = get_int("mode_index", 1);
  g.n_max = get_int("n_max", 8);
  g.validate();
  return g;
}

inline ResonatorGeometry load_geometry(const std::string& path) {
  return parse_geometry(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Qubit (x) Fock Hamiltonians. Energies in ueV.

/// Raiser of the Omega sz ladder: |0><1| for Omega >= 0, |1><0| otherwise.
inline Operator ladder_raise(double omega) {
  return omega >= 0.0 ? pauli::charge_lower() : pauli::charge_raise();
}

/// Excitation number a^dag a + sigma_+ sigma_- on qubit (x) Fock(n_max).
inline Operator excitation_number(double omega, int n_max) {
  const Operator sp = ladder_raise(omega);
  return tensor_product(Operator::identity({2}), fock::number(n_max)) +
         tensor_product(sp * sp.adjoint(), Operator::identity({n_max + 1}));
}

/// Omega sz + hbar omega a^dag a - lambda (a sigma_+ + a^dag sigma_-).
inline Operator jc_hamiltonian(double omega2, double hbar_omega, double lambda, int n_max) {
  if (n_max < 1) throw std::invalid_argument("jc_hamiltonian: n_max must be >= 1");
  const Operator id2 = Operator::identity({2});
  const Operator idf = Operator::identity({n_max + 1});
  const Operator a = fock::annihilation(n_max);
  const Operator sp = ladder_raise(omega2);
  const Operator exchange = tensor_product(sp, a);
  return omega2 * tensor_product(pauli::sz(), idf) +
         hbar_omega * tensor_product(id2, fock::number(n_max)) -
         lambda * (exchange + exchange.adjoint());
}

/// Omega sz - lambda (a + a^dag) sx + hbar omega (a^dag a + 1/2).
inline Operator rabi_hamiltonian(double omega2, double hbar_omega, double lambda, int n_max) {
  if (n_max < 2) throw std::invalid_argument("rabi_hamiltonian: n_max must be >= 2");
  const Operator id2 = Operator::identity({2});
  const Operator idf = Operator::identity({n_max + 1});
  const Operator a = fock::annihilation(n_max);
  return omega2 * tensor_product(pauli::sz(), idf) -
         lambda * tensor_product(pauli::sx(), a + a.adjoint()) +
         hbar_omega * (tensor_product(id2, fock::number(n_max)) + 0.5 * Operator::identity({2, n_max + 1}));
}

// ---------------------------------------------------------------------------
// Transfer protocol.

enum class CouplingModel { rwa, rabi };

/// Full transfer of one excitation between qubit and resonator: pi hbar / (2 lambda).
inline double transfer_stage_time(double lambda) { return kPi * kHbar / (2.0 * lambda); }

struct TransferPlan {
  int source = 0;   // unit k
  int target = 1;   // unit k'
  double lambda = 10.0;          // g E_J2, ueV
  double t1 = 0.0, t2 = 0.0;     // ps
  double idle_detuning = 100.0;  // ueV below resonance while idle
  CouplingModel model = CouplingModel::rwa;
  int n_max = 8;
  bool include_spectator = false;
  double e_3 = 0.0;  // ZZ coupling to qubit 1 of each unit (spectator runs)
  // Spectator qubit-1 states (basis |0>, |1>), used when include_spectator.
  Vector source_q1 = Vector::Unit(2, 0);
  Vector target_q1 = Vector::Unit(2, 0);

  static TransferPlan resonant(double lambda, CouplingModel model = CouplingModel::rwa) {
    TransferPlan p;
    p.lambda = lambda;
    p.t1 = p.t2 = transfer_stage_time(lambda);
    p.model = model;
    return p;
  }
};

struct TransferResult {
  QuantumState final_state;
  QuantumState target_qubit;  // qubit 2 of unit k'
  // Resonator amplitudes after stage 1 given both storage qubits in |0>
  // (spectator-free runs only).
  Vector resonator_after_stage1;
  double fidelity_raw = 0;
  double fidelity_corrected = 0;
  double correction_phase = 0;      // rad applied to |1> of the target
  double intermediate_xi = 0;       // xi read off the stage-1 resonator state
  double resonator_vacuum_final = 0;
  double top_fock_population = 0;   // max over stage ends
  double total_time = 0;            // ps
};

namespace detail {

struct TransferLayout {
  Dims dims;
  int src_q1 = -1, src_q2 = 0, tgt_q1 = -1, tgt_q2 = 1, res = 2;
};

inline TransferLayout transfer_layout(const TransferPlan& plan) {
  TransferLayout l;
  if (plan.include_spectator) {
    l.dims = {2, 2, 2, 2, plan.n_max + 1};
    l.src_q1 = 0;
    l.src_q2 = 1;
    l.tgt_q1 = 2;
    l.tgt_q2 = 3;
    l.res = 4;
  } else {
    l.dims = {2, 2, plan.n_max + 1};
  }
  return l;
}

inline double z_expectation(const Vector& q) {
  return std::norm(q(0)) - std::norm(q(1));
}

}  // namespace detail

/// Hamiltonian of stage 1 (source resonant) or stage 2 (target resonant).
inline Operator transfer_hamiltonian(const TransferPlan& plan, double hbar_omega, int stage) {
  const detail::TransferLayout l = detail::transfer_layout(plan);
  const int n_max = plan.n_max;
  const Operator a = embed(fock::annihilation(n_max), l.res, l.dims);
  Operator h = hbar_omega * embed(fock::number(n_max), l.res, l.dims);
  if (plan.model == CouplingModel::rabi) h += 0.5 * hbar_omega * Operator::identity(l.dims);

  const double omega_res = -0.5 * hbar_omega;
  auto add_unit = [&](int q1, int q2, const Vector& spectator, bool active) {
    double omega = active ? omega_res : omega_res - plan.idle_detuning;
    if (plan.include_spectator) {
      // Retune n_g2 so the spectator's ZZ shift lands the qubit on resonance.
      if (active) omega -= plan.e_3 * detail::z_expectation(spectator);
      h += plan.e_3 * (embed(pauli::sz(), q1, l.dims) * embed(pauli::sz(), q2, l.dims));
    }
    h += omega * embed(pauli::sz(), q2, l.dims);
    if (!active) return;
    if (plan.model == CouplingModel::rwa) {
      const Operator ex = embed(ladder_raise(omega), q2, l.dims) * a;
      h -= plan.lambda * (ex + ex.adjoint());
    } else {
      h -= plan.lambda * (embed(pauli::sx(), q2, l.dims) * (a + a.adjoint()));
    }
  };
  add_unit(l.src_q1, l.src_q2, plan.source_q1, stage == 1);
  add_unit(l.tgt_q1, l.tgt_q2, plan.target_q1, stage == 2);
  return h;
}

/// Phase put on |1> of the target so an ideal transfer returns alpha|1> + beta|0>.
inline double transfer_correction_phase(double hbar_omega, double t1, double t2) {
  return kPi + hbar_omega * (t1 + t2) / kHbar;
}

inline double top_fock_population(const QuantumState& s, int res_site) {
  const QuantumState r = partial_trace(s, {res_site});
  const Matrix rho = r.density();
  return rho(rho.rows() - 1, rho.rows() - 1).real();
}

inline constexpr double kTruncationLimit = 1e-6;

/// Moves alpha|1> + beta|0> from qubit 2 of unit k to qubit 2 of unit k' via
/// the resonator, which starts in vacuum.
inline TransferResult run_transfer(cplx alpha, cplx beta, const TransferPlan& plan,
                                   double hbar_omega) {
  if (std::abs(std::norm(alpha) + std::norm(beta) - 1.0) > 1e-10)
    throw std::invalid_argument("run_transfer: |alpha|^2 + |beta|^2 must be 1");
  if (!(plan.t1 >= 0.0 && plan.t2 >= 0.0))
    throw std::invalid_argument("run_transfer: stage durations must be >= 0");
  if (plan.source == plan.target)
    throw std::invalid_argument("run_transfer: source and target units must differ");
  const detail::TransferLayout l = detail::transfer_layout(plan);

  Vector qk(2);
  qk << beta, alpha;
  const QuantumState vac = QuantumState::basis({plan.n_max + 1}, {0});
  const QuantumState ground = QuantumState::basis({2}, {0});
  const QuantumState src = QuantumState::pure(qk);
  QuantumState psi = plan.include_spectator
                         ? tensor_product(
                               tensor_product(tensor_product(QuantumState::pure(plan.source_q1), src),
                                              tensor_product(QuantumState::pure(plan.target_q1), ground)),
                               vac)
                         : tensor_product(tensor_product(src, ground), vac);

  TransferResult r{psi, ground, Vector()};
  psi = evolve(transfer_hamiltonian(plan, hbar_omega, 1), plan.t1, psi);
  r.top_fock_population = top_fock_population(psi, l.res);
  if (r.top_fock_population > kTruncationLimit)
    throw PhysicsError("run_transfer: truncation overflow after stage 1 (top Fock population " +
                       std::to_string(r.top_fock_population) + ")");
  if (!plan.include_spectator) {
    const int nf = plan.n_max + 1;
    r.resonator_after_stage1 = psi.amplitudes().segment(0, nf);  // q2k = q2k' = |0>
    const cplx c0 = r.resonator_after_stage1(0), c1 = r.resonator_after_stage1(1);
    if (std::abs(c0) > 1e-12 && std::abs(c1) > 1e-12 && std::abs(alpha) > 0 && std::abs(beta) > 0) {
      // Printed form beta e^{i xi}|0> - i alpha e^{-i xi}|1>.
      const double rel = std::arg((c1 / c0) / (-kI * alpha / beta));
      r.intermediate_xi = std::remainder(-0.5 * rel, kPi);
    }
  }

  psi = evolve(transfer_hamiltonian(plan, hbar_omega, 2), plan.t2, psi);
  r.top_fock_population = std::max(r.top_fock_population, top_fock_population(psi, l.res));
  if (r.top_fock_population > kTruncationLimit)
    throw PhysicsError("run_transfer: truncation overflow after stage 2 (top Fock population " +
                       std::to_string(r.top_fock_population) + ")");

  r.final_state = psi;
  r.target_qubit = partial_trace(psi, {l.tgt_q2});
  r.resonator_vacuum_final = partial_trace(psi, {l.res}).density()(0, 0).real();
  r.total_time = plan.t1 + plan.t2;
  r.correction_phase = transfer_correction_phase(hbar_omega, plan.t1, plan.t2);

  const QuantumState expected = QuantumState::pure(qk);
  Matrix fix = Matrix::Identity(2, 2);
  fix(1, 1) = std::exp(kI * r.correction_phase);
  r.fidelity_raw = state_fidelity(expected, r.target_qubit);
  r.fidelity_corrected = state_fidelity(expected, r.target_qubit.transformed(fix));
  return r;
}

/// 1 - F(rabi, rwa) for the transferred target state, one entry per lambda.
inline std::vector<double> rwa_fidelity_gap(double hbar_omega, std::span<const double> lambdas,
                                            int n_max, cplx alpha = {1.0 / std::numbers::sqrt2, 0.0},
                                            cplx beta = {1.0 / std::numbers::sqrt2, 0.0},
                                            double idle_detuning = 100.0) {
  std::vector<double> gaps;
  for (double lambda : lambdas) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("rwa_fidelity_gap: lambda must be >= 0");
    TransferPlan plan;
    plan.lambda = lambda;
    plan.t1 = plan.t2 = lambda > 0.0 ? transfer_stage_time(lambda) : kPi * kHbar / hbar_omega;
    plan.n_max = n_max;
    plan.idle_detuning = idle_detuning;
    plan.model = CouplingModel::rwa;
    const TransferResult jc = run_transfer(alpha, beta, plan, hbar_omega);
    plan.model = CouplingModel::rabi;
    const TransferResult full = run_transfer(alpha, beta, plan, hbar_omega);
    gaps.push_back(std::max(0.0, 1.0 - state_fidelity(jc.target_qubit, full.target_qubit)));
  }
  return gaps;
}

/// Largest photon population reached over `duration` by an excited qubit
/// coupled (JC) to a vacuum resonator, sampled at `samples` points.
inline double idle_leakage(double omega2, double hbar_omega, double lambda, double duration,
                           int n_max = 8, int samples = 200) {
  const Operator h = jc_hamiltonian(omega2, hbar_omega, lambda, n_max);
  const int excited = omega2 >= 0.0 ? 0 : 1;
  const QuantumState start = QuantumState::basis({2, n_max + 1}, {excited, 0});
  const Operator n = embed(fock::number(n_max), 1, {2, n_max + 1});
  double worst = 0.0;
  for (int k = 1; k <= samples; ++k) {
    const QuantumState s = evolve(h, duration * k / samples, start);
    worst = std::max(worst, expectation(n, s).real());
  }
  return worst;
}

/// Omega_2 < 0 that maximizes the photon population after one stage time,
/// found by a coarse sweep over [-hbar omega, 0) and golden-section refinement.
inline double locate_resonance(double hbar_omega, double lambda, int n_max = 8, int points = 201) {
  const double t = transfer_stage_time(lambda);
  const Operator n = embed(fock::number(n_max), 1, {2, n_max + 1});
  const QuantumState start = QuantumState::basis({2, n_max + 1}, {1, 0});
  auto photons = [&](double omega) {
    return expectation(n, evolve(jc_hamiltonian(omega, hbar_omega, lambda, n_max), t, start)).real();
  };
  const double lo = -hbar_omega, hi = -1e-9 * hbar_omega;
  const double step = (hi - lo) / (points - 1);
  int best = 0;
  double best_val = -1.0;
  for (int i = 0; i < points; ++i) {
    const double v = photons(lo + i * step);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = lo + std::max(0, best - 1) * step, b = lo + std::min(points - 1, best + 1) * step;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = photons(c), fd = photons(d);
  for (int it = 0; it < 200 && (b - a) > 1e-12 * hbar_omega; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = photons(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = photons(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace squidstore
