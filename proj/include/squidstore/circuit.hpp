#pragma once

// Circuit energies of a two-box storage unit: capacitances -> charging
// energies, flux-tuned Josephson couplings, gate-charge splittings, and a
// truncated charge-basis Hamiltonian used to check the two-level reduction.

#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "squidstore/constants.hpp"
#include "squidstore/keyvalue.hpp"
#include "squidstore/quantum.hpp"

namespace squidstore {

/// Capacitances in aF, Josephson energies in ueV.
struct DeviceParams {
  double c_j1 = 0, c_j2 = 0, c_j3 = 0;
  double c_g1 = 0, c_g2 = 0;
  double c_sh1 = 0, c_sh2 = 0;
  double e_j1 = 0, e_j2 = 0, e_j3 = 0;

  double c_sigma1() const { return c_j1 + c_j3 + c_g1 + c_sh1; }
  double c_sigma2() const { return c_j2 + c_j3 + c_g2 + c_sh2; }
};

struct CircuitEnergies {
  double e_c1 = 0, e_c2 = 0, e_3 = 0;  // ueV
  double c_s1 = 0, c_s2 = 0;           // aF
};

inline CircuitEnergies derive_energies(const DeviceParams& p) {
  for (double c : {p.c_j1, p.c_j2, p.c_j3, p.c_g1, p.c_g2, p.c_sh1, p.c_sh2})
    if (!(c >= 0.0)) throw std::invalid_argument("derive_energies: capacitances must be >= 0");
  for (double e : {p.e_j1, p.e_j2, p.e_j3})
    if (!(e >= 0.0)) throw std::invalid_argument("derive_energies: Josephson energies must be >= 0");

  CircuitEnergies en;
  en.c_s1 = p.c_sigma1();
  en.c_s2 = p.c_sigma2();
  const double det = en.c_s1 * en.c_s2 - p.c_j3 * p.c_j3;
  if (!(det > 0.0))
    throw PhysicsError("derive_energies: C_S1*C_S2 - C_J3^2 must be positive (got " +
                       std::to_string(det) + " aF^2)");
  constexpr double e2 = PhysicalConstants::e2_over_aF_ueV;
  en.e_c1 = 2.0 * e2 * en.c_s2 / det;
  en.e_c2 = 2.0 * e2 * en.c_s1 / det;
  en.e_3 = e2 * p.c_j3 / (2.0 * det);
  return en;
}

/// E_J cos(pi f) for a symmetric dcSQUID threaded by f flux quanta.
inline double effective_josephson(double e_j, double f) {
  // Half-integer flux is an exact zero; cos(pi/2) rounds to 6e-17.
  if (std::remainder(f - 0.5, 1.0) == 0.0) return 0.0;
  return e_j * std::cos(kPi * f);
}

/// (Omega_1, Omega_2) in ueV for gate charges n_g1, n_g2 (units of 2e).
inline std::pair<double, double> bias_splitting(const CircuitEnergies& en, double n_g1,
                                                double n_g2) {
  const double d1 = n_g1 - 0.5, d2 = n_g2 - 0.5;
  return {en.e_c1 * d1 + 2.0 * en.e_3 * d2, en.e_c2 * d2 + 2.0 * en.e_3 * d1};
}

struct BiasPoint {
  double n_g1 = 0.5, n_g2 = 0.5;
  double f1 = 0.5, f2 = 0.5, f3 = 0.5;

  std::pair<double, double> omegas(const CircuitEnergies& en) const {
    return bias_splitting(en, n_g1, n_g2);
  }
};

/// Inclusive range of Cooper-pair numbers kept per box.
struct ChargeWindow {
  int lo = -2;
  int hi = 3;
  int size() const { return hi - lo + 1; }
};

/// Charging energy plus Josephson tunneling on |n1, n2>, n_i in the window.
/// Tunneling uses cos(theta) -> (raise + lower)/2; junction 3 carries
/// correlated pair tunneling |n1, n2> <-> |n1+1, n2+1> since its phase is
/// -(theta_1 + theta_2).
inline Operator full_charge_hamiltonian(const DeviceParams& p, const BiasPoint& bias,
                                        const ChargeWindow& window = {}) {
  if (window.size() < 1) throw std::invalid_argument("full_charge_hamiltonian: empty window");
  if (window.lo > 0 || window.hi < 1)
    throw std::invalid_argument("full_charge_hamiltonian: window must contain 0 and 1");
  const CircuitEnergies en = derive_energies(p);
  const int w = window.size();
  auto idx = [&](int n1, int n2) { return (n1 - window.lo) * w + (n2 - window.lo); };

  const double t1 = -0.5 * effective_josephson(p.e_j1, bias.f1);
  const double t2 = -0.5 * effective_josephson(p.e_j2, bias.f2);
  const double t3 = -0.5 * effective_josephson(p.e_j3, bias.f3);

  Matrix h = Matrix::Zero(w * w, w * w);
  for (int n1 = window.lo; n1 <= window.hi; ++n1)
    for (int n2 = window.lo; n2 <= window.hi; ++n2) {
      const double d1 = n1 - bias.n_g1, d2 = n2 - bias.n_g2;
      const int i = idx(n1, n2);
      h(i, i) = en.e_c1 * d1 * d1 + en.e_c2 * d2 * d2 + 4.0 * en.e_3 * d1 * d2;
      if (n1 < window.hi) h(i, idx(n1 + 1, n2)) = h(idx(n1 + 1, n2), i) = t1;
      if (n2 < window.hi) h(i, idx(n1, n2 + 1)) = h(idx(n1, n2 + 1), i) = t2;
      if (n1 < window.hi && n2 < window.hi)
        h(i, idx(n1 + 1, n2 + 1)) = h(idx(n1 + 1, n2 + 1), i) = t3;
    }
  return {std::move(h), Dims{w, w}};
}

/// Restriction of a charge-basis operator to {|0>,|1>} x {|0>,|1>}.
inline Operator project_to_qubits(const Operator& h, const ChargeWindow& window = {}) {
  const int w = window.size();
  if (h.dims() != Dims{w, w}) throw std::invalid_argument("project_to_qubits: dims mismatch");
  std::vector<int> sel;
  for (int n1 : {0, 1})
    for (int n2 : {0, 1}) sel.push_back((n1 - window.lo) * w + (n2 - window.lo));
  Matrix out(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out(r, c) = h(sel[r], sel[c]);
  return {std::move(out), Dims{2, 2}};
}

/// Coefficients of a two-qubit operator in the Pauli terms that appear in the
/// reduced Hamiltonian, plus whatever is left over.
struct TwoQubitTerms {
  double identity = 0, z1 = 0, z2 = 0, zz = 0, x1 = 0, x2 = 0;
  double xx_minus_yy = 0;  // coefficient c of c*(sx sx - sy sy)
  double residual = 0;     // max-entry norm of everything outside these terms
};

inline TwoQubitTerms decompose_two_qubit(const Operator& h) {
  if (h.dims() != Dims{2, 2}) throw std::invalid_argument("decompose_two_qubit: need dims [2,2]");
  const Operator id = Operator::identity({2});
  auto coeff = [&](const Operator& a, const Operator& b) {
    return (tensor_product(a, b).matrix() * h.matrix()).trace().real() / 4.0;
  };
  using namespace pauli;
  TwoQubitTerms t;
  t.identity = coeff(id, id);
  t.z1 = coeff(sz(), id);
  t.z2 = coeff(id, sz());
  t.zz = coeff(sz(), sz());
  t.x1 = coeff(sx(), id);
  t.x2 = coeff(id, sx());
  const double cxx = coeff(sx(), sx()), cyy = coeff(sy(), sy());
  t.xx_minus_yy = 0.5 * (cxx - cyy);
  const Operator xy = tensor_product(sx(), sx()) - tensor_product(sy(), sy());
  const Operator rebuilt = t.identity * Operator::identity({2, 2}) +
                           t.z1 * tensor_product(sz(), id) + t.z2 * tensor_product(id, sz()) +
                           t.zz * tensor_product(sz(), sz()) + t.x1 * tensor_product(sx(), id) +
                           t.x2 * tensor_product(id, sx()) + t.xx_minus_yy * xy;
  t.residual = max_abs(h.matrix() - rebuilt.matrix());
  return t;
}

struct RegimeThresholds {
  double min_charge_ratio = 5.0;  // E_ci / E_Ji
  double max_e3_ratio = 0.05;     // E_3 / E_J3
};

struct RegimeCheck {
  std::string name;
  double value = 0;
  double threshold = 0;
  bool pass = true;
};

struct RegimeReport {
  std::vector<RegimeCheck> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

inline RegimeReport validate_charge_regime(const DeviceParams& p, const CircuitEnergies& en,
                                           const RegimeThresholds& th = {}) {
  RegimeReport r;
  auto ratio = [](double num, double den) {
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
  };
  const double r1 = ratio(en.e_c1, p.e_j1), r2 = ratio(en.e_c2, p.e_j2);
  r.checks.push_back({"charge_regime_1", r1, th.min_charge_ratio, r1 >= th.min_charge_ratio});
  r.checks.push_back({"charge_regime_2", r2, th.min_charge_ratio, r2 >= th.min_charge_ratio});
  const double r3 = p.e_j3 > 0.0 ? en.e_3 / p.e_j3 : (en.e_3 > 0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.checks.push_back({"e3_small", r3, th.max_e3_ratio, r3 <= th.max_e3_ratio});
  return r;
}

inline DeviceParams parse_device(std::string_view text) {
  static const std::set<std::string> keys{"c_j1", "c_j2", "c_j3", "c_g1", "c_g2",
                                          "c_sh1", "c_sh2", "e_j1", "e_j2", "e_j3"};
  const auto kv = parse_key_values(text, keys);
  auto get = [&](const char* k, bool required) {
    const auto it = kv.find(k);
    if (it == kv.end()) {
      if (required) throw FormatError(std::string("missing key `") + k + "`", 0);
      return 0.0;
    }
    return it->second;
  };
  DeviceParams p;
  p.c_j1 = get("c_j1", true);
  p.c_j2 = get("c_j2", true);
  p.c_j3 = get("c_j3", true);
  p.c_g1 = get("c_g1", true);
  p.c_g2 = get("c_g2", true);
  p.c_sh1 = get("c_sh1", false);
  p.c_sh2 = get("c_sh2", false);
  p.e_j1 = get("e_j1", true);
  p.e_j2 = get("e_j2", true);
  p.e_j3 = get("e_j3", true);
  return p;
}

inline DeviceParams load_device(const std::string& path) {
  return parse_device(read_text_file(path));
}

}  // namespace squidstore
