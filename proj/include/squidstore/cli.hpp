#pragma once

// Command-line front end. `dispatch` returns the process exit code:
// 0 success, 1 usage error, 2 physics or validation error.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "squidstore/circuit.hpp"
#include "squidstore/pulse_program.hpp"
#include "squidstore/resonator.hpp"
#include "squidstore/storage.hpp"
#include "squidstore/table.hpp"

namespace squidstore::cli {

class UsageError : public Error {
 public:
  using Error::Error;
};

struct SweepSpec {
  std::string name;
  double min = 0, max = 0;
  int points = 1;
  bool log = false;

  std::vector<double> values() const {
    std::vector<double> v;
    for (int i = 0; i < points; ++i) {
      const double s = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
      v.push_back(log ? min * std::pow(max / min, s) : min + (max - min) * s);
    }
    if (points > 1) v.back() = max;
    return v;
  }
};

/// `name:min:max:points` (linear, inclusive) or `name:log:min:max:points`.
inline SweepSpec parse_sweep(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  SweepSpec s;
  const bool log = parts.size() == 5 && parts[1] == "log";
  if (!(parts.size() == 4 || log) || parts[0].empty())
    throw UsageError("sweep must be name:min:max:points or name:log:min:max:points, got `" + text + "`");
  s.name = parts[0];
  s.log = log;
  const std::size_t o = log ? 2 : 1;
  if (!parse_double(parts[o], s.min) || !parse_double(parts[o + 1], s.max) || !std::isfinite(s.min) ||
      !std::isfinite(s.max))
    throw UsageError("sweep bounds must be numbers in `" + text + "`");
  const std::string& pts = parts[o + 2];
  const auto [ptr, ec] = std::from_chars(pts.data(), pts.data() + pts.size(), s.points);
  if (ec != std::errc() || ptr != pts.data() + pts.size() || s.points < 1)
    throw UsageError("sweep points must be an integer >= 1 in `" + text + "`");
  if (log && !(s.min > 0 && s.max > 0)) throw UsageError("log sweep bounds must be positive");
  return s;
}

/// Worker count for sweeps: SQUIDSTORE_THREADS if set, else the hardware count.
inline unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SQUIDSTORE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

/// Evaluates `row(i)` for i in [0, n) on up to sweep_threads() workers and
/// returns the rows in index order. The first exception is rethrown.
inline std::vector<std::vector<Cell>> parallel_rows(std::size_t n,
                                                    const std::function<std::vector<Cell>(std::size_t)>& row) {
  std::vector<std::vector<Cell>> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = row(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(sweep_threads(), n));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Single-qubit state from a label: 0, 1, +, -, i, -i.
inline Vector qubit_label(const std::string& l) {
  const double r = 1.0 / std::sqrt(2.0);
  Vector v(2);
  if (l == "0")
    v << 1, 0;
  else if (l == "1")
    v << 0, 1;
  else if (l == "+")
    v << r, r;
  else if (l == "-")
    v << r, -r;
  else if (l == "i")
    v << r, kI * r;
  else if (l == "-i")
    v << r, -kI * r;
  else
    throw UsageError("unknown state label `" + l + "` (use 0, 1, +, -, i, -i)");
  return v;
}

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto c = s.find(',', start);
    out.push_back(s.substr(start, c - start));
    if (c == std::string::npos) break;
    start = c + 1;
  }
  return out;
}

struct RunConfig {
  std::string device;
  std::string geometry;
  std::string out;
  std::string format = "csv";
  std::string sweep;
  bool include_e3 = false;
  std::string model = "rwa";
  int n_max = 8;
  double tol = 1e-8;
  std::string init;
  std::string program;

  TableFormat table_format() const { return format == "json" ? TableFormat::json : TableFormat::csv; }
  CouplingModel coupling_model() const { return model == "rabi" ? CouplingModel::rabi : CouplingModel::rwa; }

  DeviceParams load_device_file() const {
    if (device.empty()) throw UsageError("--device is required");
    require_file(device);
    return load_device(device);
  }
  std::optional<ResonatorGeometry> load_geometry_file() const {
    if (geometry.empty()) return std::nullopt;
    require_file(geometry);
    return load_geometry(geometry);
  }
  static void require_file(const std::string& path) {
    if (!std::filesystem::is_regular_file(path)) throw UsageError("file not found: `" + path + "`");
  }
};

// Bus defaults when no geometry is given.
inline constexpr double kDefaultHbarOmega = 100.0;  // ueV
inline constexpr double kDefaultG = 0.1;

inline Table cmd_energies(const RunConfig& cfg) {
  const DeviceParams p = cfg.load_device_file();
  const CircuitEnergies en = derive_energies(p);
  const RegimeReport regime = validate_charge_regime(p, en);
  Table t{{"e_c1_uev", "e_c2_uev", "e_3_uev", "c_sigma1_af", "c_sigma2_af", "e_c1_over_e_j1",
           "e_c2_over_e_j2", "e_3_over_e_j3", "swap_time_ps"},
          {}};
  t.add({en.e_c1, en.e_c2, en.e_3, en.c_s1, en.c_s2, regime.checks[0].value, regime.checks[1].value,
         regime.checks[2].value, p.e_j3 > 0 ? swap_time(p.e_j3) : 0.0});
  return t;
}

/// Qubit 1 in the --init state (default |+>), qubit 2 in |0~>, coupler held
/// at f3 = 0 for the whole duration.
inline Table cmd_storage(const RunConfig& cfg) {
  const DeviceParams base = cfg.load_device_file();
  const QuantumState rho1 = QuantumState::pure(qubit_label(cfg.init.empty() ? "+" : cfg.init));
  const QuantumState rho2 = QuantumState::pure(tilde_basis_map().matrix().col(0));

  SweepSpec sweep{"duration", swap_time(base.e_j3), swap_time(base.e_j3), 1};
  if (!cfg.sweep.empty()) sweep = parse_sweep(cfg.sweep);
  if (sweep.name != "duration" && sweep.name != "ej3")
    throw UsageError("storage sweeps `duration` (ps) or `ej3` (ueV), got `" + sweep.name + "`");
  const std::vector<double> xs = sweep.values();

  Table t{{"t_ps", "e_j3_uev", "xi_bar", "fidelity_raw", "fidelity", "fidelity_qubit1"}, {}};
  t.rows = parallel_rows(xs.size(), [&](std::size_t i) -> std::vector<Cell> {
    DeviceParams p = base;
    double duration = swap_time(base.e_j3);
    if (sweep.name == "duration")
      duration = xs[i];
    else
      p.e_j3 = xs[i];
    if (!(duration >= 0.0)) throw UsageError("storage: duration must be >= 0");
    StorageControls ctl;
    ctl.include_e3 = cfg.include_e3;
    ctl.duration = duration;
    if (duration > 0.0) ctl.f3 = Waveform::constant(0.0, 0.0, duration);
    const StorageReport r = run_storage(p, rho1, rho2, ctl);
    return {duration, p.e_j3, r.xi_bar, r.fidelity_raw, r.fidelity_corrected, r.fidelity_qubit1};
  });
  return t;
}

inline std::pair<double, double> bus_parameters(const RunConfig& cfg) {
  if (const auto geom = cfg.load_geometry_file()) {
    const ResonatorMode m = resonator_mode(*geom);
    return {m.hbar_omega, m.g};
  }
  return {kDefaultHbarOmega, kDefaultG};
}

/// Transfers the --init state (default |+>) between two units with resonant
/// stages of pi hbar / (2 lambda); optional `lambda` sweep in ueV.
inline Table cmd_transfer(const RunConfig& cfg) {
  const DeviceParams p = cfg.load_device_file();
  const auto [hbar_omega, g] = bus_parameters(cfg);
  const Vector v = qubit_label(cfg.init.empty() ? "+" : cfg.init);
  const cplx beta = v(0), alpha = v(1);

  SweepSpec sweep{"lambda", g * p.e_j2, g * p.e_j2, 1};
  if (!cfg.sweep.empty()) sweep = parse_sweep(cfg.sweep);
  if (sweep.name != "lambda") throw UsageError("transfer sweeps `lambda` (ueV), got `" + sweep.name + "`");
  const std::vector<double> xs = sweep.values();

  Table t{{"lambda_uev", "hbar_omega_uev", "t1_ps", "t2_ps", "total_time_ps", "fidelity_raw", "fidelity",
           "correction_phase_rad", "top_fock_population"},
          {}};
  t.rows = parallel_rows(xs.size(), [&](std::size_t i) -> std::vector<Cell> {
    if (!(xs[i] > 0.0)) throw UsageError("transfer: lambda must be positive");
    TransferPlan plan = TransferPlan::resonant(xs[i], cfg.coupling_model());
    plan.n_max = cfg.n_max;
    const TransferResult r = run_transfer(alpha, beta, plan, hbar_omega);
    return {xs[i], hbar_omega, plan.t1, plan.t2, r.total_time, r.fidelity_raw, r.fidelity_corrected,
            r.correction_phase, r.top_fock_population};
  });
  return t;
}

inline Table cmd_rwa_gap(const RunConfig& cfg) {
  const auto [hbar_omega, g] = bus_parameters(cfg);
  (void)g;
  std::vector<double> lambdas{10.0, 3.0, 1.0, 0.3, 0.0};
  if (!cfg.sweep.empty()) {
    const SweepSpec s = parse_sweep(cfg.sweep);
    if (s.name != "lambda") throw UsageError("rwa-gap sweeps `lambda` (ueV), got `" + s.name + "`");
    lambdas = s.values();
  }
  Table t{{"lambda_uev", "hbar_omega_uev", "gap"}, {}};
  t.rows = parallel_rows(lambdas.size(), [&](std::size_t i) -> std::vector<Cell> {
    const double l = lambdas[i];
    return {l, hbar_omega, rwa_fidelity_gap(hbar_omega, std::span<const double>(&l, 1), cfg.n_max).front()};
  });
  return t;
}

inline PulseProgram load_program_file(const RunConfig& cfg) {
  if (cfg.program.empty()) throw UsageError("a program path is required");
  RunConfig::require_file(cfg.program);
  return load_program(cfg.program);
}

inline Table cmd_validate(const RunConfig& cfg, bool& failed) {
  const PulseProgram prog = load_program_file(cfg);
  const ValidationReport rep = validate_program(prog, cfg.load_device_file(), cfg.load_geometry_file());
  Table t{{"check", "status", "value", "message"}, {}};
  for (const auto& f : rep.findings) t.add({f.check, std::string(severity_name(f.severity)), f.value, f.message});
  failed = !rep.ok();
  return t;
}

/// --init takes one label per register qubit, comma separated (default all 0).
inline Table cmd_run(const RunConfig& cfg) {
  const PulseProgram prog = load_program_file(cfg);
  ExecutionContext ctx{cfg.load_device_file(), cfg.load_geometry_file(), cfg.include_e3,
                       cfg.coupling_model()};
  const Dims dims = prog.register_dims();
  const std::size_t qubits = dims.size() - (prog.resonator ? 1 : 0);
  std::vector<std::string> labels(qubits, "0");
  if (!cfg.init.empty()) {
    labels = split_commas(cfg.init);
    for (const auto& l : labels) (void)qubit_label(l);
    if (labels.size() != qubits)
      throw UsageError("--init needs " + std::to_string(qubits) + " labels for this register");
  }
  ExecuteOptions opts;
  opts.tol = cfg.tol;
  const Trajectory traj = execute_program(prog, ctx, register_state(prog, labels), opts);
  Table t;
  t.columns.push_back("t_ps");
  for (const auto& n : traj.names) t.columns.push_back(n);
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::vector<Cell> row{traj.times[i]};
    for (double v : traj.values[i]) row.emplace_back(v);
    t.add(std::move(row));
  }
  return t;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Charge-qubit storage and resonator-bus simulator", "squidstore"};
  app.require_subcommand(1, 1);
  RunConfig cfg;

  auto common = [&](CLI::App* sub, bool device_required) {
    auto* d = sub->add_option("--device", cfg.device, "device parameter file");
    if (device_required) d->required();
    sub->add_option("--out", cfg.out, "output path (default stdout)");
    sub->add_option("--format", cfg.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  };
  auto physics = [&](CLI::App* sub) {
    sub->add_option("--geometry", cfg.geometry, "resonator geometry file");
    sub->add_option("--sweep", cfg.sweep, "name:min:max:points or name:log:min:max:points");
    sub->add_flag("--include-e3", cfg.include_e3, "keep the E_3 sz sz term");
    sub->add_option("--model", cfg.model, "rwa or rabi")->check(CLI::IsMember({"rwa", "rabi"}));
    sub->add_option("--nmax", cfg.n_max, "Fock truncation")->check(CLI::Range(1, 64));
    sub->add_option("--tol", cfg.tol, "propagation tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--init", cfg.init, "initial state label(s): 0, 1, +, -, i, -i");
  };

  auto* energies = app.add_subcommand("energies", "charging energies of a device");
  common(energies, true);
  auto* storage = app.add_subcommand("storage", "swap fidelity vs duration or E_J3");
  common(storage, true);
  physics(storage);
  auto* transfer = app.add_subcommand("transfer", "end-to-end transfer through the resonator");
  common(transfer, true);
  physics(transfer);
  auto* gap = app.add_subcommand("rwa-gap", "RWA vs full-model fidelity gap vs lambda");
  common(gap, false);
  physics(gap);
  auto* validate = app.add_subcommand("validate", "check a pulse program against a device");
  validate->add_option("program", cfg.program, "pulse program")->required();
  common(validate, true);
  validate->add_option("--geometry", cfg.geometry, "resonator geometry file");
  auto* run = app.add_subcommand("run", "execute a pulse program");
  run->add_option("program", cfg.program, "pulse program")->required();
  common(run, true);
  physics(run);

  if (argc <= 1) {
    err << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << sub->help();
    else
      err << app.help();
    return 1;
  }

  try {
    Table t;
    bool failed = false;
    if (*energies)
      t = cmd_energies(cfg);
    else if (*storage)
      t = cmd_storage(cfg);
    else if (*transfer)
      t = cmd_transfer(cfg);
    else if (*gap)
      t = cmd_rwa_gap(cfg);
    else if (*validate)
      t = cmd_validate(cfg, failed);
    else if (*run)
      t = cmd_run(cfg);
    emit_table(t, cfg.table_format(), cfg.out, out);
    return failed ? 2 : 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace squidstore::cli
