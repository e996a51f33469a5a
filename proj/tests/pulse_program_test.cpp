#include <gtest/gtest.h>

#include <random>

#include "squidstore/pulse_program.hpp"
#include "squidstore/storage.hpp"
#include "test_util.hpp"

using namespace squidstore;
using namespace squidstore::testing;

namespace {

DeviceParams reference_device() { return load_device(data_path("reference.device")); }

Matrix conjugated_swap(double xi) {
  const Matrix c = swap_convention_map().matrix();
  return c * swap_unitary(xi).matrix() * c.adjoint();
}

ProgramError parse_error(const std::string& text) {
  try {
    parse_program(text);
  } catch (const ProgramError& e) {
    return e;
  }
  ADD_FAILURE() << "program parsed:\n" << text;
  return ProgramError(ProgramErrorKind::syntax, 0, "");
}

const char* kMinimal =
    "version 1\n"
    "unit u\n"
    "channel g unit=u kind=gate2\n"
    "seg g 0 10 const v=0.5\n";

std::string random_program(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nunits(1, 3), nseg(0, 4), coin(0, 1), shape(0, 2);
  std::uniform_real_distribution<double> val(-1.0, 1.0), dur(0.01, 50.0);
  std::string text = "version 1\n";
  if (coin(rng)) text += "hold\n";
  const int n = nunits(rng);
  std::vector<std::string> chans;
  for (int u = 0; u < n; ++u) {
    const bool q1 = coin(rng);
    const std::string id = "u" + std::to_string(u);
    text += "unit " + id + (q1 ? " with_q1\n" : "\n");
    for (const char* k : {"flux1", "flux2", "flux3", "gate1", "gate2", "couple"}) {
      if (!q1 && (std::string(k) == "flux1" || std::string(k) == "flux3")) continue;
      if (coin(rng)) continue;
      const std::string name = std::string("c") + std::to_string(rng() % 1000) + "_" + id + k;
      chans.push_back(name);
      text += "channel " + name + " unit=" + id + " kind=" + k + "\n";
    }
  }
  if (coin(rng))
    text += "resonator n_max=" + std::to_string(2 + rng() % 6) + " hbar_omega_uev=" + format_number(dur(rng)) +
            (coin(rng) ? " g=" + format_number(dur(rng) / 100) : "") + (coin(rng) ? " model=rabi" : "") + "\n";
  for (const auto& c : chans) {
    double t = 0.0;
    for (int s = nseg(rng); s > 0; --s) {
      const double t0 = t + (coin(rng) ? dur(rng) : 0.0), t1 = t0 + dur(rng);
      t = t1;
      const int sh = shape(rng);
      text += "seg " + c + " " + format_number(t0) + " " + format_number(t1) + " ";
      if (sh == 0)
        text += "const v=" + format_number(val(rng)) + "\n";
      else
        text += std::string(sh == 1 ? "linear" : "raised_cosine") + " v0=" + format_number(val(rng)) +
                " v1=" + format_number(val(rng)) + "\n";
      t = std::stod(format_number(t1));
    }
  }
  if (coin(rng)) text += "sample every=" + format_number(dur(rng)) + " observables=trace,purity,pop2:u0\n";
  return text;
}

}  // namespace

TEST(Parse, MinimalProgramRoundTripsByteIdentically) {
  const PulseProgram p = parse_program(kMinimal);
  ASSERT_EQ(p.units.size(), 1u);
  ASSERT_EQ(p.channels.size(), 1u);
  EXPECT_EQ(p.span(), 10.0);
  EXPECT_EQ(serialize_program(p), kMinimal);
}

TEST(Parse, CommentsAndBlankLinesIgnored) {
  const PulseProgram p = parse_program("# header\n\nversion 1   # trailing\nunit u with_q1\n\n");
  EXPECT_TRUE(p.units[0].with_q1);
}

TEST(Parse, StorageFixtureShape) {
  const PulseProgram p = load_program(data_path("storage.pulse"));
  ASSERT_EQ(p.units.size(), 1u);
  ASSERT_EQ(p.channels.size(), 1u);
  EXPECT_EQ(p.channels[0].kind, ChannelKind::flux3);
  EXPECT_EQ(p.channels[0].waveform.segments().size(), 3u);
  EXPECT_EQ(p.register_dims(), (Dims{2, 2}));
}

TEST(Parse, OverlapCitesBothLines) {
  const ProgramError e = parse_error(
      "version 1\nunit u\nchannel g unit=u kind=gate2\nseg g 0 10 const v=0.5\nseg g 5 12 const v=0.4\n");
  EXPECT_EQ(e.kind(), ProgramErrorKind::overlap_segments);
  EXPECT_EQ(e.line(), 5);
  EXPECT_EQ(e.other_line(), 4);
  EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos);
  EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
}

TEST(Parse, ErrorKindsAndLineNumbers) {
  EXPECT_EQ(parse_error("unit u\n").kind(), ProgramErrorKind::syntax);
  EXPECT_EQ(parse_error("version 2\n").line(), 1);
  EXPECT_EQ(parse_error("version 1\nunit u\nseg g 0 1 const v=0\n").kind(), ProgramErrorKind::unknown_channel);
  EXPECT_EQ(parse_error("version 1\nchannel g unit=u kind=gate2\n").kind(), ProgramErrorKind::unknown_unit);
  EXPECT_EQ(parse_error("version 1\nunit u\nchannel g unit=u kind=gate2\nseg g 3 3 const v=0\n").kind(),
            ProgramErrorKind::bad_interval);
  EXPECT_EQ(parse_error("version 1\nunit u\nchannel g unit=u kind=gate2\nseg g 3 1 const v=0\n").kind(),
            ProgramErrorKind::bad_interval);
  EXPECT_EQ(parse_error("version 1\nunit u\nunit u\n").kind(), ProgramErrorKind::duplicate);
  EXPECT_EQ(parse_error("version 1\nunit u\nchannel f unit=u kind=flux3\n").kind(), ProgramErrorKind::syntax);
  EXPECT_EQ(parse_error("version 1\nunit u\nsample every=1 observables=pop1:u\n").kind(),
            ProgramErrorKind::unknown_observable);
  EXPECT_EQ(parse_error("version 1\nunit u\nsample every=1 observables=nphoton\n").kind(),
            ProgramErrorKind::unknown_observable);
  const ProgramError e = parse_error("version 1\nunit u\nchannel g unit=u kind=gate2\nseg g 0 1 wiggle v=0\n");
  EXPECT_EQ(e.line(), 4);
  EXPECT_EQ(parse_error("version 1\nunit u\nchannel g unit=u kind=gate2\nseg g 0 1 const v=x\n").line(), 4);
  EXPECT_EQ(parse_error("version 1\nunit u\nchannel g unit=u kind=gate2\nseg g 0 1 const v0=1\n").line(), 4);
}

TEST(Parse, AcceptsSerializerOutputForRandomPrograms) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 200; ++trial) {
    const std::string text = random_program(rng);
    const PulseProgram p = parse_program(text);
    const std::string canon = serialize_program(p);
    const PulseProgram q = parse_program(canon);
    EXPECT_EQ(serialize_program(q), canon) << text;
    EXPECT_EQ(q.units.size(), p.units.size());
    EXPECT_EQ(q.channels.size(), p.channels.size());
    EXPECT_EQ(q.span(), p.span());
  }
}

TEST(Validate, ReferenceDeviceWithStorageFixtureIsClean) {
  const ValidationReport r = validate_program(load_program(data_path("storage.pulse")), reference_device());
  for (const auto& f : r.findings) EXPECT_EQ(f.severity, Severity::pass) << f.check << ": " << f.message;
  EXPECT_TRUE(r.clean());
}

TEST(Validate, TransferFixtureIsClean) {
  const ValidationReport r = validate_program(load_program(data_path("transfer.pulse")), reference_device());
  for (const auto& f : r.findings) EXPECT_EQ(f.severity, Severity::pass) << f.check << ": " << f.message;
}

TEST(Validate, LargeGeometryCouplingWarns) {
  PulseProgram p = load_program(data_path("transfer.pulse"));
  p.resonator->g.reset();
  ResonatorGeometry g = load_geometry(data_path("reference.geometry"));
  g.loop_area_m2 *= area_scale_for_coupling(resonator_mode(g), 0.5);
  const ValidationReport r = validate_program(p, reference_device(), g);
  ASSERT_NE(r.find("lamb_dicke"), nullptr);
  EXPECT_EQ(r.find("lamb_dicke")->severity, Severity::warn);
  EXPECT_NEAR(r.find("lamb_dicke")->value, 0.5, 1e-12);
}

TEST(Validate, OffResonantCouplingWindowWarns) {
  // 2|Omega_2| = 300/7 ueV against hbar omega = 100 ueV: ratio 0.4.
  const double e_c2 = derive_energies(reference_device()).e_c2;
  const std::string ng = format_number(0.5 - 150.0 / 7.0 / e_c2);
  const PulseProgram p = parse_program("version 1\nunit a\nresonator n_max=4 hbar_omega_uev=100 g=0.1\n"
                                       "channel a_g unit=a kind=gate2\nseg a_g 0 50 const v=" +
                                       ng + "\n");
  const ValidationReport r = validate_program(p, reference_device());
  const Finding* f = r.find("rwa:a");
  ASSERT_NE(f, nullptr);
  EXPECT_EQ(f->severity, Severity::warn);
  EXPECT_NEAR(f->value, 0.4, 1e-6);
}

TEST(Validate, GapsGateRangeAndTruncation) {
  const PulseProgram p = parse_program(
      "version 1\nunit a\nunit b\nresonator n_max=1 hbar_omega_uev=100 g=0.1\n"
      "channel a_g unit=a kind=gate2\nseg a_g 0 1 const v=1.2\nseg a_g 2 3 const v=0.5\n");
  const ValidationReport r = validate_program(p, reference_device());
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(r.find("coverage:a_g")->severity, Severity::error);
  EXPECT_EQ(r.find("range:a_g")->severity, Severity::warn);
  EXPECT_EQ(r.find("truncation")->severity, Severity::warn);

  PulseProgram held = p;
  held.hold = true;
  EXPECT_EQ(validate_program(held, reference_device()).find("coverage"), nullptr);
}

TEST(Execute, StorageFixturesMatchClosedForm) {
  for (const char* name : {"storage.pulse", "storage_cosine.pulse"}) {
    const PulseProgram p = load_program(data_path(name));
    const ExecutionContext ctx{reference_device()};
    const Trajectory t = execute_program(p, ctx, register_state(p, {"+", "0"}));
    const Waveform& f3 = p.channels[0].waveform;
    const double xi = accumulated_phase(f3, p.span(), ctx.device.e_j3);
    EXPECT_NEAR(xi, kPi / 2, 1e-8) << name;
    EXPECT_LT(op_norm(t.propagator.matrix() - conjugated_swap(xi)), 1e-8) << name;
    EXPECT_LE(t.achieved_tol, 1e-8);
    EXPECT_LE(t.max_trace_drift, 1e-8);
    for (std::size_t i = 1; i < t.times.size(); ++i) EXPECT_GT(t.times[i], t.times[i - 1]);
  }
}

TEST(Execute, RefinementErrorDecreasesMonotonically) {
  // Nested grids: samples every 0.5 ps are breakpoints, so each dt_init
  // halves every step of the previous one.
  const PulseProgram p = load_program(data_path("storage.pulse"));
  const ExecutionContext ctx{reference_device()};
  const Matrix exact = conjugated_swap(accumulated_phase(p.channels[0].waveform, p.span(), ctx.device.e_j3));
  double prev = 1e300;
  for (double dt : {0.5, 0.25, 0.125, 0.0625, 0.03125}) {
    ExecuteOptions o;
    o.dt_init = dt;
    o.tol = 1e300;  // accept the first refinement
    const Trajectory t = execute_program(p, ctx, register_state(p, {"0", "0"}), o);
    const double err = op_norm(t.propagator.matrix() - exact);
    EXPECT_LT(err, prev) << "dt = " << dt;
    prev = err;
  }
}

TEST(Execute, ZeroDurationReturnsInitialState) {
  const PulseProgram p = parse_program("version 1\nunit u with_q1\nsample every=1 observables=trace,sz2:u\n");
  const QuantumState s0 = register_state(p, {"1", "+"});
  const Trajectory t = execute_program(p, {reference_device()}, s0);
  ASSERT_TRUE(t.final_state.has_value());
  EXPECT_LT(max_abs(t.final_state->density() - s0.density()), 1e-15);
  ASSERT_EQ(t.times.size(), 1u);
}

TEST(Execute, TransferFixtureMatchesResonatorBus) {
  const PulseProgram p = load_program(data_path("transfer.pulse"));
  const ExecutionContext ctx{reference_device()};
  const cplx alpha(0.6, 0.0), beta(0.0, 0.8);
  Vector psi(2);
  psi << beta, alpha;
  const QuantumState s0 = tensor_product(tensor_product(QuantumState::pure(psi), QuantumState::basis({2}, {0})),
                                         QuantumState::basis({9}, {0}));
  const Trajectory t = execute_program(p, ctx, s0);

  TransferPlan plan = TransferPlan::resonant(0.1 * ctx.device.e_j2);
  plan.t1 = 103.391692;
  plan.t2 = 206.783385 - 103.391692;
  const TransferResult ref = run_transfer(alpha, beta, plan, 100.0);

  const QuantumState target = partial_trace(*t.final_state, {1});
  Matrix fix = Matrix::Identity(2, 2);
  fix(1, 1) = std::exp(kI * transfer_correction_phase(100.0, plan.t1, plan.t2));
  const double fidelity = state_fidelity(QuantumState::pure(psi), target.transformed(fix));
  EXPECT_NEAR(fidelity, ref.fidelity_corrected, 1e-8);
  EXPECT_LE(t.max_trace_drift, 1e-8);
}

TEST(Execute, GapWithoutHoldIsRejected) {
  const PulseProgram p = parse_program(
      "version 1\nunit u\nchannel g unit=u kind=gate2\nseg g 0 1 const v=0.5\nseg g 2 3 const v=0.5\n");
  try {
    execute_program(p, {reference_device()}, register_state(p, {"0"}));
    FAIL() << "gap accepted";
  } catch (const ProgramError& e) {
    EXPECT_EQ(e.kind(), ProgramErrorKind::gap);
  }
}

TEST(Execute, DeterministicTrajectories) {
  const PulseProgram p = load_program(data_path("storage_cosine.pulse"));
  const ExecutionContext ctx{reference_device()};
  const Trajectory a = execute_program(p, ctx, register_state(p, {"+", "i"}));
  const Trajectory b = execute_program(p, ctx, register_state(p, {"+", "i"}));
  EXPECT_EQ(a.times, b.times);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.propagator.matrix(), b.propagator.matrix());
}

TEST(Execute, RejectsMismatchedInitialState) {
  const PulseProgram p = load_program(data_path("storage.pulse"));
  EXPECT_THROW(execute_program(p, {reference_device()}, QuantumState::basis({2}, {0})), std::invalid_argument);
}
