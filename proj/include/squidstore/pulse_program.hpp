#pragma once

// Control-schedule language for storage units and the resonator bus.
//
//   version 1
//   hold                                   # optional: gaps keep the last value
//   unit <id> [with_q1]
//   resonator n_max=<int> hbar_omega_uev=<x> [g=<x>] [model=rwa|rabi]
//   channel <name> unit=<id> kind=flux1|flux2|flux3|gate1|gate2|couple
//   seg <channel> <t0_ps> <t1_ps> const v=<x>
//   seg <channel> <t0_ps> <t1_ps> linear v0=<x> v1=<x>
//   seg <channel> <t0_ps> <t1_ps> raised_cosine v0=<x> v1=<x>
//   sample every=<ps> observables=<name>[,<name>...]
//
// `#` starts a comment. Register order is unit declaration order, each unit
// contributing qubit 1 (if with_q1) then qubit 2, with the resonator last.
// Channels without segments sit at their defaults: fluxes 1/2, gate charges
// 1/2, coupling enable 1. The `couple` kind scales the unit's qubit-resonator
// coupling g E_J2.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "squidstore/circuit.hpp"
#include "squidstore/keyvalue.hpp"
#include "squidstore/propagation.hpp"
#include "squidstore/quantum.hpp"
#include "squidstore/resonator.hpp"
#include "squidstore/waveform.hpp"

namespace squidstore {

enum class ChannelKind { flux1, flux2, flux3, gate1, gate2, couple };

inline const char* kind_name(ChannelKind k) {
  switch (k) {
    case ChannelKind::flux1: return "flux1";
    case ChannelKind::flux2: return "flux2";
    case ChannelKind::flux3: return "flux3";
    case ChannelKind::gate1: return "gate1";
    case ChannelKind::gate2: return "gate2";
    case ChannelKind::couple: return "couple";
  }
  return "?";
}

inline double channel_default(ChannelKind k) { return k == ChannelKind::couple ? 1.0 : 0.5; }

enum class ProgramErrorKind {
  syntax,
  unknown_unit,
  unknown_channel,
  duplicate,
  overlap_segments,
  bad_interval,
  unknown_observable,
  gap,
};

class ProgramError : public Error {
 public:
  ProgramError(ProgramErrorKind kind, int line, const std::string& msg, int other_line = 0)
      : Error(format(line, other_line, msg)), kind_(kind), line_(line), other_line_(other_line) {}

  ProgramErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int other_line() const { return other_line_; }

 private:
  static std::string format(int line, int other, const std::string& msg) {
    std::string s = line > 0 ? "line " + std::to_string(line) : std::string("program");
    if (other > 0) s += " (conflicts with line " + std::to_string(other) + ")";
    return s + ": " + msg;
  }

  ProgramErrorKind kind_;
  int line_;
  int other_line_;
};

struct UnitDecl {
  std::string id;
  bool with_q1 = false;
  int line = 0;
};

struct ResonatorDecl {
  int n_max = 8;
  double hbar_omega = 0;  // ueV
  std::optional<double> g;
  std::optional<CouplingModel> model;
  int line = 0;
};

struct ChannelDecl {
  std::string name;
  std::string unit;
  ChannelKind kind = ChannelKind::gate2;
  Waveform waveform;
  int line = 0;
};

struct SampleSpec {
  double every = 0;  // ps
  std::vector<std::string> observables;
  int line = 0;
};

struct PulseProgram {
  bool hold = false;
  std::vector<UnitDecl> units;
  std::optional<ResonatorDecl> resonator;
  std::vector<ChannelDecl> channels;
  std::optional<SampleSpec> sample;

  /// Largest segment end over all channels.
  double span() const {
    double s = 0.0;
    for (const auto& c : channels) s = std::max(s, c.waveform.end());
    return s;
  }
  const UnitDecl* find_unit(const std::string& id) const {
    for (const auto& u : units)
      if (u.id == id) return &u;
    return nullptr;
  }
  const ChannelDecl* find_channel(const std::string& name) const {
    for (const auto& c : channels)
      if (c.name == name) return &c;
    return nullptr;
  }
  const ChannelDecl* channel_for(const std::string& unit, ChannelKind kind) const {
    for (const auto& c : channels)
      if (c.unit == unit && c.kind == kind) return &c;
    return nullptr;
  }
  /// Subsystem dimensions of the register.
  Dims register_dims() const {
    Dims d;
    for (const auto& u : units) {
      if (u.with_q1) d.push_back(2);
      d.push_back(2);
    }
    if (resonator) d.push_back(resonator->n_max + 1);
    return d;
  }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

class LineParser {
 public:
  LineParser(int line, std::vector<std::string> tokens) : line_(line), tok_(std::move(tokens)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ProgramError(ProgramErrorKind::syntax, line_, msg);
  }

  std::size_t size() const { return tok_.size(); }
  const std::string& at(std::size_t i) const {
    if (i >= tok_.size()) fail("unexpected end of line");
    return tok_[i];
  }

  double number(std::size_t i) const {
    double v = 0;
    if (!parse_double(at(i), v) || !std::isfinite(v)) fail("expected a number, got `" + at(i) + "`");
    return v;
  }

  /// key=value pairs from token `from` onward; each key at most once.
  std::map<std::string, std::string> options(std::size_t from,
                                             std::initializer_list<const char*> allowed) const {
    std::map<std::string, std::string> out;
    for (std::size_t i = from; i < tok_.size(); ++i) {
      const auto eq = tok_[i].find('=');
      if (eq == std::string::npos || eq == 0) fail("expected key=value, got `" + tok_[i] + "`");
      std::string key = tok_[i].substr(0, eq);
      if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
          allowed.end())
        fail("unexpected option `" + key + "`");
      if (out.contains(key)) fail("option `" + key + "` given twice");
      out.emplace(std::move(key), tok_[i].substr(eq + 1));
    }
    return out;
  }

  double option_number(const std::map<std::string, std::string>& opts, const char* key) const {
    const auto it = opts.find(key);
    if (it == opts.end()) fail(std::string("missing option `") + key + "`");
    double v = 0;
    if (!parse_double(it->second, v) || !std::isfinite(v))
      fail(std::string("option `") + key + "` is not a number");
    return v;
  }

  int option_int(const std::map<std::string, std::string>& opts, const char* key) const {
    const auto it = opts.find(key);
    if (it == opts.end()) fail(std::string("missing option `") + key + "`");
    int v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      fail(std::string("option `") + key + "` is not an integer");
    return v;
  }

  int line() const { return line_; }

 private:
  int line_;
  std::vector<std::string> tok_;
};

inline std::optional<ChannelKind> parse_kind(std::string_view s) {
  for (ChannelKind k : {ChannelKind::flux1, ChannelKind::flux2, ChannelKind::flux3,
                        ChannelKind::gate1, ChannelKind::gate2, ChannelKind::couple})
    if (s == kind_name(k)) return k;
  return std::nullopt;
}

/// Checks an observable name against the register.
inline bool observable_known(const PulseProgram& p, const std::string& name) {
  if (name == "trace" || name == "purity") return true;
  if (name == "nphoton") return p.resonator.has_value();
  const auto colon = name.find(':');
  if (colon == std::string::npos) return false;
  const std::string head = name.substr(0, colon);
  const UnitDecl* u = p.find_unit(name.substr(colon + 1));
  if (!u) return false;
  if (head == "pop2" || head == "sz2") return true;
  if (head == "pop1" || head == "sz1") return u->with_q1;
  return false;
}

}  // namespace detail

inline PulseProgram parse_program(std::string_view text) {
  PulseProgram prog;
  bool saw_version = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view body = raw;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    auto tokens = detail::split_ws(body);
    if (tokens.empty()) continue;
    const detail::LineParser lp(line_no, std::move(tokens));
    const std::string& kw = lp.at(0);

    if (!saw_version) {
      if (kw != "version") lp.fail("program must start with `version 1`");
      if (lp.size() != 2 || lp.at(1) != "1") lp.fail("unsupported version (expected `version 1`)");
      saw_version = true;
      continue;
    }

    if (kw == "version") {
      lp.fail("`version` given twice");
    } else if (kw == "hold") {
      if (lp.size() != 1) lp.fail("`hold` takes no arguments");
      prog.hold = true;
    } else if (kw == "unit") {
      if (lp.size() < 2 || lp.size() > 3) lp.fail("expected `unit <id> [with_q1]`");
      if (!detail::is_identifier(lp.at(1))) lp.fail("invalid unit id `" + lp.at(1) + "`");
      if (lp.size() == 3 && lp.at(2) != "with_q1") lp.fail("expected `with_q1`, got `" + lp.at(2) + "`");
      if (const UnitDecl* prev = prog.find_unit(lp.at(1)))
        throw ProgramError(ProgramErrorKind::duplicate, line_no, "unit `" + lp.at(1) + "` redeclared",
                           prev->line);
      prog.units.push_back({lp.at(1), lp.size() == 3, line_no});
    } else if (kw == "resonator") {
      if (prog.resonator)
        throw ProgramError(ProgramErrorKind::duplicate, line_no, "resonator declared twice",
                           prog.resonator->line);
      const auto o = lp.options(1, {"n_max", "hbar_omega_uev", "g", "model"});
      ResonatorDecl r;
      r.line = line_no;
      r.n_max = lp.option_int(o, "n_max");
      if (r.n_max < 1) lp.fail("n_max must be >= 1");
      r.hbar_omega = lp.option_number(o, "hbar_omega_uev");
      if (!(r.hbar_omega > 0)) lp.fail("hbar_omega_uev must be positive");
      if (o.contains("g")) {
        r.g = lp.option_number(o, "g");
        if (*r.g < 0) lp.fail("g must be >= 0");
      }
      if (const auto it = o.find("model"); it != o.end()) {
        if (it->second == "rwa")
          r.model = CouplingModel::rwa;
        else if (it->second == "rabi")
          r.model = CouplingModel::rabi;
        else
          lp.fail("model must be rwa or rabi");
      }
      prog.resonator = r;
    } else if (kw == "channel") {
      if (lp.size() != 4) lp.fail("expected `channel <name> unit=<id> kind=<kind>`");
      const std::string& name = lp.at(1);
      if (!detail::is_identifier(name)) lp.fail("invalid channel name `" + name + "`");
      if (const ChannelDecl* prev = prog.find_channel(name))
        throw ProgramError(ProgramErrorKind::duplicate, line_no,
                           "channel `" + name + "` redeclared", prev->line);
      const auto o = lp.options(2, {"unit", "kind"});
      if (!o.contains("unit") || !o.contains("kind")) lp.fail("channel needs unit= and kind=");
      const std::string& unit = o.at("unit");
      const UnitDecl* u = prog.find_unit(unit);
      if (!u) throw ProgramError(ProgramErrorKind::unknown_unit, line_no, "unknown unit `" + unit + "`");
      const auto kind = detail::parse_kind(o.at("kind"));
      if (!kind) lp.fail("unknown channel kind `" + o.at("kind") + "`");
      if (!u->with_q1 && (*kind == ChannelKind::flux1 || *kind == ChannelKind::flux3))
        lp.fail("unit `" + unit + "` has no qubit 1; declare it `with_q1` to use " +
                kind_name(*kind));
      if (const ChannelDecl* prev = prog.channel_for(unit, *kind))
        throw ProgramError(ProgramErrorKind::duplicate, line_no,
                           std::string("unit `") + unit + "` already has a " + kind_name(*kind) +
                               " channel",
                           prev->line);
      prog.channels.push_back({name, unit, *kind, Waveform{}, line_no});
    } else if (kw == "seg") {
      if (lp.size() < 5) lp.fail("expected `seg <channel> <t0> <t1> <shape> ...`");
      auto it = std::find_if(prog.channels.begin(), prog.channels.end(),
                             [&](const ChannelDecl& c) { return c.name == lp.at(1); });
      if (it == prog.channels.end())
        throw ProgramError(ProgramErrorKind::unknown_channel, line_no,
                           "unknown channel `" + lp.at(1) + "`");
      Segment s;
      s.line = line_no;
      s.t0 = lp.number(2);
      s.t1 = lp.number(3);
      if (s.t0 < 0) lp.fail("segment starts before t = 0");
      const std::string& shape = lp.at(4);
      if (shape == "const") {
        const auto o = lp.options(5, {"v"});
        s.shape = Shape::constant;
        s.v0 = s.v1 = lp.option_number(o, "v");
      } else if (shape == "linear" || shape == "raised_cosine") {
        const auto o = lp.options(5, {"v0", "v1"});
        s.shape = shape == "linear" ? Shape::linear : Shape::raised_cosine;
        s.v0 = lp.option_number(o, "v0");
        s.v1 = lp.option_number(o, "v1");
      } else {
        lp.fail("unknown segment shape `" + shape + "`");
      }
      if (!(s.t1 > s.t0))
        throw ProgramError(ProgramErrorKind::bad_interval, line_no, "segment has t1 <= t0");
      for (const Segment& other : it->waveform.segments())
        if (s.t0 < other.t1 && other.t0 < s.t1)
          throw ProgramError(ProgramErrorKind::overlap_segments, line_no,
                             "segment overlaps another segment on channel `" + it->name + "`",
                             other.line);
      it->waveform.append(s);
    } else if (kw == "sample") {
      if (prog.sample)
        throw ProgramError(ProgramErrorKind::duplicate, line_no, "sample given twice",
                           prog.sample->line);
      const auto o = lp.options(1, {"every", "observables"});
      SampleSpec spec;
      spec.line = line_no;
      spec.every = lp.option_number(o, "every");
      if (!(spec.every > 0)) lp.fail("sample interval must be positive");
      if (!o.contains("observables")) lp.fail("missing option `observables`");
      std::string_view list = o.at("observables");
      while (!list.empty()) {
        const auto comma = list.find(',');
        const std::string name(list.substr(0, comma));
        if (name.empty()) lp.fail("empty observable name");
        spec.observables.push_back(name);
        if (comma == std::string_view::npos) break;
        list.remove_prefix(comma + 1);
        if (list.empty()) lp.fail("trailing comma in observables");
      }
      prog.sample = spec;
    } else {
      lp.fail("unknown statement `" + kw + "`");
    }
  }
  if (!saw_version) throw ProgramError(ProgramErrorKind::syntax, 0, "empty program (missing `version 1`)");
  if (prog.sample)
    for (const auto& name : prog.sample->observables)
      if (!detail::observable_known(prog, name))
        throw ProgramError(ProgramErrorKind::unknown_observable, prog.sample->line,
                           "unknown observable `" + name + "`");
  return prog;
}

inline PulseProgram load_program(const std::string& path) {
  return parse_program(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Canonical serialization: units in declaration order, channels sorted by
// name, segments by channel then start time, numbers with 9 significant digits.

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string serialize_program(const PulseProgram& prog) {
  std::string out = "version 1\n";
  if (prog.hold) out += "hold\n";
  for (const auto& u : prog.units) out += "unit " + u.id + (u.with_q1 ? " with_q1\n" : "\n");
  if (prog.resonator) {
    const auto& r = *prog.resonator;
    out += "resonator n_max=" + std::to_string(r.n_max) + " hbar_omega_uev=" + format_number(r.hbar_omega);
    if (r.g) out += " g=" + format_number(*r.g);
    if (r.model) out += std::string(" model=") + (*r.model == CouplingModel::rwa ? "rwa" : "rabi");
    out += "\n";
  }
  std::vector<const ChannelDecl*> chans;
  for (const auto& c : prog.channels) chans.push_back(&c);
  std::sort(chans.begin(), chans.end(),
            [](const ChannelDecl* a, const ChannelDecl* b) { return a->name < b->name; });
  for (const auto* c : chans)
    out += "channel " + c->name + " unit=" + c->unit + " kind=" + kind_name(c->kind) + "\n";
  for (const auto* c : chans)
    for (const Segment& s : c->waveform.segments()) {
      out += "seg " + c->name + " " + format_number(s.t0) + " " + format_number(s.t1) + " " +
             shape_name(s.shape);
      if (s.shape == Shape::constant)
        out += " v=" + format_number(s.v0) + "\n";
      else
        out += " v0=" + format_number(s.v0) + " v1=" + format_number(s.v1) + "\n";
    }
  if (prog.sample) {
    out += "sample every=" + format_number(prog.sample->every) + " observables=";
    for (std::size_t i = 0; i < prog.sample->observables.size(); ++i)
      out += (i ? "," : "") + prog.sample->observables[i];
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation

enum class Severity { pass, warn, error };

inline const char* severity_name(Severity s) {
  switch (s) {
    case Severity::pass: return "pass";
    case Severity::warn: return "warn";
    case Severity::error: return "error";
  }
  return "?";
}

struct Finding {
  std::string check;
  Severity severity = Severity::pass;
  double value = 0;
  std::string message;
};

struct ValidationReport {
  std::vector<Finding> findings;

  bool ok() const {
    return std::none_of(findings.begin(), findings.end(),
                        [](const Finding& f) { return f.severity == Severity::error; });
  }
  bool clean() const {
    return std::all_of(findings.begin(), findings.end(),
                       [](const Finding& f) { return f.severity == Severity::pass; });
  }
  const Finding* find(std::string_view prefix) const {
    for (const auto& f : findings)
      if (f.check.starts_with(prefix) && f.severity != Severity::pass) return &f;
    return nullptr;
  }
};

struct ValidationThresholds {
  RegimeThresholds regime;
  double max_g = 0.3;           // Lamb-Dicke
  double max_rwa_ratio = 0.1;   // |2|Omega| - hbar w| / (2|Omega| + hbar w)
};

namespace detail {

inline double channel_value(const PulseProgram& p, const std::string& unit, ChannelKind k, double t) {
  const ChannelDecl* c = p.channel_for(unit, k);
  if (!c || c->waveform.empty()) return channel_default(k);
  return c->waveform.value(t, true, channel_default(k));
}

inline std::optional<double> coupling_g(const PulseProgram& p,
                                        const std::optional<ResonatorGeometry>& geom) {
  if (p.resonator && p.resonator->g) return p.resonator->g;
  if (geom) return resonator_mode(*geom).g;
  return std::nullopt;
}

}  // namespace detail

inline ValidationReport validate_program(const PulseProgram& prog, const DeviceParams& device,
                                         const std::optional<ResonatorGeometry>& geometry = std::nullopt,
                                         const ValidationThresholds& th = {}) {
  ValidationReport rep;
  const CircuitEnergies en = derive_energies(device);
  for (const auto& c : validate_charge_regime(device, en, th.regime).checks)
    rep.findings.push_back({c.name, c.pass ? Severity::pass : Severity::warn, c.value,
                            c.pass ? "" : "ratio outside the charge-qubit regime"});

  const double span = prog.span();
  for (const auto& c : prog.channels) {
    if (!prog.hold && !c.waveform.empty())
      if (const auto gap = c.waveform.first_gap(0.0, span))
        rep.findings.push_back({"coverage:" + c.name, Severity::error, gap->first,
                                "undefined on [" + format_number(gap->first) + ", " +
                                    format_number(gap->second) + "] ps (add segments or `hold`)"});
    if (c.kind == ChannelKind::gate1 || c.kind == ChannelKind::gate2 || c.kind == ChannelKind::couple)
      for (const Segment& s : c.waveform.segments())
        for (double v : {s.v0, s.v1})
          if (v < 0.0 || v > 1.0) {
            rep.findings.push_back({"range:" + c.name, Severity::warn, v,
                                    "value outside [0, 1] (line " + std::to_string(s.line) + ")"});
            break;
          }
  }

  if (prog.resonator) {
    const auto& r = *prog.resonator;
    const auto g = detail::coupling_g(prog, geometry);
    if (!g) {
      rep.findings.push_back({"coupling", Severity::error, 0,
                              "resonator has no coupling constant (set g= or pass a geometry)"});
    } else {
      const bool ok = *g < th.max_g;
      rep.findings.push_back({"lamb_dicke", ok ? Severity::pass : Severity::warn, *g,
                              ok ? "" : "g too large for the linearized flux coupling"});
    }
    const bool rabi = r.model && *r.model == CouplingModel::rabi;
    const bool trunc_ok = r.n_max >= static_cast<int>(prog.units.size()) + 1 && (!rabi || r.n_max >= 4);
    rep.findings.push_back({"truncation", trunc_ok ? Severity::pass : Severity::warn,
                            static_cast<double>(r.n_max),
                            trunc_ok ? "" : "n_max small for the number of excitations"});

    // RWA ratio in every window where a unit is coupled to the line.
    for (const auto& u : prog.units) {
      std::vector<double> cuts{0.0, span};
      for (ChannelKind k : {ChannelKind::gate1, ChannelKind::gate2, ChannelKind::couple})
        if (const ChannelDecl* c = prog.channel_for(u.id, k))
          for (double t : c->waveform.breakpoints(0.0, span)) cuts.push_back(t);
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        const double mid = 0.5 * (a + b);
        if (detail::channel_value(prog, u.id, ChannelKind::couple, mid) <= 0.0) continue;
        double worst = 0.0;
        for (double t : {a + 1e-9 * (b - a), mid, b - 1e-9 * (b - a)}) {
          const auto [o1, o2] =
              bias_splitting(en, detail::channel_value(prog, u.id, ChannelKind::gate1, t),
                             detail::channel_value(prog, u.id, ChannelKind::gate2, t));
          (void)o1;
          const double split = 2.0 * std::abs(o2);
          worst = std::max(worst, std::abs(split - r.hbar_omega) / (split + r.hbar_omega));
        }
        const bool ok = worst <= th.max_rwa_ratio;
        rep.findings.push_back({"rwa:" + u.id + "@" + format_number(a), ok ? Severity::pass : Severity::warn,
                                worst,
                                ok ? "" : "qubit coupled far from resonance on [" + format_number(a) +
                                              ", " + format_number(b) + "] ps"});
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Execution

struct ExecutionContext {
  ExecutionContext(DeviceParams d, std::optional<ResonatorGeometry> g = std::nullopt, bool e3 = false,
                   CouplingModel m = CouplingModel::rwa)
      : device(d), geometry(std::move(g)), include_e3(e3), model(m) {}

  DeviceParams device;
  std::optional<ResonatorGeometry> geometry;  // supplies g when the program does not
  bool include_e3 = false;
  CouplingModel model = CouplingModel::rwa;  // unless the program sets one
};

struct ExecuteOptions {
  double dt_init = 0.05;  // ps
  double tol = 1e-8;
  int max_halvings = 12;
  bool keep_states = false;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // values[sample][observable]
  std::vector<QuantumState> states;         // when keep_states
  Operator propagator = Operator::identity({1});  // start -> end of program
  std::optional<QuantumState> final_state;
  long steps = 0;
  int halvings = 0;
  double achieved_tol = 0;
  double max_trace_drift = 0;
};

namespace detail {

/// Precomputed operator pieces of the register Hamiltonian.
class RegisterModel {
 public:
  RegisterModel(const PulseProgram& prog, const ExecutionContext& ctx)
      : prog_(prog), dims_(prog.register_dims()), en_(derive_energies(ctx.device)),
        device_(ctx.device), include_e3_(ctx.include_e3) {
    using namespace pauli;
    int site = 0;
    for (const auto& u : prog.units) {
      UnitOps ops;
      ops.id = u.id;
      ops.with_q1 = u.with_q1;
      if (u.with_q1) {
        ops.q1 = site++;
        ops.sz1 = embed(sz(), ops.q1, dims_).matrix();
        ops.sx1 = embed(sx(), ops.q1, dims_).matrix();
      }
      ops.q2 = site++;
      ops.sz2 = embed(sz(), ops.q2, dims_).matrix();
      ops.sx2 = embed(sx(), ops.q2, dims_).matrix();
      if (u.with_q1) {
        ops.zz = ops.sz1 * ops.sz2;
        ops.xy = ops.sx1 * ops.sx2 - embed(sy(), ops.q1, dims_).matrix() * embed(sy(), ops.q2, dims_).matrix();
      }
      units_.push_back(std::move(ops));
    }
    if (prog.resonator) {
      res_site_ = site;
      hbar_omega_ = prog.resonator->hbar_omega;
      model_ = prog.resonator->model.value_or(ctx.model);
      const auto g = coupling_g(prog, ctx.geometry);
      if (!g) throw ProgramError(ProgramErrorKind::syntax, prog.resonator->line,
                                 "resonator has no coupling constant (set g= or pass a geometry)");
      lambda_ = *g * ctx.device.e_j2;
      const int n_max = prog.resonator->n_max;
      const Matrix a = embed(fock::annihilation(n_max), res_site_, dims_).matrix();
      number_ = embed(fock::number(n_max), res_site_, dims_).matrix();
      for (auto& ops : units_) {
        const Matrix raise = embed(charge_raise(), ops.q2, dims_).matrix();
        const Matrix lower = embed(charge_lower(), ops.q2, dims_).matrix();
        // Exchange terms for either sign of Omega_2 (see ladder_raise).
        ops.jc_neg = raise * a + (raise * a).adjoint();
        ops.jc_pos = lower * a + (lower * a).adjoint();
        ops.rabi = ops.sx2 * (a + a.adjoint());
      }
    }
  }

  const Dims& dims() const { return dims_; }
  int dim() const { return product(dims_); }
  std::optional<int> resonator_site() const {
    return prog_.resonator ? std::optional<int>(res_site_) : std::nullopt;
  }

  Operator hamiltonian(double t) const {
    const int n = dim();
    Matrix h = Matrix::Zero(n, n);
    for (const auto& u : units_) {
      auto value = [&](ChannelKind k) { return channel_value(prog_, u.id, k, t); };
      const auto [omega1, omega2] = bias_splitting(en_, value(ChannelKind::gate1), value(ChannelKind::gate2));
      h += omega2 * u.sz2;
      h -= effective_josephson(device_.e_j2, value(ChannelKind::flux2)) * u.sx2;
      if (u.with_q1) {
        h += omega1 * u.sz1;
        if (include_e3_) h += en_.e_3 * u.zz;
        h -= effective_josephson(device_.e_j1, value(ChannelKind::flux1)) * u.sx1;
        h -= effective_josephson(device_.e_j3, value(ChannelKind::flux3)) * u.xy;
      }
      if (prog_.resonator) {
        const double lambda = lambda_ * value(ChannelKind::couple);
        if (lambda != 0.0) {
          if (model_ == CouplingModel::rwa)
            h -= lambda * (omega2 >= 0.0 ? u.jc_pos : u.jc_neg);
          else
            h -= lambda * u.rabi;
        }
      }
    }
    if (prog_.resonator) {
      h += hbar_omega_ * number_;
      if (model_ == CouplingModel::rabi) h += 0.5 * hbar_omega_ * Matrix::Identity(n, n);
    }
    return {std::move(h), dims_};
  }

  double observable(const std::string& name, const QuantumState& s) const {
    if (name == "trace") return s.trace();
    if (name == "purity") return s.purity();
    if (name == "nphoton") return expectation(Operator(number_, dims_), s).real();
    const auto colon = name.find(':');
    const std::string head = name.substr(0, colon), id = name.substr(colon + 1);
    for (const auto& u : units_) {
      if (u.id != id) continue;
      const Matrix& z = (head == "pop1" || head == "sz1") ? u.sz1 : u.sz2;
      const double sz = expectation(Operator(z, dims_), s).real();
      if (head == "sz1" || head == "sz2") return sz;
      return 0.5 * (s.trace() - sz);  // population of |1>
    }
    throw std::invalid_argument("unknown observable `" + name + "`");
  }

 private:
  struct UnitOps {
    std::string id;
    bool with_q1 = false;
    int q1 = -1, q2 = -1;
    Matrix sz1, sx1, sz2, sx2, zz, xy;
    Matrix jc_pos, jc_neg, rabi;
  };

  const PulseProgram& prog_;
  Dims dims_;
  CircuitEnergies en_;
  DeviceParams device_;
  bool include_e3_;
  std::vector<UnitOps> units_;
  int res_site_ = -1;
  double hbar_omega_ = 0, lambda_ = 0;
  CouplingModel model_ = CouplingModel::rwa;
  Matrix number_;
};

}  // namespace detail

/// Product state from per-qubit labels (0, 1, +, -, i, -i) in register order;
/// the resonator, if any, starts in vacuum.
inline QuantumState register_state(const PulseProgram& prog, const std::vector<std::string>& labels) {
  const Dims dims = prog.register_dims();
  const int qubits = static_cast<int>(dims.size()) - (prog.resonator ? 1 : 0);
  if (static_cast<int>(labels.size()) != qubits)
    throw std::invalid_argument("register_state: expected " + std::to_string(qubits) + " labels");
  std::optional<QuantumState> s;
  const double r = 1.0 / std::sqrt(2.0);
  for (const auto& l : labels) {
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
      throw std::invalid_argument("register_state: unknown label `" + l + "`");
    const QuantumState q = QuantumState::pure(v);
    s = s ? tensor_product(*s, q) : q;
  }
  if (prog.resonator) {
    const QuantumState vac = QuantumState::basis({prog.resonator->n_max + 1}, {0});
    s = s ? tensor_product(*s, vac) : vac;
  }
  if (!s) throw std::invalid_argument("register_state: empty register");
  return *s;
}

inline Trajectory execute_program(const PulseProgram& prog, const ExecutionContext& ctx,
                                  const QuantumState& initial, const ExecuteOptions& opts = {}) {
  if (prog.units.empty()) throw ProgramError(ProgramErrorKind::syntax, 0, "program has no units");
  const detail::RegisterModel model(prog, ctx);
  if (initial.dims() != model.dims())
    throw std::invalid_argument("execute_program: initial state does not match the register");

  const double span = prog.span();
  if (!prog.hold)
    for (const auto& c : prog.channels)
      if (!c.waveform.empty())
        if (const auto gap = c.waveform.first_gap(0.0, span))
          throw ProgramError(ProgramErrorKind::gap, c.line,
                             "channel `" + c.name + "` undefined on [" + format_number(gap->first) +
                                 ", " + format_number(gap->second) + "] ps");

  // Sample grid, always including both ends.
  std::vector<double> samples{0.0};
  if (prog.sample && span > 0.0) {
    const double every = prog.sample->every;
    for (long k = 1;; ++k) {
      const double t = k * every;
      if (t >= span * (1.0 - 1e-12)) break;
      samples.push_back(t);
    }
  }
  if (span > 0.0) samples.push_back(span);

  std::vector<double> bp = samples;
  for (const auto& c : prog.channels)
    for (double t : c.waveform.breakpoints(0.0, span)) bp.push_back(t);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end(),
                       [&](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, span); }),
           bp.end());
  if (bp.size() == 1) bp.push_back(bp.front());

  auto h_at = [&](double t) { return model.hamiltonian(t); };
  auto constant_on = [&](double a, double b) {
    for (const auto& c : prog.channels)
      if (!c.waveform.constant_on(a, b)) return false;
    return true;
  };
  const Matrix rho0 = initial.is_pure() ? Matrix() : initial.density();
  auto distance = [&](const Matrix& ua, const Matrix& ub) {
    if (initial.is_pure()) return (ua * initial.amplitudes() - ub * initial.amplitudes()).norm();
    return (ua * rho0 * ua.adjoint() - ub * rho0 * ub.adjoint()).norm();
  };
  const PiecewiseResult prop = propagate_adaptive(
      h_at, constant_on, bp, model.dim(), {opts.dt_init, opts.tol, opts.max_halvings}, distance);

  Trajectory traj;
  traj.steps = prop.steps;
  traj.halvings = prop.halvings;
  traj.achieved_tol = prop.achieved_tol;
  traj.propagator = Operator(prop.at_breakpoints.back(), model.dims());
  if (prog.sample) traj.names = prog.sample->observables;
  for (double t : samples) {
    const auto it = std::min_element(bp.begin(), bp.end(), [&](double a, double b) {
      return std::abs(a - t) < std::abs(b - t);
    });
    const QuantumState s = initial.transformed(prop.at_breakpoints[it - bp.begin()]);
    traj.times.push_back(t);
    std::vector<double> row;
    for (const auto& name : traj.names) row.push_back(model.observable(name, s));
    traj.values.push_back(std::move(row));
    traj.max_trace_drift = std::max(traj.max_trace_drift, std::abs(s.trace() - 1.0));
    if (opts.keep_states) traj.states.push_back(s);
  }
  traj.final_state = initial.transformed(traj.propagator);
  return traj;
}

}  // namespace squidstore
