#pragma once

// Piecewise control schedules (flux or gate charge against time in ps).

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "squidstore/constants.hpp"
#include "squidstore/quantum.hpp"

namespace squidstore {

enum class Shape { constant, linear, raised_cosine };

inline const char* shape_name(Shape s) {
  switch (s) {
    case Shape::constant: return "const";
    case Shape::linear: return "linear";
    case Shape::raised_cosine: return "raised_cosine";
  }
  return "?";
}

struct Segment {
  double t0 = 0, t1 = 0;
  Shape shape = Shape::constant;
  double v0 = 0, v1 = 0;  // const segments use v0 only
  int line = 0;           // source line when parsed from a program, else 0

  double value(double t) const {
    if (shape == Shape::constant) return v0;
    const double s = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    if (shape == Shape::linear) return v0 + (v1 - v0) * s;
    return v0 + (v1 - v0) * 0.5 * (1.0 - std::cos(kPi * s));
  }
  double end_value() const { return shape == Shape::constant ? v0 : v1; }

  bool operator==(const Segment&) const = default;
};

class WaveformError : public Error {
 public:
  using Error::Error;
};

class Waveform {
 public:
  Waveform() = default;
  explicit Waveform(std::vector<Segment> segs) : segs_(std::move(segs)) { sort(); }

  static Waveform constant(double v, double t0, double t1) {
    return Waveform({{t0, t1, Shape::constant, v, v}});
  }
  static Waveform ramp(Shape shape, double v0, double v1, double t0, double t1) {
    return Waveform({{t0, t1, shape, v0, v1}});
  }

  Waveform& append(Segment s) {
    segs_.push_back(s);
    sort();
    return *this;
  }
  /// Appends a segment starting where the waveform currently ends.
  Waveform& then(Shape shape, double v0, double v1, double duration) {
    const double t0 = segs_.empty() ? 0.0 : segs_.back().t1;
    return append({t0, t0 + duration, shape, v0, shape == Shape::constant ? v0 : v1});
  }

  const std::vector<Segment>& segments() const { return segs_; }
  bool empty() const { return segs_.empty(); }
  double start() const { return segs_.empty() ? 0.0 : segs_.front().t0; }
  double end() const { return segs_.empty() ? 0.0 : segs_.back().t1; }

  /// Throws WaveformError for t1 <= t0 or overlapping segments.
  void check_ordering() const {
    for (std::size_t i = 0; i < segs_.size(); ++i) {
      if (!(segs_[i].t1 > segs_[i].t0))
        throw WaveformError("segment [" + std::to_string(segs_[i].t0) + ", " +
                            std::to_string(segs_[i].t1) + "] has t1 <= t0");
      if (i > 0 && segs_[i].t0 < segs_[i - 1].t1)
        throw WaveformError("segments overlap at t = " + std::to_string(segs_[i].t0));
    }
  }

  /// First uncovered interval inside [from, to], if any.
  std::optional<std::pair<double, double>> first_gap(double from, double to) const {
    double covered = from;
    for (const Segment& s : segs_) {
      if (s.t1 <= covered) continue;
      if (s.t0 > covered) return std::pair{covered, std::min(s.t0, to)};
      covered = s.t1;
      if (covered >= to) return std::nullopt;
    }
    if (covered < to) return std::pair{covered, to};
    return std::nullopt;
  }

  /// Value at t. Inside a gap, `hold` returns the previous segment's final
  /// value (or `fallback` before the first segment); otherwise it throws.
  double value(double t, bool hold = false, double fallback = 0.0) const {
    const Segment* prev = nullptr;
    for (const Segment& s : segs_) {
      if (t >= s.t0 && t <= s.t1) return s.value(t);
      if (s.t1 < t) prev = &s;
    }
    if (!hold) throw WaveformError("waveform undefined at t = " + std::to_string(t) + " ps");
    return prev ? prev->end_value() : fallback;
  }

  /// Whether the waveform is constant on [a, b] (a, b inside one segment or
  /// held gap).
  bool constant_on(double a, double b) const {
    for (const Segment& s : segs_) {
      if (b <= s.t0 || a >= s.t1) continue;
      if (a < s.t0 || b > s.t1) return false;
      return s.shape == Shape::constant || s.v0 == s.v1;
    }
    return true;
  }

  /// Segment boundaries in [from, to].
  std::vector<double> breakpoints(double from, double to) const {
    std::vector<double> out;
    for (const Segment& s : segs_)
      for (double t : {s.t0, s.t1})
        if (t > from && t < to) out.push_back(t);
    return out;
  }

  bool operator==(const Waveform&) const = default;

 private:
  void sort() {
    std::stable_sort(segs_.begin(), segs_.end(),
                     [](const Segment& a, const Segment& b) { return a.t0 < b.t0; });
  }

  std::vector<Segment> segs_;
};

namespace detail {

inline double simpson_recurse(const std::function<double(double)>& f, double a, double b,
                              double fa, double fm, double fb, double whole, double tol,
                              int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of a smooth integrand on [a, b].
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double abs_tol = 1e-12, int max_depth = 48) {
  if (b == a) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_recurse(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

/// Integral of g(w(t)) over [a, b], split at segment boundaries so every
/// piece is smooth.
inline double integrate_over(const Waveform& w, const std::function<double(double)>& g, double a,
                             double b, bool hold = false, double fallback = 0.0,
                             double abs_tol = 1e-12) {
  std::vector<double> cuts{a};
  for (double t : w.breakpoints(a, b)) cuts.push_back(t);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (hi <= lo) continue;
    // Evaluate strictly inside the piece so the owning segment is unambiguous.
    const double eps = 1e-12 * (hi - lo);
    auto f = [&](double t) {
      return g(w.value(std::clamp(t, lo + eps, hi - eps), hold, fallback));
    };
    total += adaptive_simpson(f, lo, hi, abs_tol * (hi - lo) / std::max(b - a, 1e-300));
  }
  return total;
}

}  // namespace squidstore
