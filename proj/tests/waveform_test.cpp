#include <gtest/gtest.h>

#include <cmath>

#include "squidstore/waveform.hpp"

using namespace squidstore;

namespace {

// Composite Simpson with n (even) panels, an independent check on the adaptive rule.
template <class F>
double composite_simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST(Segment, ShapesHitEndpointsAndMidpoint) {
  const Segment lin{0, 2, Shape::linear, 0.5, 0.0};
  const Segment rc{0, 2, Shape::raised_cosine, 0.5, 0.0};
  EXPECT_DOUBLE_EQ(lin.value(0), 0.5);
  EXPECT_DOUBLE_EQ(lin.value(2), 0.0);
  EXPECT_DOUBLE_EQ(lin.value(1), 0.25);
  EXPECT_DOUBLE_EQ(rc.value(0), 0.5);
  EXPECT_NEAR(rc.value(2), 0.0, 1e-16);
  EXPECT_NEAR(rc.value(1), 0.25, 1e-16);
  EXPECT_NEAR(rc.value(0.5), 0.5 - 0.5 * 0.5 * (1 - std::cos(kPi / 4)), 1e-15);
}

TEST(Waveform, ThenChainsContiguousSegments) {
  Waveform w;
  w.then(Shape::linear, 0.5, 0.0, 2.0).then(Shape::constant, 0.0, 0.0, 1.0).then(Shape::raised_cosine, 0.0, 0.5, 2.0);
  ASSERT_EQ(w.segments().size(), 3u);
  EXPECT_DOUBLE_EQ(w.end(), 5.0);
  EXPECT_FALSE(w.first_gap(0.0, 5.0).has_value());
  EXPECT_NO_THROW(w.check_ordering());
}

TEST(Waveform, GapsAndHold) {
  Waveform w({{0, 1, Shape::constant, 0.2, 0.2}, {2, 3, Shape::linear, 0.0, 1.0}});
  const auto gap = w.first_gap(0.0, 3.0);
  ASSERT_TRUE(gap.has_value());
  EXPECT_DOUBLE_EQ(gap->first, 1.0);
  EXPECT_DOUBLE_EQ(gap->second, 2.0);
  EXPECT_THROW(w.value(1.5), WaveformError);
  EXPECT_DOUBLE_EQ(w.value(1.5, true), 0.2);
  EXPECT_DOUBLE_EQ(w.value(4.0, true), 1.0);
  EXPECT_TRUE(w.constant_on(1.1, 1.9));
  EXPECT_FALSE(w.constant_on(2.0, 3.0));
  EXPECT_FALSE(w.constant_on(0.5, 1.5));
}

TEST(Waveform, OrderingErrors) {
  EXPECT_THROW(Waveform({{1, 1, Shape::constant, 0, 0}}).check_ordering(), WaveformError);
  EXPECT_THROW(Waveform({{0, 2, Shape::constant, 0, 0}, {1, 3, Shape::constant, 0, 0}}).check_ordering(),
               WaveformError);
}

TEST(Quadrature, AdaptiveSimpsonMatchesCompositeOracle) {
  const Waveform w = Waveform::ramp(Shape::raised_cosine, 0.5, 0.0, 0.0, 2.0);
  auto g = [](double f) { return std::cos(kPi * f); };
  const double adaptive = integrate_over(w, g, 0.0, 2.0);
  const double oracle = composite_simpson([&](double t) { return g(w.value(t)); }, 0.0, 2.0, 4096);
  EXPECT_NEAR(adaptive, oracle, 1e-12);
}

TEST(Quadrature, LinearRampHasClosedForm) {
  // int_0^T cos(pi (1/2 - t/(2T))) dt = 2T/pi.
  const double T = 2.0;
  const Waveform w = Waveform::ramp(Shape::linear, 0.5, 0.0, 0.0, T);
  EXPECT_NEAR(integrate_over(w, [](double f) { return std::cos(kPi * f); }, 0.0, T), 2.0 * T / kPi, 1e-13);
}

TEST(Quadrature, SplitsAtKinks) {
  Waveform w;
  w.then(Shape::linear, 0.0, 1.0, 1.0).then(Shape::linear, 1.0, 0.0, 1.0);
  EXPECT_NEAR(integrate_over(w, [](double f) { return f; }, 0.0, 2.0), 1.0, 1e-14);
}
