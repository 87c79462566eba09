#include <gtest/gtest.h>

#include "sponge/target.hpp"

using namespace sponge;

namespace {
Energy kwh(double v) { return Energy::from_kwh(v); }
}  // namespace

TEST(BuildWindows, FourWindowsOf250) {
  const auto w = build_windows(1000, 250, 1.0);
  ASSERT_EQ(w.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(w[k].index, k);
    EXPECT_EQ(w[k].start_tick, 250 * k);
    EXPECT_EQ(w[k].ticks(), 250);
    EXPECT_DOUBLE_EQ(w[k].duration_s(), 250.0);
  }
}

TEST(BuildWindows, HorizonEqualsWindow) {
  const auto w = build_windows(500, 500, 1.0);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].ticks(), 500);
}

TEST(BuildWindows, TruncatedLastWindow) {
  const auto w = build_windows(1000, 300, 1.0);
  ASSERT_EQ(w.size(), 4u);
  EXPECT_EQ(w[0].ticks(), 300);
  EXPECT_EQ(w[1].ticks(), 300);
  EXPECT_EQ(w[2].ticks(), 300);
  EXPECT_EQ(w[3].ticks(), 100);
}

TEST(BuildWindows, PartitionWithoutGaps) {
  for (Tick h : {1, 7, 999, 1000, 1001}) {
    for (Tick len : {1, 3, 250, 2000}) {
      const auto w = build_windows(h, len, 0.5);
      ASSERT_EQ(w.front().start_tick, 0);
      ASSERT_EQ(w.back().end_tick, h);
      for (std::size_t k = 1; k < w.size(); ++k) ASSERT_EQ(w[k].start_tick, w[k - 1].end_tick);
    }
  }
}

TEST(BuildWindows, ZeroLengthIsConfigError) {
  EXPECT_THROW(build_windows(1000, 0, 1.0), ConfigError);
  EXPECT_THROW(build_windows(0, 10, 1.0), ConfigError);
}

TEST(BuildTrajectory, UniformRateAndHalfwayTarget) {
  const auto t = build_trajectory(Window{0, 0, 250, 1.0}, kwh(10.0), Energy{});
  EXPECT_DOUBLE_EQ(t.rate_kw(), 144.0);
  EXPECT_EQ(t.cumulative_target(125), kwh(5.0));
}

TEST(BuildTrajectory, ZeroForecastIsZeroTrajectory) {
  const auto t = build_trajectory(Window{0, 0, 250, 1.0}, Energy{}, Energy{});
  EXPECT_EQ(t.rate_kw(), 0.0);
  for (Tick e = 0; e <= 250; e += 25) EXPECT_EQ(t.cumulative_target(e), Energy{});
}

TEST(BuildTrajectory, DeficitAddsToTotal) {
  const auto t = build_trajectory(Window{0, 0, 250, 1.0}, kwh(10.0), kwh(2.0));
  EXPECT_EQ(t.target_total, kwh(12.0));
}

TEST(BuildTrajectory, RejectsNegativeInputsAndEmptyWindow) {
  EXPECT_THROW(build_trajectory(Window{0, 0, 250, 1.0}, kwh(-1.0), Energy{}), DomainError);
  EXPECT_THROW(build_trajectory(Window{0, 0, 250, 1.0}, kwh(1.0), kwh(-1.0)), DomainError);
  EXPECT_THROW(build_trajectory(Window{0, 10, 10, 1.0}, kwh(1.0), Energy{}), ConfigError);
}

TEST(BuildTrajectory, CumulativeTargetStartsAtZeroEndsAtTotalAndNeverFalls) {
  for (double total : {0.0, 1e-6, 3.3333333, 417.25, 5000.0}) {
    for (Tick n : {1, 7, 250, 5000}) {
      const auto t = build_trajectory(Window{0, 0, n, 1.0}, kwh(total), Energy{});
      EXPECT_EQ(t.cumulative_target(0), Energy{});
      EXPECT_EQ(t.cumulative_target(n) - t.target_total, Energy{});
      Energy last;
      for (Tick e = 0; e <= n; ++e) {
        const auto c = t.cumulative_target(e);
        ASSERT_GE(c, last);
        last = c;
      }
    }
  }
}

TEST(BuildTrajectory, RateIntegratesToTotal) {
  const auto t = build_trajectory(Window{2, 500, 750, 1.0}, kwh(33.0), kwh(4.5));
  EXPECT_NEAR(t.rate_kw() * t.window.duration_s() / 3600.0, 37.5, 1e-12);
}

TEST(CarryOver, MetExactlyLeavesNothing) {
  const auto t = build_trajectory(Window{0, 0, 250, 1.0}, kwh(12.0), Energy{});
  EXPECT_EQ(carry_over(t, kwh(12.0)), (CarryOver{Energy{}, Energy{}}));
}

TEST(CarryOver, ShortfallBecomesDeficit) {
  const auto t = build_trajectory(Window{0, 0, 250, 1.0}, kwh(12.0), Energy{});
  EXPECT_EQ(carry_over(t, kwh(9.0)).deficit, kwh(3.0));
}

TEST(CarryOver, OvershootBecomesSurplus) {
  const auto t = build_trajectory(Window{0, 0, 250, 1.0}, kwh(10.0), Energy{});
  const auto c = carry_over(t, kwh(11.0));
  EXPECT_EQ(c.deficit, Energy{});
  EXPECT_EQ(c.surplus, kwh(1.0));
}

TEST(CarryOver, NegativeAchievedIsDomainError) {
  const auto t = build_trajectory(Window{0, 0, 250, 1.0}, kwh(10.0), Energy{});
  EXPECT_THROW(carry_over(t, kwh(-1.0)), DomainError);
}

TEST(WindowForecast, TruncatedWindowIsProRated) {
  const EnergyForecast f{{10.0, 20.0, 30.0, 40.0}};
  const auto w = build_windows(1000, 300, 1.0);
  EXPECT_EQ(window_forecast(f, w[0], 300), kwh(10.0));
  EXPECT_EQ(window_forecast(f, w[3], 300), kwh(40.0 / 3.0));
  EXPECT_THROW(window_forecast(EnergyForecast{{1.0}}, w[1], 300), ConfigError);
}
