#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hybridevo/reservoir.hpp"

using namespace hybridevo;
using namespace hybridevo::reservoir;

namespace {

RealizationParams small_params() {
  RealizationParams r;
  r.pi = {1.0, 2.0};
  r.ii = {1.0};
  r.ooip_mobile = 1e6;
  r.ct_vp = 1e4;
  r.p_init = 200.0;
  r.watercut_exponent = 2.0;
  return r;
}

ControlSchedule random_schedule(RngStream& rng, const RealizationParams& r, const BhpLimits& lim = {}) {
  ControlSchedule c = ControlSchedule::constant(r.producers(), r.injectors(), 4, lim.prod_min, lim.inj_min);
  for (std::size_t w = 0; w < c.wells(); ++w)
    for (std::size_t k = 0; k < 4; ++k)
      c.bhp[w * 4 + k] = w < c.producers ? rng.uniform(lim.prod_min, lim.prod_max)
                                         : rng.uniform(lim.inj_min, lim.inj_max);
  return c;
}

}  // namespace

TEST(Simulate, TwentyAnnualIntervalsAnd244Steps) {
  const auto r = RealizationParams::defaults();
  std::size_t steps = 0;
  const auto s = simulate(ControlSchedule::constant(11, 7, 4, 170, 230), r, {}, {},
                          [&](const SimState&, double) { ++steps; });
  EXPECT_EQ(s.interval_count(), 20u);
  EXPECT_EQ(s.fluids, fluid::waterflood());
  EXPECT_EQ(steps, 244u);
}

TEST(Simulate, ClampedRatesGiveZerosAndConstantPressure) {
  const auto r = small_params();
  const BhpLimits lim{140, 250, 150, 260};
  // producers above and injectors below the reservoir pressure
  const auto c = ControlSchedule::constant(2, 1, 4, 210, 190);
  bool pressure_constant = true;
  const auto s = simulate(c, r, lim, {}, [&](const SimState& st, double) { pressure_constant &= st.p == 200.0; });
  EXPECT_TRUE(pressure_constant);
  for (const auto& row : s.volumes)
    for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(Simulate, FirstStepOilVolumeByHand) {
  const auto r = small_params();
  const auto c = ControlSchedule::constant(2, 1, 4, 0, 0);
  ControlSchedule cs = c;
  for (std::size_t k = 0; k < 4; ++k) {
    cs.bhp[0 * 4 + k] = 150;  // drawdown 50 at pi 1
    cs.bhp[1 * 4 + k] = 190;  // drawdown 10 at pi 2
    cs.bhp[2 * 4 + k] = 205;  // injection 5 at ii 1
  }
  int step = 0;
  SimState first;
  double first_wc = -1;
  simulate(cs, r, {}, {}, [&](const SimState& s, double wc) {
    if (step++ == 0) {
      first = s;
      first_wc = wc;
    }
  });
  EXPECT_EQ(first_wc, 0.0);
  EXPECT_DOUBLE_EQ(first.cum_oil, 30.0 * (1.0 * 50 + 2.0 * 10));
  EXPECT_DOUBLE_EQ(first.cum_wprod, 0.0);
  EXPECT_DOUBLE_EQ(first.cum_winj, 30.0 * 5);
  EXPECT_DOUBLE_EQ(first.p, 200.0 + 30.0 * (5.0 - 70.0) / 1e4);
  EXPECT_DOUBLE_EQ(first.t, 30.0);
}

TEST(Simulate, BalancedRatesKeepPressure) {
  auto r = small_params();
  r.pi = {1.0};
  ControlSchedule c = ControlSchedule::constant(1, 1, 4, 190, 210);
  bool constant = true;
  simulate(c, r, {}, {}, [&](const SimState& s, double) { constant &= s.p == r.p_init; });
  EXPECT_TRUE(constant);
}

TEST(Simulate, RejectsOutOfBoundsAndBadParams) {
  const auto r = small_params();
  EXPECT_THROW(simulate(ControlSchedule::constant(2, 1, 4, 100, 230), r), std::invalid_argument);
  EXPECT_THROW(simulate(ControlSchedule::constant(2, 1, 4, 170, 300), r), std::invalid_argument);
  auto bad = r;
  bad.ct_vp = 0;
  EXPECT_THROW(simulate(ControlSchedule::constant(2, 1, 4, 170, 230), bad), std::invalid_argument);
  bad = r;
  bad.pi[1] = -1;
  EXPECT_THROW(simulate(ControlSchedule::constant(2, 1, 4, 170, 230), bad), std::invalid_argument);
  EXPECT_THROW(simulate(ControlSchedule::constant(3, 1, 4, 170, 230), r), std::invalid_argument);
}

TEST(Simulate, PropertiesOnRandomSchedules) {
  RngStream rng(21);
  for (int k = 0; k < 50; ++k) {
    auto r = RealizationParams::defaults();
    if (k % 2) r = generate_realizations(k, 1, r, 0.5).front();
    r.ooip_mobile *= (k % 5 == 0) ? 0.05 : 1.0;  // exercise the depletion cap
    const auto c = random_schedule(rng, r);
    SimState prev;
    prev.p = r.p_init;
    bool ok = true;
    const auto s = simulate(c, r, {}, {}, [&](const SimState& st, double wc) {
      ok &= wc >= 0.0 && wc <= 1.0;
      ok &= st.cum_oil <= r.ooip_mobile;
      ok &= st.cum_oil >= prev.cum_oil && st.cum_wprod >= prev.cum_wprod && st.cum_winj >= prev.cum_winj;
      prev = st;
    });
    EXPECT_TRUE(ok) << "schedule " << k;
    // annual aggregation matches the cumulative state
    EXPECT_NEAR(s.cumulative(0), prev.cum_oil, 1e-9 * std::max(1.0, prev.cum_oil));
    EXPECT_NEAR(s.cumulative(1), prev.cum_wprod, 1e-9 * std::max(1.0, prev.cum_wprod));
    EXPECT_NEAR(s.cumulative(2), prev.cum_winj, 1e-9 * std::max(1.0, prev.cum_winj));
    // pure function
    EXPECT_EQ(simulate(c, r), s);
  }
}

TEST(Simulate, MoreDrawdownNeverReducesFirstYearLiquid) {
  RngStream rng(22);
  const auto r = RealizationParams::defaults();
  const BhpLimits lim;
  for (int k = 0; k < 50; ++k) {
    auto c = random_schedule(rng, r);
    auto lower = c;
    for (std::size_t w = 0; w < r.producers(); ++w)
      for (std::size_t p = 0; p < 4; ++p)
        lower.bhp[w * 4 + p] = std::max(lim.prod_min, c.bhp[w * 4 + p] - rng.uniform(0, 20));
    const auto a = simulate(c, r), b = simulate(lower, r);
    EXPECT_GE(b.volumes[0][0] + b.volumes[0][1], a.volumes[0][0] + a.volumes[0][1]);
  }
}

TEST(Simulate, MidBoundsRecoveryIsInCalibratedBand) {
  const auto r = RealizationParams::defaults();
  const auto s = simulate(ControlSchedule::constant(11, 7, 4, 167.5, 232.5), r);
  const double recovery = s.cumulative(0) / r.ooip_mobile;
  EXPECT_GT(recovery, 0.30);
  EXPECT_LT(recovery, 0.50);
}

TEST(Realizations, ZeroSpreadCopiesBase) {
  const auto base = RealizationParams::defaults();
  for (const auto& r : generate_realizations(3, 4, base, 0.0)) EXPECT_EQ(r, base);
}

TEST(Realizations, DeterministicAndSeedSensitive) {
  const auto base = RealizationParams::defaults();
  EXPECT_EQ(generate_realizations(1, 5, base, 0.2), generate_realizations(1, 5, base, 0.2));
  EXPECT_NE(generate_realizations(1, 5, base, 0.2), generate_realizations(2, 5, base, 0.2));
}

TEST(Realizations, FactorsWithinSpread) {
  const auto base = RealizationParams::defaults();
  for (const auto& r : generate_realizations(7, 20, base, 0.3)) {
    for (std::size_t k = 0; k < r.pi.size(); ++k) {
      EXPECT_GE(r.pi[k], base.pi[k] * 0.7);
      EXPECT_LE(r.pi[k], base.pi[k] * 1.3);
    }
    EXPECT_GE(r.watercut_exponent, base.watercut_exponent * 0.7);
    EXPECT_LE(r.watercut_exponent, base.watercut_exponent * 1.3);
  }
}

TEST(Realizations, RejectsBadArguments) {
  const auto base = RealizationParams::defaults();
  EXPECT_THROW(generate_realizations(1, 0, base, 0.1), std::invalid_argument);
  EXPECT_THROW(generate_realizations(1, 2, base, 1.0), std::invalid_argument);
  EXPECT_THROW(generate_realizations(1, 2, base, -0.1), std::invalid_argument);
}

TEST(Realizations, CsvRoundTrip) {
  const auto rs = generate_realizations(5, 6, RealizationParams::defaults(), 0.25);
  std::stringstream ss;
  write_realizations_csv(ss, rs);
  EXPECT_EQ(ss.str().substr(0, 48), "p_init,ooip_mobile,ct_vp,watercut_exponent,pi_1,");
  EXPECT_EQ(read_realizations_csv(ss), rs);
  std::istringstream bad("p_init,ooip_mobile,ct_vp,watercut_exponent,pi_1,ii_1\n1,2,3\n");
  EXPECT_ANY_THROW(read_realizations_csv(bad));
}

TEST(ProxyObjective, SeventyTwoControlsAndWellMajorBounds) {
  const auto obj = make_proxy_objective("p", ProxyMetric::kWcf, RealizationParams::defaults());
  ASSERT_EQ(obj.dimension(), 72u);
  EXPECT_EQ(obj.bounds().lower(0), 140.0);
  EXPECT_EQ(obj.bounds().upper(43), 195.0);  // producer 11, period 4
  EXPECT_EQ(obj.bounds().lower(44), 205.0);  // injector 1, period 1
  EXPECT_EQ(obj.bounds().upper(71), 260.0);
}

TEST(ProxyObjective, MatchesSimulatorMetrics) {
  const auto r = RealizationParams::defaults();
  const auto c = ControlSchedule::constant(11, 7, 4, 160, 240);
  const auto series = simulate(c, r);
  const auto w = make_proxy_objective("w", ProxyMetric::kWcf, r);
  const auto n = make_proxy_objective("n", ProxyMetric::kNpv, r);
  EXPECT_EQ(w(c.bhp), wcf(series.totals()));
  EXPECT_EQ(n(c.bhp), npv(series, EconParams::waterflood()));
}
