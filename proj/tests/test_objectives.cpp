#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hybridevo/objectives.hpp"

using namespace hybridevo;

namespace {

void expect_rel(double got, double want, double tol = 1e-9) {
  EXPECT_LE(std::abs(got - want), tol * std::max(1.0, std::abs(want))) << "got " << got << " want " << want;
}

FluidSeries one_fluid(std::vector<double> q) {
  FluidSeries s;
  s.fluids = {"oil_produced"};
  for (double v : q) s.volumes.push_back({v});
  return s;
}

EconParams one_fluid_econ(double c, double d) { return {{"oil_produced"}, {c}, {d}}; }

FluidSeries random_series(RngStream& r) {
  FluidSeries s;
  s.fluids = fluid::waterflood();
  const auto n = 1 + r.index(30);
  for (std::size_t t = 0; t < n; ++t)
    s.volumes.push_back({r.uniform(0, 1e7), r.uniform(0, 1e7), r.uniform(0, 1e7)});
  return s;
}

}  // namespace

TEST(Rastrigin, Oracles) {
  EXPECT_EQ(rastrigin_cost(std::vector<double>{0, 0}), 0.0);
  expect_rel(rastrigin_cost(std::vector<double>{1, 1}), 2.0, 1e-12);
  expect_rel(rastrigin_cost(std::vector<double>{0.5}), 20.25, 1e-12);
  EXPECT_THROW(rastrigin_cost(std::vector<double>{}), std::invalid_argument);
}

TEST(Rastrigin, NonnegativeAndZeroOnlyAtOrigin) {
  RngStream r(4);
  for (int k = 0; k < 10000; ++k) {
    std::vector<double> x(1 + r.index(10));
    for (double& v : x) v = r.uniform(-5.12, 5.12);
    const double f = rastrigin_cost(x);
    EXPECT_GT(f, 0.0);
  }
}

TEST(Rastrigin, ObjectiveIsNegatedCost) {
  const auto obj = make_rastrigin(3);
  EXPECT_EQ(obj.dimension(), 3u);
  EXPECT_EQ(obj.bounds().lower(0), -5.12);
  EXPECT_EQ(obj.bounds().upper(2), 5.12);
  const std::vector<double> x{1, 0.5, 0};
  EXPECT_EQ(obj(x), -rastrigin_cost(x));
  EXPECT_THROW(obj(std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(Wcf, Oracles) {
  EXPECT_EQ(wcf({0, 0, 0}), 0.0);
  expect_rel(wcf({1000, 200, 300}), 950.0);
  expect_rel(wcf({100, 1000, 1000}), -100.0);
  EXPECT_THROW(wcf({-1, 0, 0}), std::invalid_argument);
}

TEST(Npv, OneIntervalUndiscounted) { expect_rel(npv(one_fluid({100}), one_fluid_econ(40, 0.08)), 4000.0); }

TEST(Npv, TwoIntervals) {
  expect_rel(npv(one_fluid({100, 100}), one_fluid_econ(40, 0.08)), 4000.0 + 4000.0 / 1.08);
  expect_rel(npv(one_fluid({100, 100}), one_fluid_econ(40, 0.08)), 7703.7037037037, 1e-12);
}

TEST(Npv, ZeroPricesGiveZero) {
  RngStream r(2);
  auto s = random_series(r);
  EconParams e = EconParams::waterflood(0, 0, 0, 0.08);
  EXPECT_EQ(npv(s, e), 0.0);
}

TEST(Npv, CostFluidsContributeNegatively) {
  FluidSeries s{fluid::waterflood(), {{100, 100, 0}}};
  expect_rel(npv(s, EconParams::waterflood()), 3600.0);
}

TEST(Npv, MismatchedFluidsThrow) {
  FluidSeries s{fluid::waterflood(), {{1, 1, 1}}};
  EXPECT_THROW(npv(s, one_fluid_econ(40, 0)), std::invalid_argument);
  EconParams bad = EconParams::waterflood();
  bad.discount[1] = -0.1;
  EXPECT_THROW(npv(s, bad), std::invalid_argument);
}

TEST(Npv, UndiscountedEqualsIndependentSum) {
  RngStream r(8);
  for (int k = 0; k < 100; ++k) {
    const auto s = random_series(r);
    const EconParams e = EconParams::waterflood(r.uniform(0, 100), -r.uniform(0, 10), -r.uniform(0, 10), 0.0);
    double want = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
      double q = 0.0;
      for (const auto& row : s.volumes) q += row[f];
      want += e.price[f] * q;
    }
    expect_rel(npv(s, e), want);
  }
}

TEST(Npv, WcfCrossCheckIdentity) {
  RngStream r(9);
  const EconParams e{fluid::waterflood(), {1.0, -0.1, -0.1}, {0.0, 0.0, 0.0}};
  for (int k = 0; k < 100; ++k) {
    const auto s = random_series(r);
    expect_rel(npv(s, e), wcf(s.totals()));
  }
}

TEST(Npv, LinearInEachPrice) {
  RngStream r(10);
  const auto s = random_series(r);
  const EconParams base = EconParams::waterflood();
  for (std::size_t f = 0; f < 3; ++f) {
    EconParams only = base, scaled = base;
    for (std::size_t g = 0; g < 3; ++g)
      if (g != f) only.price[g] = scaled.price[g] = 0.0;
    scaled.price[f] *= 3.5;
    expect_rel(npv(s, scaled), 3.5 * npv(s, only));
  }
}

TEST(Ensemble, MeanOracles) {
  const Bounds b = Bounds::uniform(1, 0, 1);
  const Objective ten("a", b, [](std::span<const double>) { return 10.0; });
  const Objective twenty("b", b, [](std::span<const double>) { return 20.0; });
  const std::vector<double> x{0.5};
  EXPECT_EQ(ensemble_mean(std::vector<Objective>{ten, twenty}, x), 15.0);
  EXPECT_EQ(ensemble_mean(std::vector<Objective>{ten}, x), ten(x));
  EXPECT_EQ(ensemble_mean(std::vector<Objective>{ten, ten, ten}, x), 10.0);
  EXPECT_THROW(ensemble_mean(std::vector<Objective>{}, x), std::invalid_argument);
}

TEST(Ensemble, PermutationInvariantAndCountsSimulations) {
  const Bounds b = Bounds::uniform(2, -1, 1);
  std::vector<Objective> members;
  for (int k = 1; k <= 5; ++k)
    members.emplace_back("m" + std::to_string(k), b,
                         [k](std::span<const double> x) { return k * x[0] - x[1] * x[1] / k; });
  const auto e = make_ensemble("e", members);
  EXPECT_EQ(e.simulations_per_call(), 5u);
  std::vector<Objective> reversed(members.rbegin(), members.rend());
  const std::vector<double> x{0.3, -0.7};
  EXPECT_NEAR(e(x), ensemble_mean(reversed, x), 1e-15);
  double want = 0.0;
  for (const auto& m : members) want += m(x);
  EXPECT_NEAR(e(x), want / 5.0, 1e-15);
}

TEST(Ensemble, RejectsDisagreeingBounds) {
  const Objective a("a", Bounds::uniform(1, 0, 1), [](std::span<const double>) { return 0.0; });
  const Objective c("c", Bounds::uniform(1, 0, 2), [](std::span<const double>) { return 0.0; });
  EXPECT_THROW(make_ensemble("e", {a, c}), std::invalid_argument);
}

TEST(Objective, NonFiniteValueIsAHardError) {
  const Objective bad("bad", Bounds::uniform(1, 0, 1), [](std::span<const double>) { return std::nan(""); });
  EXPECT_THROW(bad(std::vector<double>{0.5}), NonFiniteValue);
}
