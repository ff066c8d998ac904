#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "rcm/walker.hpp"

using namespace rcm;

TEST(Walker, RejectsNonpositiveHorizon) {
  Rng rng(1);
  EXPECT_THROW(simulate_vsrw(constant_field(Lattice(1, 5)), 0, 0.0, rng), RangeError);
  EXPECT_THROW(simulate_srw(Lattice(1, 5), 0, -1.0, rng), RangeError);
}

TEST(Walker, UnitFieldJumpCountAndVariance) {
  const Lattice lat(2, 64);
  const auto f = constant_field(lat);
  const double t = 10.0;
  const int walks = 4000;
  std::vector<double> jumps, x2;
  for (int w = 0; w < walks; ++w) {
    Rng rng(derive_seed(5, {static_cast<std::uint64_t>(w)}));
    const auto tr = simulate_vsrw(f, 0, t, rng);
    jumps.push_back(static_cast<double>(tr.jumps_until(t)));
    const auto u = tr.displacement_at(t);
    x2.push_back(static_cast<double>(u[0]) * u[0]);
  }
  const auto mj = mean_se(jumps);
  const auto mx = mean_se(x2);
  EXPECT_NEAR(mj.mean, 2.0 * 2 * t, 4 * mj.se);
  EXPECT_NEAR(mx.mean, 2.0 * t, 4 * mx.se);
}

TEST(Walker, UnitFieldMatchesSimpleWalkPathwise) {
  for (int d = 1; d <= 3; ++d) {
    const Lattice lat(d, 9);
    const auto f = constant_field(lat);
    Rng a(77), b(77);
    const auto ta = simulate_vsrw(f, 3, 25.0, a);
    const auto tb = simulate_srw(lat, 3, 25.0, b);
    ASSERT_EQ(ta.events.size(), tb.events.size());
    for (std::size_t i = 0; i < ta.events.size(); ++i) {
      EXPECT_EQ(ta.events[i].time, tb.events[i].time);
      EXPECT_EQ(ta.events[i].site, tb.events[i].site);
    }
  }
}

TEST(Walker, SameSeedSameTrajectory) {
  const auto f = sample_field(ConductanceLaw::uniform(1, 4), Lattice(2, 10), 3);
  Rng a(5), b(5), c(6);
  const auto ta = simulate_vsrw(f, 0, 50.0, a);
  const auto tb = simulate_vsrw(f, 0, 50.0, b);
  const auto tc = simulate_vsrw(f, 0, 50.0, c);
  ASSERT_EQ(ta.events.size(), tb.events.size());
  for (std::size_t i = 0; i < ta.events.size(); ++i) EXPECT_EQ(ta.events[i].time, tb.events[i].time);
  EXPECT_NE(ta.events.front().time, tc.events.front().time);
}

TEST(Walker, FirstHoldingTimeIsExponentialInTotalRate) {
  const Lattice lat(1, 5);
  const auto f = make_field(lat, {1, 2, 3, 4, 5});
  const double rate = total_jump_rate(f, 2);  // 5
  std::vector<double> h;
  int right = 0;
  const int walks = 20000;
  for (int w = 0; w < walks; ++w) {
    Rng rng(derive_seed(9, {static_cast<std::uint64_t>(w)}));
    const auto tr = simulate_vsrw(f, 2, 100.0, rng);
    h.push_back(tr.events.front().time);
    right += tr.events.front().site == 3;
  }
  const auto m = mean_se(h);
  EXPECT_NEAR(m.mean, 1.0 / rate, 4 * m.se);
  const double pr = 3.0 / 5.0;
  EXPECT_NEAR(right / double(walks), pr, 4 * std::sqrt(pr * (1 - pr) / walks));
}

TEST(Walker, TransitionLawMatchesMatrixExponential) {
  const std::vector<double> c{1, 3, 1.5, 2, 1, 4};
  const Lattice lat(1, 6);
  const auto f = make_field(lat, c);
  const double t = 0.7;
  const auto p = oracle::expm(oracle::ring_generator(c), t);
  const int walks = 40000;
  std::vector<int> hits(6, 0);
  for (int w = 0; w < walks; ++w) {
    Rng rng(derive_seed(13, {static_cast<std::uint64_t>(w)}));
    hits[static_cast<std::size_t>(simulate_vsrw(f, 0, t, rng).position_at(t))]++;
  }
  for (int y = 0; y < 6; ++y) {
    const double q = p[0][y];
    EXPECT_NEAR(hits[y] / double(walks), q, 5 * std::sqrt(q * (1 - q) / walks) + 1e-4) << "y=" << y;
  }
  // Reversibility under the uniform measure: the kernel is symmetric.
  for (int x = 0; x < 6; ++x) {
    for (int y = 0; y < 6; ++y) EXPECT_NEAR(p[x][y], p[y][x], 1e-12);
  }
}

TEST(Walker, AdditiveFunctionalHandExample) {
  const Lattice lat(1, 5);
  const auto f = make_field(lat, {1, 2, 3, 4, 5});
  const auto drift = local_drift(ConductanceLaw::uniform(1, 5));
  // drift(x) = ω(x,x+1) − ω(x−1,x): at 0: 1−5, at 1: 2−1, at 2: 3−2.
  Trajectory tr{lat, 0, 3.0, {{0.5, 1, 0}, {1.25, 2, 0}}};
  EXPECT_NEAR(additive_functional(f, drift, tr, 3.0), 0.5 * -4 + 0.75 * 1 + 1.75 * 1, 1e-15);
  EXPECT_NEAR(additive_functional(f, drift, tr, 0.5), -2.0, 1e-15);
  EXPECT_EQ(additive_functional(f, drift, tr, 0.0), 0.0);
  EXPECT_THROW(additive_functional(f, drift, tr, 3.5), RangeError);
  const auto s = env_samples(f, drift, tr, {0.0, 1.0, 2.0});
  EXPECT_EQ(s, (std::vector<double>{-4.0, 1.0, 1.0}));
}

TEST(Walker, AdditiveFunctionalIsAdditive) {
  const auto f = sample_field(ConductanceLaw::uniform(1, 3), Lattice(2, 12), 2);
  const auto g = centered_edge(ConductanceLaw::uniform(1, 3));
  Rng rng(4);
  const auto tr = simulate_vsrw(f, 5, 20.0, rng);
  double direct = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double s = (i + 0.5) * 20.0 / 20000;
    direct += evaluate_at(g, f, tr.position_at(s)) * (20.0 / 20000);
  }
  EXPECT_NEAR(additive_functional(f, g, tr, 20.0), direct, 0.05);
  const double z = additive_functional(f, g, tr, 20.0);
  const double z1 = additive_functional(f, g, tr, 7.3);
  EXPECT_GT(std::abs(z - z1), 0.0);
}

TEST(Walker, ConstantFieldDriftVanishes) {
  const auto f = constant_field(Lattice(1, 9), 2.0);
  Rng rng(8);
  const auto tr = simulate_vsrw(f, 0, 10.0, rng);
  EXPECT_EQ(additive_functional(f, local_drift(ConductanceLaw::constant(2.0)), tr, 10.0), 0.0);
}

TEST(Walker, TrajectoryCsvHeader) {
  Rng rng(1);
  const auto tr = simulate_srw(Lattice(2, 5), 0, 1.0, rng);
  std::stringstream ss;
  write_trajectory_csv(ss, tr);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line.rfind("# rcm-csv v1", 0), 0u);
  std::getline(ss, line);
  EXPECT_NE(line.find("u1"), std::string::npos);
}

TEST(Walker, MsdOfUnitFieldIsTwoD) {
  for (int d = 1; d <= 2; ++d) {
    EnsembleConfig cfg;
    cfg.law = ConductanceLaw::constant(1.0);
    cfg.lattice = Lattice(d, 201);
    cfg.realizations = 200;
    cfg.walks_per_field = 10;
    cfg.horizon = 20.0;
    cfg.times = {5.0, 10.0, 20.0};
    cfg.seed = 3;
    cfg.workers = 4;
    for (const auto& p : msd_estimate(cfg)) EXPECT_NEAR(p.msd_over_t, 2.0 * d, 4 * p.se) << "d=" << d;
  }
}

TEST(Walker, MsdIsWorkerCountInvariant) {
  EnsembleConfig cfg;
  cfg.law = ConductanceLaw::two_point(0.5, 1, 4);
  cfg.lattice = Lattice(2, 32);
  cfg.realizations = 16;
  cfg.walks_per_field = 4;
  cfg.horizon = 5.0;
  cfg.times = {1.0, 5.0};
  cfg.seed = 12;
  cfg.workers = 1;
  const auto a = msd_estimate(cfg);
  cfg.workers = 5;
  const auto b = msd_estimate(cfg);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].msd_over_t, b[i].msd_over_t);
}

TEST(Walker, EnsembleConfigValidation) {
  EnsembleConfig cfg;
  cfg.times = {2.0, 1.0};
  cfg.horizon = 3.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg.times = {4.0};
  EXPECT_THROW(cfg.validate(), ParameterError);
}
