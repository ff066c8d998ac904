#include <gtest/gtest.h>

#include <cmath>

#include "rcm/experiments.hpp"

using namespace rcm;

namespace {

DecayCurve synthetic(double (*v)(double), double lo, double hi, int count) {
  DecayCurve c;
  for (int i = 0; i < count; ++i) {
    const double t = lo * std::pow(hi / lo, i / double(count - 1));
    c.samples.push_back({t, v(t), 0.0});
  }
  return c;
}

// E[S₁(𝕃f)·S₁(f)] for a two-point law by summing over all 2^10 edge
// configurations, written without the library's sample routine.
double enumerate_two_point(double p, double low, double high) {
  double total = 0.0;
  for (int mask = 0; mask < 1024; ++mask) {
    double w[10], prob = 1.0;
    for (int k = 0; k < 10; ++k) {
      const bool up = (mask >> k) & 1;
      w[k] = up ? high : low;
      prob *= up ? p : 1 - p;
    }
    // w[k] is the edge (k−4, k−3).
    auto edge = [&](int x) { return w[x + 4]; };
    auto f = [&](int x) { return edge(x - 1) + edge(x + 2) * edge(x + 2); };
    auto lf = [&](int x) { return edge(x) * (f(x + 1) - f(x)) + edge(x - 1) * (f(x - 1) - f(x)); };
    const double s = f(-1) + f(0) + f(1);
    const double sl = lf(-1) + lf(0) + lf(1);
    total += prob * s * sl;
  }
  return total;
}

}  // namespace

TEST(Fit, ExactPowerLaws) {
  const auto a = decay_fit(synthetic([](double t) { return std::pow(t, -2.0); }, 1, 1e3, 30), 1, 1e3);
  EXPECT_NEAR(a.alpha, 2.0, 1e-6);
  EXPECT_FALSE(a.flagged);
  EXPECT_NEAR(a.ci_lo, 2.0, 1e-6);
  EXPECT_NEAR(a.ci_hi, 2.0, 1e-6);
  const auto b = decay_fit(synthetic([](double t) { return 3 * std::pow(t, -0.5); }, 1, 1e3, 30), 1, 1e3);
  EXPECT_NEAR(b.alpha, 0.5, 1e-9);
  EXPECT_NEAR(b.intercept, std::log(3.0), 1e-9);
}

TEST(Fit, ExponentialIsFlagged) {
  const auto c = variance_curve(SpectralMeasure::single(1.0, 1.0), [] {
    std::vector<double> t;
    for (int i = 0; i < 20; ++i) t.push_back(0.1 + 0.5 * i);
    return t;
  }());
  EXPECT_TRUE(decay_fit(c, 0.1, 10).flagged);
}

TEST(Fit, Errors) {
  const auto c = synthetic([](double t) { return 1 / t; }, 1, 10, 4);
  EXPECT_THROW(decay_fit(c, 1, 10), FitError);
  auto z = synthetic([](double t) { return 1 / t; }, 1, 10, 10);
  z.samples[3].value = 0.0;
  EXPECT_THROW(decay_fit(z, 1, 10), FitError);
  EXPECT_NO_THROW(decay_fit(z, 2.5, 10));
}

TEST(Fit, SyntheticMeasureRecoversExponent) {
  for (double alpha : {0.5, 1.0, 2.0}) {
    std::vector<double> t;
    for (int i = 0; i <= 30; ++i) t.push_back(10 * std::pow(1e3, i / 30.0));
    const auto fit = decay_fit(variance_curve(power_law_measure(alpha), t), 10, 1e4);
    EXPECT_NEAR(fit.alpha, alpha, 0.1) << alpha;
  }
}

TEST(Contract, FormulaExamples) {
  const double p = 0.25, e = 0.1;
  double mu[5];
  for (int i = 1; i <= 4; ++i) mu[i] = p * (4 + e) / (4 + e - i);
  EXPECT_NEAR(contract_formula(mu[1], mu[2], mu[3], mu[4]), 2.62, 0.005);
  EXPECT_EQ(contract_formula(1, 1, 1, 1), 0.0);
  EXPECT_EQ(contract_formula(2, 4, 8, 16), 0.0);
}

TEST(Contract, SampleMatchesEnumerationAndFormula) {
  for (auto [p, lo, hi] : {std::tuple{0.5, 1.0, 4.0}, std::tuple{0.1, 0.0, 3.0}, std::tuple{0.7, 0.5, 2.0}}) {
    const double exact = enumerate_two_point(p, lo, hi);
    double m[5];
    for (int i = 1; i <= 4; ++i) m[i] = (1 - p) * std::pow(lo, i) + p * std::pow(hi, i);
    EXPECT_NEAR(contract_formula(m[1], m[2], m[3], m[4]), exact, 1e-9 * (1 + std::abs(exact)));
    // Library sample averaged over the same enumeration.
    double viaSample = 0.0;
    for (int mask = 0; mask < 1024; ++mask) {
      double w[10], prob = 1.0;
      for (int k = 0; k < 10; ++k) {
        const bool up = (mask >> k) & 1;
        w[k] = up ? hi : lo;
        prob *= up ? p : 1 - p;
      }
      viaSample += prob * contract_sample(w);
    }
    EXPECT_NEAR(viaSample, exact, 1e-9 * (1 + std::abs(exact)));
  }
}

TEST(Contract, ExperimentOnLightCap) {
  ContractOptions o;
  o.cap = 20.0;
  o.realizations = 400000;
  o.workers = 4;
  o.analogue_realizations = 4;
  const auto r = contractivity_experiment(o);
  EXPECT_TRUE(r.agree) << r.mc << " vs " << r.formula << " se " << r.mc_se;
  EXPECT_TRUE(r.analogue_nonincreasing);
  EXPECT_LT(r.mc_se, 0.2 * std::abs(r.formula) + 0.05);
}

TEST(Contract, PointMassGivesZero) {
  ContractOptions o;
  o.p = 0.0;
  o.realizations = 1000;
  o.analogue_realizations = 2;
  const auto r = contractivity_experiment(o);
  EXPECT_NEAR(r.formula, 0.0, 1e-15);
  EXPECT_NEAR(r.mc, 0.0, 1e-12);
  EXPECT_FALSE(r.positive);
  EXPECT_TRUE(r.inconclusive);
}

TEST(Decay, EdgeFunctionalInOneDimension) {
  DecayOptions o;
  o.law = ConductanceLaw::uniform(1, 3);
  o.d = 1;
  o.n = 1024;
  o.functional = "edge";
  o.kind = OperatorKind::Simple;
  for (int i = 0; i <= 20; ++i) o.times.push_back(10 * std::pow(100.0, i / 20.0));
  o.realizations = 32;
  o.target_alpha = 0.5;
  o.workers = 4;
  const auto r = variance_decay_experiment(o);
  ASSERT_TRUE(r.curve.fit.has_value());
  EXPECT_NEAR(r.curve.fit->alpha, 0.5, 0.15);
  EXPECT_TRUE(r.report.passed());
}

TEST(Decay, MonteCarloAgreesWithExact) {
  DecayOptions o;
  o.law = ConductanceLaw::two_point(0.5, 1, 4);
  o.d = 1;
  o.n = 12;
  o.functional = "drift";
  o.kind = OperatorKind::Conductance;
  o.times = {0.0, 0.25, 0.5, 1.0, 2.0};
  o.realizations = 8;
  o.workers = 4;
  const auto exact = variance_decay_experiment(o);
  o.path = DecayPath::MonteCarlo;
  o.walks_per_field = 20000;
  const auto mc = variance_decay_experiment(o);
  for (std::size_t i = 0; i < o.times.size(); ++i) {
    const auto& a = exact.curve.samples[i];
    const auto& b = mc.curve.samples[i];
    // Same fields on both paths, so the walk noise is what separates them.
    EXPECT_NEAR(a.value, b.value, 0.05 * a.value + 0.02) << "t=" << a.t;
  }
}

TEST(Decay, ZeroFunctionalAndErrors) {
  DecayOptions o;
  o.functional = "zero";
  o.times = {1, 2, 3, 4, 5, 6};
  o.n = 16;
  o.realizations = 2;
  const auto r = variance_decay_experiment(o);
  EXPECT_TRUE(r.zero_functional);
  EXPECT_FALSE(r.report.notes.empty());
  o.functional = "contract-example";
  o.center = false;
  EXPECT_THROW(variance_decay_experiment(o), ConfigError);
  o.functional = "edge";
  o.center = true;
  o.times = {2, 1};
  EXPECT_THROW(variance_decay_experiment(o), ConfigError);
}

TEST(Diffusivity, ConstantFieldIsFlat) {
  DiffusivityOptions o;
  o.law = ConductanceLaw::constant(1.0);
  o.d = 2;
  o.n = 6;
  o.mu = {1.0, 0.1, 0.01};
  o.realizations = 2;
  const auto r = diffusivity_experiment(o);
  EXPECT_TRUE(r.report.passed());
  for (const auto& row : r.rows) EXPECT_NEAR(row.a2, 1.0, 1e-12);
  EXPECT_NEAR(r.sigma_bar2, 2.0, 1e-12);
}

TEST(Diffusivity, ChainAndOrderingOnSmallTorus) {
  DiffusivityOptions o;
  o.law = ConductanceLaw::two_point(0.5, 1, 4);
  o.d = 2;
  o.n = 8;
  o.mu = default_mu_list();
  o.realizations = 4;
  o.workers = 4;
  const auto r = diffusivity_experiment(o);
  for (const auto& row : r.rows) {
    EXPECT_LT(row.chain, 1e-8);
    EXPECT_TRUE(row.ordered);
  }
  EXPECT_GT(r.sigma_bar2, 2 * 1.6);  // twice the harmonic and arithmetic means bracket it
  EXPECT_LT(r.sigma_bar2, 5.0);
  EXPECT_THROW(diffusivity_experiment([&] {
                 auto b = o;
                 b.mu = {0.1, 1.0};
                 return b;
               }()),
               ConfigError);
}

TEST(Diffusivity, DefaultMuList) {
  const auto mu = default_mu_list();
  EXPECT_EQ(mu.front(), 1.0);
  EXPECT_EQ(mu.back(), 0.001);
  for (std::size_t i = 1; i < mu.size(); ++i) EXPECT_LT(mu[i], mu[i - 1]);
  int in_window = 0;
  for (double m : mu) in_window += m >= 0.25 && m <= 1.0;
  EXPECT_GE(in_window, 5);
}

TEST(Msd, ConstantLawMatchesTwoD) {
  MsdOptions o;
  o.d = 2;
  o.n = 64;
  o.times = {1, 2, 4, 8};
  o.realizations = 50;
  o.walks_per_field = 20;
  o.workers = 4;
  const auto r = msd_experiment(o);
  EXPECT_TRUE(r.report.passed());
  o.law = ConductanceLaw::bounded_pareto(0.25, 0.1, std::numeric_limits<double>::infinity());
  EXPECT_THROW(msd_experiment(o), ConfigError);
}

TEST(Nash, InequalityHoldsForAllFunctionals) {
  for (const char* fn : {"drift", "edge", "contract-example"}) {
    for (int d = 1; d <= 2; ++d) {
      NashOptions o;
      o.d = d;
      o.functional = fn;
      o.boxes = {1, 2, 3};
      o.realizations = 4;
      const auto r = nash_chain_check(o);
      EXPECT_TRUE(r.report.passed()) << fn << " d=" << d;
      EXPECT_EQ(r.rows.size(), 3u);
    }
  }
  NashOptions bad;
  bad.boxes = {4};
  bad.period = 7;
  EXPECT_THROW(nash_chain_check(bad), ConfigError);
}

TEST(Tcl, SmallRun) {
  TclOptions o;
  o.alphas = {1.5, 2.5};
  o.offsets = {-0.5, 0.5};
  o.torus_measures = 2;
  o.workers = 4;
  const auto r = tcl_equivalence_experiment(o);
  EXPECT_EQ(r.verdicts.size(), 5u);  // beta = 1 is skipped
  EXPECT_TRUE(r.report.passed());
}
