#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "rcm/field.hpp"
#include "rcm/parallel.hpp"
#include "rcm/percolation.hpp"

using namespace rcm;

TEST(Lattice, RejectsPeriodTwo) {
  EXPECT_THROW(Lattice(2, 2), ParameterError);
  EXPECT_THROW(Lattice(0, 5), ParameterError);
  EXPECT_NO_THROW(Lattice(3, 3));
}

TEST(Lattice, SiteAndEdgeIndexingAreBijections) {
  for (int d = 1; d <= 3; ++d) {
    const Lattice lat(d, 4);
    std::set<EdgeIndex> edges;
    for (Site x = 0; x < lat.sites(); ++x) {
      EXPECT_EQ(lat.site(lat.coords(x)), x);
      std::set<Site> nbrs;
      for (int k = 0; k < lat.degree(); ++k) {
        const Site y = lat.neighbour(x, k);
        nbrs.insert(y);
        const EdgeIndex e = lat.incident_edge(x, k);
        EXPECT_EQ(lat.edge_between(x, y), e);
        EXPECT_EQ(lat.edge_between(y, x), e);
        edges.insert(e);
      }
      EXPECT_EQ(static_cast<int>(nbrs.size()), 2 * d);
    }
    EXPECT_EQ(static_cast<std::int64_t>(edges.size()), lat.edges());
    EXPECT_EQ(*edges.rbegin(), lat.edges() - 1);
  }
}

TEST(Law, ValidatesParameters) {
  EXPECT_THROW(ConductanceLaw::constant(0.5), ParameterError);
  EXPECT_THROW(ConductanceLaw::uniform(0.5, 2), ParameterError);
  EXPECT_THROW(ConductanceLaw::uniform(3, 2), ParameterError);
  EXPECT_THROW(ConductanceLaw::two_point(1.5, 1, 4), ParameterError);
  EXPECT_THROW(ConductanceLaw::two_point(0.5, 0.9, 4), ParameterError);
  EXPECT_THROW(ConductanceLaw::bounded_pareto(0.25, 0.0, 1e3), ParameterError);
  EXPECT_THROW(ConductanceLaw::bounded_pareto(0.25, 0.1, 1.0), ParameterError);
  EXPECT_THROW(ConductanceLaw::bounded_pareto(-0.1, 0.1, 1e3), ParameterError);
}

TEST(Law, ParseRoundTrip) {
  const auto l = ConductanceLaw::parse("twopoint:0.5,1,4");
  const auto* tp = std::get_if<law::TwoPoint>(&l.variant());
  ASSERT_NE(tp, nullptr);
  EXPECT_EQ(tp->p, 0.5);
  EXPECT_EQ(tp->low, 1.0);
  EXPECT_EQ(tp->high, 4.0);
  for (const char* s : {"constant:2", "uniform:1,3", "twopoint:0.25,1,7", "pareto:0.25,0.1,1000",
                        "pareto:0.25,0.1,1000,0.01"}) {
    EXPECT_EQ(ConductanceLaw::parse(ConductanceLaw::parse(s).descriptor()).descriptor(),
              ConductanceLaw::parse(s).descriptor());
  }
  EXPECT_THROW(ConductanceLaw::parse("gauss:1"), ParameterError);
  EXPECT_THROW(ConductanceLaw::parse("uniform:1"), ParameterError);
  EXPECT_THROW(ConductanceLaw::parse("uniform:1,x"), ParameterError);
}

// E[X^i] of the truncated Pareto part by Simpson quadrature in log x.
static double pareto_moment_quadrature(double s, double cap, double i) {
  const int n = 200000;
  const double h = std::log(cap) / n;
  double acc = 0.0, norm = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = std::exp(k * h);
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const double dens = s * std::pow(x, -s - 1.0) * x;  // dx = x d(log x)
    acc += w * dens * std::pow(x, i);
    norm += w * dens;
  }
  return acc / norm;
}

TEST(Law, ParetoMomentsMatchQuadrature) {
  const auto law = ConductanceLaw::bounded_pareto(0.25, 0.1, 1e3);
  const auto& bp = std::get<law::BoundedPareto>(law.variant());
  for (int i = 1; i <= 4; ++i) {
    const double q = pareto_moment_quadrature(4.1, 1e3, i);
    EXPECT_NEAR(bp.pareto_moment(i), q, 1e-8 * q) << "i=" << i;
    EXPECT_NEAR(law.moment(i), 0.75 + 0.25 * q, 1e-8 * q);
  }
  // Uncapped first moment p(4+ε)/(3+ε).
  const auto open = ConductanceLaw::bounded_pareto(0.25, 0.1, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(std::get<law::BoundedPareto>(open.variant()).pareto_moment(1) * 0.25, 0.25 * 4.1 / 3.1, 1e-14);
  EXPECT_NEAR(0.25 * 4.1 / 3.1, 0.3306, 1e-4);
  // A displaced atom is rescaled so the support starts at 1.
  const auto shifted = ConductanceLaw::bounded_pareto(0.25, 0.1, 1e3, 0.01);
  EXPECT_DOUBLE_EQ(shifted.support_min(), 1.0);
  EXPECT_NEAR(shifted.moment(2), 1e4 * std::get<law::BoundedPareto>(shifted.variant()).pre_moment(2), 1e-6);
}

TEST(Field, ConstantLawGivesConstantField) {
  const auto f = sample_field(ConductanceLaw::constant(1.0), Lattice(2, 8), 7);
  ASSERT_EQ(f.omega.size(), 128u);
  for (double w : f.omega) EXPECT_EQ(w, 1.0);
}

TEST(Field, SamplingIsDeterministicAndAtLeastOne) {
  const Lattice lat(3, 9);
  for (const char* s : {"uniform:1,3", "twopoint:0.3,1,5", "pareto:0.25,0.1,1000", "pareto:0.25,0.1,1000,0.01"}) {
    const auto law = ConductanceLaw::parse(s);
    const auto a = sample_field(law, lat, 11, 2);
    const auto b = sample_field(law, lat, 11, 2);
    const auto c = sample_field(law, lat, 11, 3);
    EXPECT_EQ(a.omega, b.omega);
    EXPECT_NE(a.omega, c.omega);
    for (double w : a.omega) EXPECT_GE(w, 1.0);
  }
}

TEST(Field, EmpiricalMeansMatchLaw) {
  const Lattice lat(1, 100000);
  {
    const auto f = sample_field(ConductanceLaw::two_point(0.5, 1, 4), lat, 3);
    std::vector<double> v(f.omega.begin(), f.omega.end());
    const auto ms = mean_se(v);
    EXPECT_NEAR(ms.mean, 2.5, 4 * ms.se);
  }
  {
    const auto law = ConductanceLaw::bounded_pareto(0.25, 0.1, 1e3);
    const auto f = sample_field(law, Lattice(1, 400000), 5);
    std::vector<double> v(f.omega.begin(), f.omega.end());
    const auto ms = mean_se(v);
    EXPECT_NEAR(ms.mean, law.mean(), 4 * ms.se);
    EXPECT_NEAR(law.mean(), 0.75 + 0.3306, 2e-3);
  }
}

TEST(Field, TranslateIsAGroupAction) {
  const Lattice lat(2, 5);
  const auto f = sample_field(ConductanceLaw::uniform(1, 2), lat, 1);
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const Site x = rng.below(lat.sites()), y = rng.below(lat.sites());
    const auto vx = translate(f, x);
    const auto vxy = vx.translate(lat.coords(y));
    const auto direct = translate(f, lat.translate(x, lat.coords(y)));
    for (Site z = 0; z < lat.sites(); ++z) {
      for (int k = 0; k < 4; ++k) EXPECT_EQ(vxy.at(lat.coords(z), k), direct.at(lat.coords(z), k));
    }
  }
  const auto id = translate(f, 0);
  for (Site z = 0; z < lat.sites(); ++z) EXPECT_EQ(id.at(lat.coords(z), 0), f.at(z, 0));
}

TEST(Field, TotalJumpRate) {
  const Lattice lat(1, 5);
  const auto f = make_field(lat, {1, 2, 3, 4, 5});
  EXPECT_EQ(total_jump_rate(f, 1), 3.0);
  EXPECT_EQ(total_jump_rate(f, 0), 6.0);
  EXPECT_EQ(total_jump_rate(constant_field(Lattice(2, 4)), 3), 4.0);
  const auto g = sample_field(ConductanceLaw::uniform(1, 3), Lattice(3, 5), 2);
  for (Site x = 0; x < g.lattice.sites(); ++x) EXPECT_GE(total_jump_rate(g, x), 6.0);
}

TEST(Field, SerializationRoundTrip) {
  const auto f = sample_field(ConductanceLaw::uniform(1, 3), Lattice(2, 5), 17, 4);
  std::stringstream ss;
  write_field(ss, f);
  const auto g = read_field(ss);
  EXPECT_EQ(g.omega, f.omega);
  EXPECT_EQ(g.law, f.law);
  EXPECT_EQ(g.seed, 17u);
  EXPECT_EQ(g.realization, 4u);
  std::stringstream csv;
  write_field_csv(csv, f);
  std::string first;
  std::getline(csv, first);
  EXPECT_EQ(first.rfind("# rcm-csv v1", 0), 0u);
}

TEST(Percolation, ConstantFieldClassification) {
  const auto f = constant_field(Lattice(2, 6));
  EXPECT_EQ(classify_sites(f, 4.0).bad_fraction, 0.0);
  EXPECT_EQ(classify_sites(f, 3.0).bad_fraction, 1.0);
}

TEST(Percolation, ClassificationIsMonotoneInEta) {
  const auto f = sample_field(ConductanceLaw::uniform(1, 3), Lattice(2, 10), 4);
  auto prev = classify_sites(f, 4.0);
  for (double eta = 4.5; eta <= 12.0; eta += 0.5) {
    const auto cur = classify_sites(f, eta);
    for (std::size_t i = 0; i < cur.good.size(); ++i) {
      if (prev.good[i]) {
        EXPECT_TRUE(cur.good[i]);
      }
    }
    prev = cur;
  }
}

TEST(Percolation, BadFractionMatchesBinomialOracle) {
  const double p = 0.3;
  const auto law = ConductanceLaw::two_point(p, 1, 4);
  const double eta = 7.0;  // bad iff at least two of the four incident edges are 4
  const double q = oracle::binomial_at_least(4, p, 2);
  EXPECT_NEAR(*bad_probability(law, 2, eta), q, 1e-14);
  const auto f = sample_field(law, Lattice(2, 300), 8);
  const double qh = classify_sites(f, eta).bad_fraction;
  // Neighbouring sites share an edge; 6 binomial SEs covers the correlation.
  EXPECT_NEAR(qh, q, 6.0 * std::sqrt(q * (1 - q) / 90000.0));
}

TEST(Percolation, DefaultEtaMeetsThreshold) {
  const auto tp = ConductanceLaw::two_point(0.01, 1, 4);
  for (int d = 1; d <= 3; ++d) {
    const double eta = *default_eta(tp, d);
    EXPECT_LT(*bad_probability(tp, d, eta), percolation_threshold_q(d));
  }
  EXPECT_EQ(*default_eta(ConductanceLaw::constant(2.0), 2), 8.0);
  const auto u = ConductanceLaw::uniform(1, 2);
  const double eta = *default_eta(u, 1);
  EXPECT_NEAR(*bad_probability(u, 1, eta), percolation_threshold_q(1), 1e-9);
  EXPECT_FALSE(default_eta(ConductanceLaw::bounded_pareto(0.25, 0.1, 1e3), 1).has_value());
}

TEST(Percolation, AllGoodClusterIsOriginAndNeighbours) {
  for (int d = 1; d <= 3; ++d) {
    const auto f = constant_field(Lattice(d, 7));
    const auto c = bad_cluster(f, 2.0 * d, 0);
    EXPECT_FALSE(c.saturated);
    EXPECT_EQ(c.size(), static_cast<std::size_t>(2 * d + 1));
    const auto w = w_statistic(f, 2.0 * d, 0);
    EXPECT_EQ(w.w, 4.0 * d);
  }
}

TEST(Percolation, SingleBadSiteExtendsCluster) {
  const Lattice lat(1, 7);
  std::vector<double> w(7, 1.0);
  w[0] = 3.0;  // edge (0,1)
  w[1] = 3.0;  // edge (1,2)
  const auto f = make_field(lat, w);
  const auto cls = classify_sites(f, 5.0);
  EXPECT_TRUE(cls.is_bad(1));
  EXPECT_TRUE(cls.is_good(0));
  EXPECT_TRUE(cls.is_good(2));
  const auto c = bad_cluster(f, cls, 0);
  std::set<Site> s(c.sites.begin(), c.sites.end());
  EXPECT_EQ(s, (std::set<Site>{0, 1, 2, 6}));
}

TEST(Percolation, AllBadSaturates) {
  const auto f = constant_field(Lattice(2, 5));
  const auto c = bad_cluster(f, 3.0, 0);
  EXPECT_TRUE(c.saturated);
  EXPECT_EQ(c.size(), 25u);
  EXPECT_THROW(w_statistic(f, 3.0, 0), SaturationError);
}

TEST(Percolation, ParentChainCertifiesMembership) {
  const auto law = ConductanceLaw::two_point(0.3, 1, 4);
  const Lattice lat(2, 24);
  int checked = 0;
  for (std::uint64_t r = 0; r < 20; ++r) {
    const auto f = sample_field(law, lat, 21, r);
    const auto cls = classify_sites(f, 10.0);
    const auto c = bad_cluster(f, cls, 0);
    if (c.saturated) continue;
    std::map<Site, Site> parent;
    for (std::size_t i = 0; i < c.size(); ++i) parent[c.sites[i]] = c.parent[i];
    for (Site z : c.sites) {
      Site cur = z;
      int steps = 0;
      while (parent[cur] != -1) {
        const Site p = parent[cur];
        EXPECT_GE(lat.edge_between(p, cur), 0);
        if (p != 0) {
          EXPECT_TRUE(cls.is_bad(p));
        }
        cur = p;
        ASSERT_LT(++steps, 10000);
      }
      EXPECT_EQ(cur, 0);
    }
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Percolation, WBoundHoldsOnSampledFields) {
  const auto law = ConductanceLaw::two_point(0.3, 1, 4);
  int nontrivial = 0;
  for (int d = 1; d <= 2; ++d) {
    const Lattice lat(d, d == 1 ? 101 : 31);
    for (std::uint64_t r = 0; r < 100; ++r) {
      const auto f = sample_field(law, lat, 5, r);
      const double eta = d == 1 ? 5.0 : 10.0;
      if (bad_cluster(f, eta, 0).saturated) continue;
      const auto w = w_statistic(f, eta, 0);
      EXPECT_TRUE(w.bound_holds) << w.w << " > " << w.bound;
      EXPECT_GE(w.w, 4.0 * d);
      nontrivial += w.cluster_size > static_cast<std::size_t>(2 * d + 1);
    }
  }
  EXPECT_GT(nontrivial, 20);
}
