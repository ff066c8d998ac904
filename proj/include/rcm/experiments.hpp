#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/field.hpp"
#include "rcm/fit.hpp"
#include "rcm/functionals.hpp"
#include "rcm/operators.hpp"
#include "rcm/parallel.hpp"
#include "rcm/report.hpp"
#include "rcm/spectral.hpp"
#include "rcm/walker.hpp"

namespace rcm {

namespace detail {

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

inline std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

inline void require_sorted_times(const std::vector<double>& times, bool allow_zero) {
  if (times.empty()) throw ConfigError("time grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (!allow_zero && times[i] == 0.0)) throw ConfigError("times must be positive");
    if (i > 0 && !(times[i] > times[i - 1])) throw ConfigError("times must be strictly increasing");
  }
}

// Values of f on every site, centered by the law mean when it is known and
// by the site mean otherwise.
inline FieldFunction centered_values(const LocalFunctional& f, const ConductanceField& field, bool center) {
  FieldFunction g = field_function(f, field);
  if (!center) return g;
  const double m = f.mean_hint ? *f.mean_hint : g.mean();
  for (double& v : g.values) v -= m;
  return g;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Variance decay E[(f_t)²].

enum class DecayPath { Exact, MonteCarlo };

struct DecayOptions {
  ConductanceLaw law = ConductanceLaw::constant(1.0);
  int d = 1;
  int n = 64;
  std::string functional = "edge";
  OperatorKind kind = OperatorKind::Simple;
  std::vector<double> times;
  int realizations = 16;
  std::uint64_t seed = 1;
  int workers = 1;
  bool center = true;
  DecayPath path = DecayPath::Exact;
  int walks_per_field = 64;  // Monte Carlo path
  std::optional<double> fit_lo;
  std::optional<double> fit_hi;
  std::optional<double> target_alpha;
  double tolerance = 0.15;
  bool log_rate_check = false;  // require t·E[f_t²]/ln₊t to stay bounded
};

struct DecayResult {
  DecayCurve curve;
  ExperimentReport report;
  bool zero_functional = false;
};

inline DecayResult variance_decay_experiment(const DecayOptions& o) {
  detail::require_sorted_times(o.times, true);
  if (o.realizations < 1) throw ConfigError("realizations must be >= 1");
  const Lattice lat(o.d, o.n);
  const LocalFunctional f = functional_by_name(o.functional, o.law);
  check_stencil(f, lat);
  if (!o.center && f.mean_hint && std::abs(*f.mean_hint) > 1e-12) {
    throw ConfigError("functional '" + o.functional + "' has nonzero mean and diverging N; enable centering");
  }

  DecayResult res;
  ExperimentReport& rep = res.report;
  rep.experiment = "decay";
  rep.echo("law", o.law.descriptor());
  rep.echo("d", o.d);
  rep.echo("n", o.n);
  rep.echo("functional", o.functional);
  rep.echo("walker", o.kind == OperatorKind::Simple ? "simple" : "conductance");
  rep.echo("path", o.path == DecayPath::Exact ? "exact" : "mc");
  rep.echo("times", detail::join(o.times));
  rep.echo("realizations", o.realizations);
  if (o.path == DecayPath::MonteCarlo) rep.echo("walks_per_field", o.walks_per_field);
  rep.echo("seed", o.seed);
  rep.echo("center", o.center ? "law-mean" : "none");

  const std::size_t nt = o.times.size();
  const std::size_t nr = static_cast<std::size_t>(o.realizations);
  std::vector<std::vector<double>> per(nt, std::vector<double>(nr, 0.0));
  const std::uint64_t field_seed = derive_seed(o.seed, {hash_name("decay-field")});

  if (o.path == DecayPath::Exact) {
    std::optional<DenseSpectrum> shared;
    if (o.kind == OperatorKind::Simple) {
      shared = dense_spectrum(build_generator(constant_field(lat), OperatorKind::Simple));
    }
    parallel_for(o.realizations, o.workers, [&](std::int64_t r) {
      const auto field = sample_field(o.law, lat, field_seed, static_cast<std::uint64_t>(r));
      const auto g = detail::centered_values(f, field, o.center);
      SpectralMeasure m;
      if (shared) {
        m = spectral_measure(*shared, g, false);
      } else {
        m = spectral_measure(build_generator(field, o.kind), g, false);
      }
      for (std::size_t i = 0; i < nt; ++i) per[i][static_cast<std::size_t>(r)] = variance_at(m, o.times[i]);
    });
  } else {
    // Ē[f(ω(0)) f(ω(2t))] along stationary walks (uniform start).
    const double horizon = 2.0 * o.times.back() + 1e-9;
    const std::uint64_t walk_seed = derive_seed(o.seed, {hash_name("decay-walk")});
    parallel_for(o.realizations, o.workers, [&](std::int64_t r) {
      const auto field = sample_field(o.law, lat, field_seed, static_cast<std::uint64_t>(r));
      const auto g = detail::centered_values(f, field, o.center);
      std::vector<KahanSum> acc(nt);
      for (int w = 0; w < o.walks_per_field; ++w) {
        Rng rng(derive_seed(walk_seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(w)}));
        const Site x0 = rng.below(lat.sites());
        const double g0 = g[static_cast<std::size_t>(x0)];
        Site x = x0;
        std::size_t next = 0;
        auto flush = [&](double t) {
          while (next < nt && 2.0 * o.times[next] < t) {
            acc[next].add(g0 * g[static_cast<std::size_t>(x)]);
            ++next;
          }
        };
        auto on_jump = [&](double t, Site y, int) {
          flush(t);
          x = y;
        };
        if (o.kind == OperatorKind::Simple) {
          detail::run_walk(lat, detail::unit_rates(lat), x0, horizon, rng, on_jump);
        } else {
          detail::run_walk(lat, detail::field_rates(field), x0, horizon, rng, on_jump);
        }
        flush(std::numeric_limits<double>::infinity());
      }
      for (std::size_t i = 0; i < nt; ++i) per[i][static_cast<std::size_t>(r)] = acc[i].value() / o.walks_per_field;
    });
  }

  Table tab{"decay", {"t", "variance", "se"}, {}};
  bool all_zero = true;
  for (std::size_t i = 0; i < nt; ++i) {
    const auto ms = mean_se(per[i]);
    res.curve.samples.push_back({o.times[i], ms.mean, ms.se});
    tab.add({o.times[i], ms.mean, ms.se});
    if (std::abs(ms.mean) > 1e-24) all_zero = false;
  }
  rep.tables.push_back(tab);

  if (all_zero) {
    res.zero_functional = true;
    rep.notes.push_back("functional vanishes identically on every sampled field; no exponent to fit");
    return res;
  }
  const double hi = o.fit_hi.value_or(o.times.back());
  const double lo = o.fit_lo.value_or(hi / 10.0);
  rep.echo("fit_window", detail::fmt(lo) + ":" + detail::fmt(hi));
  try {
    res.curve.fit = decay_fit(res.curve, lo, hi);
  } catch (const FitError& e) {
    rep.target("fit", false, e.what());
    return res;
  }
  const auto& fit = *res.curve.fit;
  Table ft{"fit", {"alpha", "ci_lo", "ci_hi", "residual", "flagged", "t_lo", "t_hi"}, {}};
  ft.add({fit.alpha, fit.ci_lo, fit.ci_hi, fit.residual, fit.flagged ? 1.0 : 0.0, fit.t_lo, fit.t_hi});
  rep.tables.push_back(ft);
  if (o.target_alpha) {
    const double err = std::abs(fit.alpha - *o.target_alpha);
    rep.target("decay exponent", err <= o.tolerance,
               "alpha=" + detail::fmt(fit.alpha) + " (95% CI " + detail::fmt(fit.ci_lo) + ".." +
                   detail::fmt(fit.ci_hi) + "), target " + detail::fmt(*o.target_alpha) + " +/- " +
                   detail::fmt(o.tolerance));
  }
  if (o.log_rate_check) {
    // t·v(t)/ln₊(t) over the fit window must not grow: its last value stays
    // within the range seen at the start of the window.
    std::vector<double> ratio;
    for (const auto& s : res.curve.samples) {
      if (s.t >= lo && s.t <= hi) ratio.push_back(s.value * s.t / std::max(1.0, std::log(s.t)));
    }
    const double first = ratio.empty() ? 0.0 : ratio.front();
    const double mx = ratio.empty() ? 0.0 : *std::max_element(ratio.begin(), ratio.end());
    const bool ok = !ratio.empty() && ratio.back() <= first * 1.05 && mx <= 2.0 * first;
    rep.target("ln(t)/t rate", ok,
               "t*v/ln+(t) from " + detail::fmt(first) + " to " + detail::fmt(ratio.empty() ? 0.0 : ratio.back()) +
                   " (max " + detail::fmt(mx) + ")");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Effective diffusivity from the regularized corrector R_μ𝔡.

struct DiffusivityOptions {
  ConductanceLaw law = ConductanceLaw::two_point(0.5, 1.0, 4.0);
  int d = 3;
  int n = 16;
  std::vector<double> mu;  // descending
  int realizations = 32;
  std::uint64_t seed = 1;
  int workers = 1;
  double fit_lo = 0.25;
  double fit_hi = 1.0;
  std::optional<double> target_order;
  double tolerance = 0.35;
  std::optional<double> min_order;
  SolverOptions solver;
};

struct DiffusivityRow {
  double mu = 0.0;
  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  double a2_se = 0.0;
  double mu_phi2 = 0.0;
  double gap = 0.0;     // mean of A₂(μ) − A₂(μ_min)
  double gap_se = 0.0;
  double chain = 0.0;   // worst relative chain residual over fields
  bool ordered = true;  // A₂ ≤ A₁ ≤ A₀ on every field
};

struct DiffusivityResult {
  std::vector<DiffusivityRow> rows;
  std::optional<PowerFit> order_fit;
  double order = 0.0;
  double sigma_bar2 = 0.0;
  double sigma_bar2_se = 0.0;
  ExperimentReport report;
};

inline std::vector<double> default_mu_list() {
  std::vector<double> mu;
  for (double m = 1.0; m > 0.2; m /= std::sqrt(std::sqrt(2.0))) mu.push_back(m);
  for (double m : {0.125, 0.0625, 0.03125, 0.01, 0.003, 0.001}) mu.push_back(m);
  return mu;
}

inline DiffusivityResult diffusivity_experiment(const DiffusivityOptions& o) {
  if (o.mu.empty()) throw ConfigError("mu list is empty");
  for (std::size_t i = 0; i < o.mu.size(); ++i) {
    if (!(o.mu[i] > 0.0)) throw ConfigError("mu values must be > 0");
    if (i > 0 && !(o.mu[i] < o.mu[i - 1])) throw ConfigError("mu list must be strictly descending");
  }
  if (o.realizations < 1) throw ConfigError("realizations must be >= 1");
  const Lattice lat(o.d, o.n);
  DiffusivityResult res;
  ExperimentReport& rep = res.report;
  rep.experiment = "diffusivity";
  rep.echo("law", o.law.descriptor());
  rep.echo("d", o.d);
  rep.echo("n", o.n);
  rep.echo("mu", detail::join(o.mu));
  rep.echo("realizations", o.realizations);
  rep.echo("seed", o.seed);
  rep.echo("fit_window", detail::fmt(o.fit_lo) + ":" + detail::fmt(o.fit_hi));

  const std::size_t nm = o.mu.size();
  const std::size_t nr = static_cast<std::size_t>(o.realizations);
  std::vector<std::vector<AEstimates>> est(nr, std::vector<AEstimates>(nm));
  const std::uint64_t field_seed = derive_seed(o.seed, {hash_name("diffusivity-field")});
  parallel_for(o.realizations, o.workers, [&](std::int64_t r) {
    const auto field = sample_field(o.law, lat, field_seed, static_cast<std::uint64_t>(r));
    const auto op = build_generator(field);
    const auto drift = drift_function(field);
    for (std::size_t i = 0; i < nm; ++i) {
      const auto phi = resolvent_solve(op, drift, o.mu[i], o.solver);
      est[static_cast<std::size_t>(r)][i] = a_estimators(field, phi, o.mu[i]);
    }
  });

  Table tab{"diffusivity", {"mu", "A0", "A1", "A2", "A2_se", "mu_E_phi2", "A2_minus_A2min", "se", "chain_residual"}, {}};
  for (std::size_t i = 0; i < nm; ++i) {
    DiffusivityRow row;
    row.mu = o.mu[i];
    std::vector<double> a0, a1, a2, mp, gap;
    for (std::size_t r = 0; r < nr; ++r) {
      const auto& e = est[r][i];
      a0.push_back(e.a0);
      a1.push_back(e.a1);
      a2.push_back(e.a2);
      mp.push_back(o.mu[i] * e.phi_square);
      gap.push_back(e.a2 - est[r][nm - 1].a2);
      row.chain = std::max(row.chain, e.chain_residual);
      const double tol = 1e-12 * std::abs(e.a0);
      if (!(e.a2 <= e.a1 + tol && e.a1 <= e.a0 + tol)) row.ordered = false;
    }
    row.a0 = mean_se(a0).mean;
    row.a1 = mean_se(a1).mean;
    const auto m2 = mean_se(a2);
    row.a2 = m2.mean;
    row.a2_se = m2.se;
    row.mu_phi2 = mean_se(mp).mean;
    const auto g = mean_se(gap);
    row.gap = g.mean;
    row.gap_se = g.se;
    res.rows.push_back(row);
    tab.add({row.mu, row.a0, row.a1, row.a2, row.a2_se, row.mu_phi2, row.gap, row.gap_se, row.chain});
  }
  rep.tables.push_back(tab);
  res.sigma_bar2 = 2.0 * res.rows.back().a2;
  res.sigma_bar2_se = 2.0 * res.rows.back().a2_se;
  rep.notes.push_back("sigma_bar^2 = 2*A2(mu_min) = " + detail::fmt(res.sigma_bar2) + " +/- " +
                      detail::fmt(res.sigma_bar2_se));

  double worst_chain = 0.0;
  bool ordered = true;
  for (const auto& row : res.rows) {
    worst_chain = std::max(worst_chain, row.chain);
    ordered = ordered && row.ordered;
  }
  rep.target("consistency chain", worst_chain < 1e-8, "max relative residual " + detail::fmt(worst_chain));
  rep.target("A2 <= A1 <= A0", ordered, ordered ? "holds on every field and mu" : "violated");

  DecayCurve c;
  for (auto it = res.rows.rbegin(); it != res.rows.rend(); ++it) {
    if (it->mu >= o.fit_lo && it->mu <= o.fit_hi) c.samples.push_back({it->mu, it->gap, it->gap_se});
  }
  const bool constant_law = o.law.deterministic();
  if (constant_law) {
    bool flat = true;
    for (const auto& row : res.rows) flat = flat && std::abs(row.a2 - o.law.mean()) < 1e-10;
    rep.target("constant field", flat, "A2 equals the conductance for every mu");
    return res;
  }
  try {
    res.order_fit = decay_fit(c, o.fit_lo, o.fit_hi);
    res.order = -res.order_fit->alpha;
    Table ft{"order_fit", {"order", "ci_lo", "ci_hi", "residual", "points"}, {}};
    ft.add({res.order, -res.order_fit->ci_hi, -res.order_fit->ci_lo, res.order_fit->residual,
            static_cast<double>(res.order_fit->points)});
    rep.tables.push_back(ft);
    if (o.target_order) {
      rep.target("convergence order", std::abs(res.order - *o.target_order) <= o.tolerance,
                 "order=" + detail::fmt(res.order) + ", target " + detail::fmt(*o.target_order) + " +/- " +
                     detail::fmt(o.tolerance));
    }
    if (o.min_order) {
      rep.target("convergence order lower bound", res.order >= *o.min_order,
                 "order=" + detail::fmt(res.order) + ", need >= " + detail::fmt(*o.min_order));
    }
  } catch (const FitError& e) {
    rep.target("convergence order", false, e.what());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Mean square displacement against d·σ̄².

struct MsdOptions {
  ConductanceLaw law = ConductanceLaw::constant(1.0);
  int d = 2;
  int n = 64;
  std::vector<double> times;
  int realizations = 100;
  int walks_per_field = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  double sigma_bar2 = 2.0;
  double sigma_bar2_se = 0.0;
};

struct MsdResult {
  std::vector<MsdPoint> curve;
  std::vector<double> gap;
  std::vector<double> gap_se;
  ExperimentReport report;
};

inline MsdResult msd_experiment(const MsdOptions& o) {
  if (!o.law.bounded()) throw ConfigError("msd experiment needs a bounded conductance law");
  detail::require_sorted_times(o.times, false);
  EnsembleConfig cfg;
  cfg.law = o.law;
  cfg.lattice = Lattice(o.d, o.n);
  cfg.kind = WalkerKind::Conductance;
  cfg.realizations = o.realizations;
  cfg.walks_per_field = o.walks_per_field;
  cfg.horizon = o.times.back();
  cfg.times = o.times;
  cfg.seed = derive_seed(o.seed, {hash_name("msd")});
  cfg.workers = o.workers;
  MsdResult res;
  ExperimentReport& rep = res.report;
  rep.experiment = "msd";
  rep.echo("law", o.law.descriptor());
  rep.echo("d", o.d);
  rep.echo("n", o.n);
  rep.echo("times", detail::join(o.times));
  rep.echo("realizations", o.realizations);
  rep.echo("walks_per_field", o.walks_per_field);
  rep.echo("seed", o.seed);
  rep.echo("sigma_bar2", o.sigma_bar2);
  rep.echo("sigma_bar2_se", o.sigma_bar2_se);
  res.curve = msd_estimate(cfg);
  Table tab{"msd", {"t", "msd_over_t", "se", "gap", "gap_se"}, {}};
  bool nonneg = true;
  bool zero = true;
  for (const auto& p : res.curve) {
    const double g = p.msd_over_t - o.d * o.sigma_bar2;
    const double se = std::sqrt(p.se * p.se + o.d * o.d * o.sigma_bar2_se * o.sigma_bar2_se);
    res.gap.push_back(g);
    res.gap_se.push_back(se);
    nonneg = nonneg && g >= -3.0 * se;
    zero = zero && std::abs(g) <= 3.0 * se;
    tab.add({p.t, p.msd_over_t, p.se, g, se});
  }
  rep.tables.push_back(tab);
  if (o.law.deterministic()) {
    rep.target("constant field gap", zero, "MSD/t equals d*sigma_bar^2 within 3 SE at every t");
    return res;
  }
  rep.target("gap nonnegative", nonneg, "MSD/t - d*sigma_bar^2 >= -3 SE at every t");
  // Decreasing over the second half of the grid: no step up by more than
  // 3 SE, and a net decrease from the middle to the end.
  const std::size_t mid = res.gap.size() / 2;
  bool dec = res.gap.size() >= 2 && res.gap.back() < res.gap[mid];
  for (std::size_t i = mid; i + 1 < res.gap.size(); ++i) {
    const double se = std::hypot(res.curve[i].se, res.curve[i + 1].se);
    dec = dec && res.gap[i + 1] <= res.gap[i] + 3.0 * se;
  }
  rep.target("gap eventually decreasing", dec,
             "gap " + detail::fmt(res.gap[mid]) + " at t=" + detail::fmt(res.curve[mid].t) + " -> " +
                 detail::fmt(res.gap.back()) + " at t=" + detail::fmt(res.curve.back().t));
  return res;
}

// ---------------------------------------------------------------------------
// Non-contractivity of f ↦ E[S₁(f_t)²] for the conductance walk.

inline double contract_formula(double m1, double m2, double m3, double m4) {
  return m1 * m2 - m3 + m4 - m2 * m2 + 2.0 * m1 * m2 * m2 - 2.0 * m1 * m4;
}

// Rounding scale of contract_formula: the sum of its term magnitudes times
// a few ulps. Values inside it are indistinguishable from zero.
inline double contract_formula_roundoff(double m1, double m2, double m3, double m4) {
  const double terms = std::abs(m1 * m2) + std::abs(m3) + std::abs(m4) + m2 * m2 + 2.0 * std::abs(m1 * m2 * m2) +
                       2.0 * std::abs(m1 * m4);
  return 16.0 * std::numeric_limits<double>::epsilon() * terms;
}

struct ContractOptions {
  double p = 0.25;
  double eps = 0.1;
  double cap = 1e3;
  double atom = 0.01;  // location of the non-Pareto atom before rescaling
  std::int64_t realizations = 2000000;
  std::uint64_t seed = 1;
  int workers = 1;
  int analogue_period = 32;
  int analogue_realizations = 16;
  std::vector<double> analogue_times;
};

struct ContractResult {
  double formula = 0.0;
  double moments[5] = {1, 0, 0, 0, 0};
  double mc = 0.0;
  double mc_se = 0.0;
  bool positive = false;
  bool agree = false;
  bool inconclusive = false;
  std::vector<double> analogue;
  bool analogue_nonincreasing = true;
  ExperimentReport report;
};

// One Monte Carlo sample of S₁(𝕃f)·S₁(f) in d=1, f = ω_{−1,0} + ω_{2,3}²,
// read from the conductances c[k] of edges (k−4, k−3), k = 0..9, i.e. edges
// starting at sites −4..5, in the original (unscaled) units.
inline double contract_sample(const double* c) {
  auto w = [&](int x) { return c[x + 4]; };  // ω_{x,x+1}
  auto f = [&](int x) {
    const double b = w(x + 2);
    return w(x - 1) + b * b;
  };
  double s_lf = 0.0, s_f = 0.0;
  for (int x = -1; x <= 1; ++x) {
    s_f += f(x);
    s_lf += w(x) * (f(x + 1) - f(x)) + w(x - 1) * (f(x - 1) - f(x));
  }
  return s_lf * s_f;
}

namespace detail {

// Density and inverse-CDF draw of index-s Pareto truncated to [1, cap].
inline double truncated_pareto_pdf(double s, double cap, double x) {
  const double norm = std::isinf(cap) ? 1.0 : 1.0 - std::pow(cap, -s);
  return s * std::pow(x, -s - 1.0) / norm;
}

inline double truncated_pareto_draw(double s, double cap, double u) {
  const double tail = std::isinf(cap) ? 0.0 : std::pow(cap, -s);
  const double x = std::pow(1.0 - u * (1.0 - tail), -1.0 / s);
  return std::isinf(cap) ? x : std::min(x, cap);
}

// One edge of the pre-rescale law by importance sampling. The Pareto part is
// drawn from a defensive mixture with a heavy index-0.1 Pareto, which keeps
// E[(weight·sample)²] finite for every cap. The likelihood ratio is folded
// into `weight`.
inline double contract_edge(const law::BoundedPareto& l, Rng& rng, double& weight) {
  constexpr double kHeavyShare = 0.1;
  constexpr double kHeavyIndex = 0.1;
  if (rng.uniform() >= l.p) return l.atom;
  const double s = l.tail_index();
  const double pick = rng.uniform();
  const double u = rng.uniform();
  const double x = pick < kHeavyShare ? truncated_pareto_draw(kHeavyIndex, l.cap, u)
                                      : truncated_pareto_draw(s, l.cap, u);
  const double target = truncated_pareto_pdf(s, l.cap, x);
  const double proposal =
      (1.0 - kHeavyShare) * target + kHeavyShare * truncated_pareto_pdf(kHeavyIndex, l.cap, x);
  weight *= target / proposal;
  return x;
}

}  // namespace detail

inline ContractResult contractivity_experiment(const ContractOptions& o) {
  const auto law = ConductanceLaw::bounded_pareto(o.p, o.eps, o.cap, o.atom);
  const auto* bp = std::get_if<law::BoundedPareto>(&law.variant());
  const double a = 1.0 / bp->scale();  // ω = a·ω'
  ContractResult res;
  ExperimentReport& rep = res.report;
  rep.experiment = "contract";
  rep.echo("law", law.descriptor());
  rep.echo("realizations", o.realizations);
  rep.echo("seed", o.seed);
  rep.echo("analogue_period", o.analogue_period);
  rep.echo("analogue_realizations", o.analogue_realizations);
  for (int i = 1; i <= 4; ++i) res.moments[i] = bp->pre_moment(i);
  res.formula = contract_formula(res.moments[1], res.moments[2], res.moments[3], res.moments[4]);
  res.positive = res.formula >
                 contract_formula_roundoff(res.moments[1], res.moments[2], res.moments[3], res.moments[4]);
  res.inconclusive = !res.positive;

  // Monte Carlo over independent edge configurations in original units.
  if (o.realizations < 2) throw ConfigError("realizations must be >= 2");
  constexpr std::int64_t kChunk = 8192;
  const std::int64_t chunks = (o.realizations + kChunk - 1) / kChunk;
  std::vector<MeanSe> parts(static_cast<std::size_t>(chunks));
  const std::uint64_t mc_seed = derive_seed(o.seed, {hash_name("contract-mc")});
  parallel_for(chunks, o.workers, [&](std::int64_t c) {
    Rng rng(derive_seed(mc_seed, {static_cast<std::uint64_t>(c)}));
    const std::int64_t count = std::min(kChunk, o.realizations - c * kChunk);
    KahanSum s, q;
    double edges[10];
    for (std::int64_t i = 0; i < count; ++i) {
      double weight = 1.0;
      for (double& e : edges) e = detail::contract_edge(*bp, rng, weight);
      const double v = weight * contract_sample(edges);
      s.add(v);
      q.add(v * v);
    }
    MeanSe m;
    m.count = count;
    m.mean = s.value();  // holds sums until the merge below
    m.sd = q.value();
    parts[static_cast<std::size_t>(c)] = m;
  });
  KahanSum s, q;
  for (const auto& p : parts) {
    s.add(p.mean);
    q.add(p.sd);
  }
  const double nn = static_cast<double>(o.realizations);
  res.mc = s.value() / nn;
  const double var = std::max(0.0, (q.value() - nn * res.mc * res.mc) / (nn - 1.0));
  res.mc_se = std::sqrt(var / nn);
  res.agree = std::abs(res.mc - res.formula) <= 3.0 * res.mc_se;

  Table tab{"contract", {"mu1", "mu2", "mu3", "mu4", "formula", "mc", "mc_se"}, {}};
  tab.add({res.moments[1], res.moments[2], res.moments[3], res.moments[4], res.formula, res.mc, res.mc_se});
  rep.tables.push_back(tab);
  if (res.inconclusive) {
    rep.notes.push_back("formula value is not positive: cap too small for the fourth moment to dominate");
  }
  rep.target("formula positive", res.positive, "value " + detail::fmt(res.formula));
  rep.target("monte carlo agrees", res.agree,
             "mc " + detail::fmt(res.mc) + " +/- " + detail::fmt(res.mc_se) + " vs formula " +
                 detail::fmt(res.formula));

  // Simple-walk analogue: (1/|T|)‖e^{tL°} S₁g‖², which is the site average of
  // S₁(f°_t)² because the box sum commutes with the simple-walk semigroup.
  std::vector<double> times = o.analogue_times;
  if (times.empty()) {
    for (int k = 0; k <= 40; ++k) times.push_back(k * 0.25);
  }
  const Lattice lat(1, o.analogue_period);
  const auto f = contract_example(law, a);
  check_stencil(f, lat, 1);
  const auto spec = dense_spectrum(build_generator(constant_field(lat), OperatorKind::Simple));
  std::vector<std::vector<double>> per(times.size(), std::vector<double>(static_cast<std::size_t>(o.analogue_realizations)));
  const std::uint64_t an_seed = derive_seed(o.seed, {hash_name("contract-analogue")});
  parallel_for(o.analogue_realizations, o.workers, [&](std::int64_t r) {
    const auto field = sample_field(law, lat, an_seed, static_cast<std::uint64_t>(r));
    const auto g = field_function(f, field);
    FieldFunction h = FieldFunction::zeros(lat);
    for (Site x = 0; x < lat.sites(); ++x) {
      h[static_cast<std::size_t>(x)] = g[static_cast<std::size_t>(lat.step(x, 0, -1))] +
                                       g[static_cast<std::size_t>(x)] +
                                       g[static_cast<std::size_t>(lat.step(x, 0, 1))];
    }
    const auto m = spectral_measure(spec, h, false);
    for (std::size_t i = 0; i < times.size(); ++i) per[i][static_cast<std::size_t>(r)] = variance_at(m, times[i]);
  });
  Table an{"analogue", {"t", "E_S1_sq"}, {}};
  for (std::size_t i = 0; i < times.size(); ++i) {
    res.analogue.push_back(mean_se(per[i]).mean);
    an.add({times[i], res.analogue.back()});
    if (i > 0 && res.analogue[i] > res.analogue[i - 1] * (1.0 + 1e-12)) res.analogue_nonincreasing = false;
  }
  rep.tables.push_back(an);
  rep.target("simple-walk analogue nonincreasing", res.analogue_nonincreasing,
             std::to_string(times.size()) + " grid points");
  return res;
}

// ---------------------------------------------------------------------------
// Box inequality E f² ≤ C_S n² ℰ(f) + (2/|B_n|²) E[S_n(f)²] on the torus.

struct NashOptions {
  ConductanceLaw law = ConductanceLaw::two_point(0.5, 1.0, 4.0);
  int d = 1;
  std::vector<int> boxes{2, 4, 8};
  int period = 0;  // 0: smallest torus holding the largest box and the stencil
  std::string functional = "drift";
  int realizations = 8;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct NashRow {
  int n = 0;
  double lhs = 0.0;
  double energy_term = 0.0;
  double sum_term = 0.0;
  double rhs = 0.0;
  double cs = 0.0;
  bool holds = true;  // on every field
};

struct NashResult {
  std::vector<NashRow> rows;
  int best_n = 0;
  double optimal_width = 0.0;
  ExperimentReport report;
};

inline NashResult nash_chain_check(const NashOptions& o) {
  if (o.boxes.empty()) throw ConfigError("box list is empty");
  const LocalFunctional f = functional_by_name(o.functional, o.law);
  int max_box = 0;
  for (int b : o.boxes) {
    if (b < 1) throw ConfigError("box radii must be >= 1");
    max_box = std::max(max_box, b);
  }
  const int period = o.period > 0 ? o.period : std::max({2 * max_box + 1, 2 * f.radius() + 1, 3});
  if (2 * max_box + 1 > period) throw ConfigError("largest box does not fit in the torus");
  const Lattice lat(o.d, period);
  check_stencil(f, lat);
  NashResult res;
  ExperimentReport& rep = res.report;
  rep.experiment = "nash-check";
  rep.echo("law", o.law.descriptor());
  rep.echo("d", o.d);
  rep.echo("period", period);
  std::vector<double> bx(o.boxes.begin(), o.boxes.end());
  rep.echo("boxes", detail::join(bx));
  rep.echo("functional", o.functional);
  rep.echo("realizations", o.realizations);
  rep.echo("seed", o.seed);

  const std::size_t nb = o.boxes.size();
  const std::size_t nr = static_cast<std::size_t>(o.realizations);
  struct Cell {
    double lhs, energy, simple_energy, s2;
  };
  std::vector<std::vector<Cell>> cells(nr, std::vector<Cell>(nb));
  const std::uint64_t field_seed = derive_seed(o.seed, {hash_name("nash-field")});
  parallel_for(o.realizations, o.workers, [&](std::int64_t r) {
    const auto field = sample_field(o.law, lat, field_seed, static_cast<std::uint64_t>(r));
    const auto g = detail::centered_values(f, field, true);
    const double e = dirichlet_form(build_generator(field), g);
    const double e0 = dirichlet_form(build_generator(field, OperatorKind::Simple), g);
    for (std::size_t b = 0; b < nb; ++b) {
      const int nbox = o.boxes[b];
      const int side = 2 * nbox + 1;
      const std::int64_t vol = box_volume(o.d, nbox);
      KahanSum s2;
      Offset off{};
      for (Site x = 0; x < lat.sites(); ++x) {
        double s = 0.0;
        for (std::int64_t i = 0; i < vol; ++i) {
          std::int64_t q = i;
          for (int a = 0; a < o.d; ++a) {
            off[a] = static_cast<int>(q % side) - nbox;
            q /= side;
          }
          s += g[static_cast<std::size_t>(lat.translate(x, off))];
        }
        s2.add(s * s);
      }
      cells[static_cast<std::size_t>(r)][b] = {g.mean_square(), e, e0, s2.value() / static_cast<double>(lat.sites())};
    }
  });

  Table tab{"seminash", {"n", "C_S", "lhs", "energy_term", "sum_term", "rhs", "slack"}, {}};
  double best = std::numeric_limits<double>::infinity();
  bool all = true;
  double script_n = 0.0;
  double energy = 0.0, lhs_mean = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    const int nbox = o.boxes[b];
    const auto gap = box_spectral_gap(o.d, nbox);
    const double vol = static_cast<double>(box_volume(o.d, nbox));
    NashRow row;
    row.n = nbox;
    row.cs = gap.cs;
    std::vector<double> lhs, et, st;
    for (std::size_t r = 0; r < nr; ++r) {
      const auto& c = cells[r][b];
      const double e_term = gap.cs * nbox * nbox * c.energy;
      const double s_term = 2.0 * c.s2 / (vol * vol);
      lhs.push_back(c.lhs);
      et.push_back(e_term);
      st.push_back(s_term);
      if (!(c.lhs <= e_term + s_term + 1e-12 * std::max(1.0, c.lhs))) row.holds = false;
      script_n = std::max(script_n, c.s2 / vol);
    }
    row.lhs = mean_se(lhs).mean;
    row.energy_term = mean_se(et).mean;
    row.sum_term = mean_se(st).mean;
    row.rhs = row.energy_term + row.sum_term;
    all = all && row.holds;
    if (row.rhs < best) {
      best = row.rhs;
      res.best_n = nbox;
    }
    lhs_mean = row.lhs;
    std::vector<double> ev;
    for (std::size_t r = 0; r < nr; ++r) ev.push_back(cells[r][b].energy);
    energy = mean_se(ev).mean;
    res.rows.push_back(row);
    tab.add({static_cast<double>(nbox), row.cs, row.lhs, row.energy_term, row.sum_term, row.rhs, row.rhs - row.lhs});
  }
  rep.tables.push_back(tab);
  const double n_prime = std::max(script_n, lhs_mean);
  if (energy > 0.0) {
    res.optimal_width = std::pow(n_prime / (2.0 * std::exp(1.0) * energy), 1.0 / (o.d + 2.0));
  }
  rep.notes.push_back("smallest right-hand side at n=" + std::to_string(res.best_n) +
                      "; optimal width heuristic w=" + detail::fmt(res.optimal_width));
  rep.target("seminash inequality", all, all ? "holds for every field and box" : "violated");
  return res;
}

// ---------------------------------------------------------------------------
// Equivalence of the variance-decay and spectral-tail conditions.

struct TclOptions {
  std::vector<double> alphas{1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0, 3.5, 4.0};
  std::vector<double> offsets{-1.0, -0.5, 0.5, 1.0};  // β − α for synthetic measures
  int torus_measures = 16;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct TclResult {
  std::vector<TclVerdict> verdicts;
  std::vector<std::string> labels;
  std::size_t agreements = 0;
  std::size_t mutual = 0;
  ExperimentReport report;
};

inline TclResult tcl_equivalence_experiment(const TclOptions& o) {
  TclResult res;
  ExperimentReport& rep = res.report;
  rep.experiment = "tcl";
  rep.echo("alphas", detail::join(o.alphas));
  rep.echo("offsets", detail::join(o.offsets));
  rep.echo("torus_measures", o.torus_measures);
  rep.echo("seed", o.seed);
  std::vector<std::pair<std::string, std::pair<SpectralMeasure, double>>> cases;
  for (double a : o.alphas) {
    for (double off : o.offsets) {
      const double beta = a + off;
      if (beta <= 1.0) continue;
      cases.push_back({"power beta=" + detail::fmt(beta) + " alpha=" + detail::fmt(a), {power_law_measure(beta), a}});
    }
  }
  // Torus measures: the drift and the centered edge on sampled fields.
  const auto law = ConductanceLaw::two_point(0.5, 1.0, 4.0);
  const std::uint64_t field_seed = derive_seed(o.seed, {hash_name("tcl-field")});
  for (int k = 0; k < o.torus_measures; ++k) {
    const int d = 1 + k % 2;
    const Lattice lat(d, d == 1 ? 64 : 12);
    const auto field = sample_field(law, lat, field_seed, static_cast<std::uint64_t>(k));
    const auto f = (k / 2) % 2 ? centered_edge(law) : local_drift(law);
    const auto m = spectral_measure(build_generator(field), field_function(f, field), true);
    const double a = o.alphas[static_cast<std::size_t>(k) % o.alphas.size()];
    cases.push_back({"torus d=" + std::to_string(d) + " " + f.name + " alpha=" + detail::fmt(a), {m, a}});
  }
  res.verdicts.resize(cases.size());
  parallel_for(static_cast<std::int64_t>(cases.size()), o.workers, [&](std::int64_t i) {
    const auto& c = cases[static_cast<std::size_t>(i)].second;
    res.verdicts[static_cast<std::size_t>(i)] = tcl_check(c.first, c.second);
  });
  Table tab{"tcl", {"case", "alpha", "var_sup", "var_slope", "var_bounded", "tail_sup", "tail_slope", "tail_bounded",
                    "agree", "mutual_bound"}, {}};
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& v = res.verdicts[i];
    res.labels.push_back(cases[i].first);
    res.agreements += v.agree;
    res.mutual += v.mutual_bound;
    tab.add({static_cast<double>(i), v.alpha, v.variance.sup, v.variance.end_slope, v.variance.bounded ? 1.0 : 0.0,
             v.tail.sup, v.tail.end_slope, v.tail.bounded ? 1.0 : 0.0, v.agree ? 1.0 : 0.0,
             v.mutual_bound ? 1.0 : 0.0});
  }
  rep.tables.push_back(tab);
  for (std::size_t i = 0; i < cases.size(); ++i) rep.notes.push_back("case " + std::to_string(i) + ": " + cases[i].first);
  rep.target("verdicts agree", res.agreements == cases.size(),
             std::to_string(res.agreements) + "/" + std::to_string(cases.size()) + " measures");
  rep.target("mutual bounds", res.mutual == cases.size(),
             std::to_string(res.mutual) + "/" + std::to_string(cases.size()) + " measures");
  return res;
}

}  // namespace rcm
