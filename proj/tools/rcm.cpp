#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "rcm/rcm.hpp"

namespace {

using namespace rcm;

constexpr int kExitPass = 0;
constexpr int kExitTargetFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Artifact {
  std::string file;
  std::string body;
};

struct Outcome {
  ExperimentReport report;
  std::vector<Artifact> artifacts;
};

std::vector<double> powers_of_two(int lo, int hi) {
  std::vector<double> v;
  for (int k = lo; k <= hi; ++k) v.push_back(std::ldexp(1.0, k));
  return v;
}

template <typename T>
T get(const std::optional<T>& v, T fallback) {
  return v ? *v : fallback;
}

int workers_of(const RunConfig& c) { return get(c.workers, default_workers()); }

Outcome run_simulate(const RunConfig& c) {
  const auto law = get(c.law, ConductanceLaw::two_point(0.5, 1.0, 4.0));
  const Lattice lat(get(c.d, 2), get(c.n, 16));
  const double horizon = get(c.horizon, 10.0);
  const std::uint64_t seed = get<std::uint64_t>(c.seed, 1);
  const bool simple = get<std::string>(c.walker, "conductance") == "simple";
  Outcome o;
  auto& rep = o.report;
  rep.experiment = "simulate";
  rep.echo("law", law.descriptor());
  rep.echo("d", lat.dim());
  rep.echo("n", lat.period());
  rep.echo("walker", simple ? "simple" : "conductance");
  rep.echo("horizon", horizon);
  rep.echo("seed", seed);
  Rng rng(derive_seed(seed, {hash_name("simulate-walk")}));
  Trajectory tr;
  if (simple) {
    tr = simulate_srw(lat, 0, horizon, rng);
  } else {
    const auto field = sample_field(law, lat, derive_seed(seed, {hash_name("simulate-field")}));
    tr = simulate_vsrw(field, 0, horizon, rng);
  }
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  o.artifacts.push_back({"trajectory.csv", os.str()});
  const Offset u = tr.displacement_after(tr.events.size());
  double r2 = 0.0;
  for (int a = 0; a < lat.dim(); ++a) r2 += static_cast<double>(u[a]) * u[a];
  rep.notes.push_back(std::to_string(tr.events.size()) + " jumps, squared displacement " + std::to_string(r2));
  return o;
}

Outcome run_decay(const RunConfig& c) {
  DecayOptions opt;
  opt.law = get(c.law, ConductanceLaw::two_point(0.5, 1.0, 4.0));
  opt.d = get(c.d, 1);
  opt.n = get(c.n, opt.d == 1 ? 1024 : 32);
  opt.functional = get<std::string>(c.functional, "edge");
  opt.kind = get<std::string>(c.walker, "simple") == "simple" ? OperatorKind::Simple : OperatorKind::Conductance;
  opt.path = get<std::string>(c.path, "exact") == "exact" ? DecayPath::Exact : DecayPath::MonteCarlo;
  if (c.times) {
    opt.times = *c.times;
  } else {
    detail::parse_list(opt.d == 1 ? "geom:10,1000,21" : "geom:1,16,17", opt.times);
  }
  opt.realizations = get(c.realizations, 64);
  opt.walks_per_field = get(c.walks, 64);
  opt.seed = get<std::uint64_t>(c.seed, 1);
  opt.workers = workers_of(c);
  opt.fit_lo = c.fit_lo;
  opt.fit_hi = c.fit_hi;
  opt.target_alpha = c.target;
  opt.tolerance = get(c.tolerance, 0.15);
  auto r = variance_decay_experiment(opt);
  return {r.report, {}};
}

DiffusivityOptions diffusivity_options(const RunConfig& c, int d_default) {
  DiffusivityOptions opt;
  opt.law = get(c.law, ConductanceLaw::two_point(0.5, 1.0, 4.0));
  opt.d = get(c.d, d_default);
  opt.n = get(c.n, opt.d >= 3 ? 16 : 64);
  opt.mu = get(c.mu, default_mu_list());
  opt.realizations = get(c.realizations, 32);
  opt.seed = get<std::uint64_t>(c.seed, 1);
  opt.workers = workers_of(c);
  opt.fit_lo = get(c.fit_lo, 0.25);
  opt.fit_hi = get(c.fit_hi, 1.0);
  if (c.target) {
    opt.target_order = c.target;
    opt.tolerance = get(c.tolerance, 0.35);
  } else if (opt.d == 3) {
    opt.target_order = 1.5;
    opt.tolerance = get(c.tolerance, 0.35);
  } else if (opt.d == 2) {
    opt.min_order = 0.7;
  }
  return opt;
}

Outcome run_diffusivity(const RunConfig& c) {
  auto r = diffusivity_experiment(diffusivity_options(c, 3));
  return {r.report, {}};
}

Outcome run_msd(const RunConfig& c) {
  MsdOptions opt;
  opt.law = get(c.law, ConductanceLaw::two_point(0.5, 1.0, 4.0));
  opt.d = get(c.d, 2);
  opt.n = get(c.n, 64);
  opt.times = get(c.times, powers_of_two(0, 6));
  opt.realizations = get(c.realizations, 200);
  opt.walks_per_field = get(c.walks, 200);
  opt.seed = get<std::uint64_t>(c.seed, 1);
  opt.workers = workers_of(c);
  if (!opt.law.bounded()) throw ConfigError("msd experiment needs a bounded conductance law");
  Outcome o;
  if (c.sigma_bar2) {
    opt.sigma_bar2 = *c.sigma_bar2;
    opt.sigma_bar2_se = get(c.sigma_bar2_se, 0.0);
  } else {
    RunConfig dc = c;
    dc.d = opt.d;
    dc.n = opt.n;
    dc.realizations = get(c.realizations, 32) > 64 ? std::optional<int>(32) : c.realizations;
    auto dopt = diffusivity_options(dc, opt.d);
    dopt.target_order.reset();
    dopt.min_order.reset();
    auto dr = diffusivity_experiment(dopt);
    opt.sigma_bar2 = dr.sigma_bar2;
    opt.sigma_bar2_se = dr.sigma_bar2_se;
    for (const auto& t : dr.report.tables) {
      std::ostringstream os;
      write_table_csv(os, dr.report, t);
      o.artifacts.push_back({"sigma_" + t.name + ".csv", os.str()});
    }
  }
  auto r = msd_experiment(opt);
  o.report = r.report;
  return o;
}

Outcome run_spectrum(const RunConfig& c) {
  Outcome o;
  auto& rep = o.report;
  rep.experiment = "spectrum";
  SpectralMeasure m;
  std::vector<double> times = get(c.times, std::vector<double>{0.0, 1.0, 10.0, 100.0});
  std::vector<double> mus = get(c.mu, std::vector<double>{1.0, 0.1, 0.01});
  if (c.input) {
    std::ifstream is(*c.input);
    if (!is) throw ConfigError("cannot read measure file " + *c.input);
    m = read_measure_csv(is);
    rep.echo("input", *c.input);
  } else {
    const auto law = get(c.law, ConductanceLaw::two_point(0.5, 1.0, 4.0));
    const Lattice lat(get(c.d, 1), get(c.n, 32));
    const std::uint64_t seed = get<std::uint64_t>(c.seed, 1);
    const std::string fname = get<std::string>(c.functional, "drift");
    const auto kind = get<std::string>(c.walker, "conductance") == "simple" ? OperatorKind::Simple
                                                                              : OperatorKind::Conductance;
    rep.echo("law", law.descriptor());
    rep.echo("d", lat.dim());
    rep.echo("n", lat.period());
    rep.echo("functional", fname);
    rep.echo("walker", kind == OperatorKind::Simple ? "simple" : "conductance");
    rep.echo("seed", seed);
    if (lat.sites() > kDenseLimit) throw ConfigError("spectrum needs at most " + std::to_string(kDenseLimit) + " sites");
    const auto field = sample_field(law, lat, derive_seed(seed, {hash_name("spectrum-field")}));
    const auto f = functional_by_name(fname, law);
    const auto op = build_generator(field, kind);
    const auto spec = dense_spectrum(op);
    m = spectral_measure(spec, field_function(f, field), true);
    std::ostringstream s1, s2;
    write_spectrum_csv(s1, spec);
    op.write_coo(s2);
    o.artifacts.push_back({"spectrum.csv", s1.str()});
    o.artifacts.push_back({"operator.coo", s2.str()});
  }
  std::ostringstream s3;
  write_measure_csv(s3, m);
  o.artifacts.push_back({"measure.csv", s3.str()});
  rep.echo("times", detail::join(times));
  rep.echo("mu", detail::join(mus));
  Table vt{"variance", {"t", "variance", "zt_variance"}, {}};
  for (double t : times) vt.add({t, variance_at(m, t), zt_variance(m, t)});
  rep.tables.push_back(vt);
  rep.notes.push_back("total mass " + detail::fmt(m.total_mass(), 12));
  if (m.zero_mass() <= kZeroMassTolerance) {
    rep.notes.push_back("sigma^2 " + detail::fmt(sigma_squared(m), 12));
    Table rt{"resolvent", {"mu", "I_2", "I_0", "second_moment", "tail"}, {}};
    for (double mu : mus) {
      rt.add({mu, i_k_mu(m, 2.0, mu), i_k_mu(m, 0.0, mu), resolvent_second_moment(m, mu), spectral_tail(m, mu)});
    }
    rep.tables.push_back(rt);
  } else {
    rep.notes.push_back("measure has mass at 0; 1/lambda functionals skipped");
  }
  return o;
}

Outcome run_contract(const RunConfig& c) {
  ContractOptions opt;
  opt.p = get(c.p, 0.25);
  opt.eps = get(c.eps, 0.1);
  opt.cap = get(c.cap, 1e3);
  opt.atom = get(c.atom, 0.01);
  opt.realizations = get(c.realizations, 2000000);
  opt.seed = get<std::uint64_t>(c.seed, 1);
  opt.workers = workers_of(c);
  if (c.times) opt.analogue_times = *c.times;
  auto r = contractivity_experiment(opt);
  return {r.report, {}};
}

Outcome run_nash(const RunConfig& c) {
  NashOptions opt;
  opt.law = get(c.law, ConductanceLaw::two_point(0.5, 1.0, 4.0));
  opt.d = get(c.d, 1);
  if (c.boxes) opt.boxes.assign(c.boxes->begin(), c.boxes->end());
  opt.period = get(c.period, get(c.n, 0));
  opt.functional = get<std::string>(c.functional, "drift");
  opt.realizations = get(c.realizations, 8);
  opt.seed = get<std::uint64_t>(c.seed, 1);
  opt.workers = workers_of(c);
  auto r = nash_chain_check(opt);
  return {r.report, {}};
}

Outcome run_field_dump(const RunConfig& c) {
  const auto law = get(c.law, ConductanceLaw::two_point(0.5, 1.0, 4.0));
  const Lattice lat(get(c.d, 2), get(c.n, 8));
  const std::uint64_t seed = get<std::uint64_t>(c.seed, 1);
  Outcome o;
  auto& rep = o.report;
  rep.experiment = "field-dump";
  rep.echo("law", law.descriptor());
  rep.echo("d", lat.dim());
  rep.echo("n", lat.period());
  rep.echo("seed", seed);
  const auto field = sample_field(law, lat, seed);
  std::ostringstream a, b;
  write_field(a, field);
  write_field_csv(b, field);
  o.artifacts.push_back({"field.txt", a.str()});
  o.artifacts.push_back({"field.csv", b.str()});
  std::optional<double> eta = c.eta ? c.eta : default_eta(law, lat.dim());
  if (eta) {
    rep.echo("eta", *eta);
    const auto cls = classify_sites(field, *eta);
    const auto cl = bad_cluster(field, cls, 0);
    rep.notes.push_back("bad fraction " + detail::fmt(cls.bad_fraction) + ", origin cluster size " +
                        std::to_string(cl.size()) + (cl.saturated ? " (saturated)" : ""));
    if (!cl.saturated) {
      const auto w = w_statistic(field, *eta, 0);
      rep.target("W <= 2d|C|^2", w.bound_holds, "W=" + detail::fmt(w.w) + ", bound " + detail::fmt(w.bound));
    }
  } else {
    rep.notes.push_back("no default eta for this law; pass --eta to classify sites");
  }
  return o;
}

Outcome dispatch(const RunConfig& c) {
  const auto& e = c.experiment;
  if (e == "simulate") return run_simulate(c);
  if (e == "decay") return run_decay(c);
  if (e == "diffusivity") return run_diffusivity(c);
  if (e == "msd") return run_msd(c);
  if (e == "spectrum") return run_spectrum(c);
  if (e == "contract") return run_contract(c);
  if (e == "nash-check") return run_nash(c);
  if (e == "field-dump") return run_field_dump(c);
  throw ConfigError("unknown experiment '" + e + "'");
}

struct Flags {
  std::string config;
  std::map<std::string, std::string> overrides;
};

const char* kColumns = R"(CSV columns (every file starts with a '# rcm-csv v1' comment line):
  simulate     trajectory.csv   time,site,u0..u{d-1} (unwrapped displacement)
  decay        decay.csv        t,variance,se ; fit.csv alpha,ci_lo,ci_hi,residual,flagged,t_lo,t_hi
  diffusivity  diffusivity.csv  mu,A0,A1,A2,A2_se,mu_E_phi2,A2_minus_A2min,se,chain_residual ; order_fit.csv
  msd          msd.csv          t,msd_over_t,se,gap,gap_se
  spectrum     spectrum.csv     index,eigenvalue ; measure.csv lambda,weight ; operator.coo row,col,value
               variance.csv     t,variance,zt_variance ; resolvent.csv mu,I_2,I_0,second_moment,tail
  contract     contract.csv     mu1,mu2,mu3,mu4,formula,mc,mc_se ; analogue.csv t,E_S1_sq
  nash-check   seminash.csv     n,C_S,lhs,energy_term,sum_term,rhs,slack
  field-dump   field.csv        edge,site,axis,x0..x{d-1},omega ; field.txt (rcm-field v1 record)
Every run also writes config.txt (config echo) and summary.txt (pass/fail lines).
Exit codes: 0 pass, 1 target failed, 2 configuration error, 3 numerical backend error.)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random conductance model laboratory"};
  app.footer(kColumns);
  app.require_subcommand(1);
  Flags flags;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "key=value configuration file");
    auto opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
      sub->add_option_function<std::string>(
          flag, [&flags, key](const std::string& v) { flags.overrides[key] = v; }, help);
    };
    opt("--seed", "seed", "master seed");
    opt("--workers", "workers", "worker threads (default: all cores)");
    opt("--out", "out", "output directory");
    opt("--d", "d", "dimension");
    opt("--n", "n", "torus period");
    opt("--law", "law", "constant:c | uniform:a,b | twopoint:p,low,high | pareto:p,eps,cap[,atom]");
    opt("--functional", "functional", "drift | edge | contract-example | zero | constant:c | poly:...");
    opt("--times", "times", "time grid: a,b,c | geom:lo,hi,count | lin:lo,hi,count");
    opt("--mu", "mu", "resolvent parameters, descending");
    opt("--realizations", "realizations", "field realizations");
    opt("--walks", "walks", "walks per field");
    opt("--walker", "walker", "simple | conductance");
    opt("--path", "path", "exact | mc (decay)");
    opt("--boxes", "boxes", "box radii (nash-check)");
    opt("--period", "period", "torus period (nash-check)");
    opt("--horizon", "horizon", "walk horizon (simulate)");
    opt("--eta", "eta", "good/bad threshold (field-dump)");
    opt("--fit-lo", "fit_lo", "lower end of the fit window");
    opt("--fit-hi", "fit_hi", "upper end of the fit window");
    opt("--target", "target", "declared exponent target");
    opt("--tolerance", "tolerance", "tolerance on the target");
    opt("--p", "p", "Pareto mixture weight (contract)");
    opt("--eps", "eps", "Pareto tail excess (contract)");
    opt("--cap", "cap", "Pareto cap (contract)");
    opt("--atom", "atom", "non-Pareto atom before rescaling (contract)");
    opt("--sigma-bar2", "sigma_bar2", "effective diffusivity for msd (default: computed)");
    opt("--sigma-bar2-se", "sigma_bar2_se", "its standard error");
    opt("--input", "input", "measure CSV to analyse (spectrum)");
  };
  std::vector<CLI::App*> subs;
  for (const auto& name : experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    add_common(sub);
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }
  std::string experiment;
  for (auto* s : subs) {
    if (s->parsed()) experiment = s->get_name();
  }

  ParsedConfig parsed;
  if (!flags.config.empty()) {
    std::ifstream is(flags.config);
    if (!is) {
      std::cerr << "error: cannot read config file " << flags.config << "\n";
      return kExitConfig;
    }
    std::stringstream ss;
    ss << is.rdbuf();
    parsed = parse_config(ss.str());
  }
  for (const auto& [k, v] : flags.overrides) apply_setting(parsed.config, k, v, 0, parsed.issues);
  if (!parsed.config.experiment.empty() && parsed.config.experiment != experiment) {
    parsed.issues.push_back({0, "config names experiment '" + parsed.config.experiment + "' but subcommand is '" +
                                    experiment + "'"});
  }
  parsed.config.experiment = experiment;
  if (!parsed.ok()) {
    std::cerr << format_issues(parsed.issues);
    return kExitConfig;
  }
  const RunConfig& cfg = parsed.config;
  const std::filesystem::path out = get<std::string>(cfg.out, "rcm-out/" + experiment);

  Outcome outcome;
  try {
    outcome = dispatch(cfg);
  } catch (const SolverError& e) {
    std::cerr << "numerical error (" << experiment << "): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const CapacityError& e) {
    std::cerr << "numerical error (" << experiment << "): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NonergodicError& e) {
    std::cerr << "numerical error (" << experiment << "): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const SaturationError& e) {
    std::cerr << "numerical error (" << experiment << "): " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "configuration error (" << experiment << "): " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    write_report(out, outcome.report);
    for (const auto& a : outcome.artifacts) {
      std::ofstream os(out / a.file);
      os << a.body;
    }
  } catch (const std::exception& e) {
    std::cerr << "error writing " << out << ": " << e.what() << "\n";
    return kExitConfig;
  }
  write_summary(std::cout, outcome.report);
  return outcome.report.passed() ? kExitPass : kExitTargetFailed;
}
