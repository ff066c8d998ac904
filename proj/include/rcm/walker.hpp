#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/field.hpp"
#include "rcm/functionals.hpp"
#include "rcm/parallel.hpp"
#include "rcm/rng.hpp"

namespace rcm {

struct JumpEvent {
  double time = 0.0;
  Site site = 0;  // destination
  int direction = 0;  // k in 0..2d-1 (see Lattice::neighbour)
};

struct Trajectory {
  Lattice lattice{1, 3};
  Site start = 0;
  double horizon = 0.0;
  std::vector<JumpEvent> events;

  // Number of jumps made in [0, t].
  std::size_t jumps_until(double t) const {
    auto it = std::upper_bound(events.begin(), events.end(), t,
                               [](double v, const JumpEvent& e) { return v < e.time; });
    return static_cast<std::size_t>(it - events.begin());
  }

  Site position_at(double t) const {
    const std::size_t j = jumps_until(t);
    return j == 0 ? start : events[j - 1].site;
  }

  // Net jump vector after the first `jumps` events.
  Offset displacement_after(std::size_t jumps) const {
    Offset o{};
    for (std::size_t i = 0; i < jumps; ++i) o[events[i].direction / 2] += (events[i].direction % 2) ? -1 : 1;
    return o;
  }

  Offset displacement_at(double t) const { return displacement_after(jumps_until(t)); }
};

namespace detail {

// Exact event-driven kernel. Both walkers go through here: the holding time
// is Exp(total rate) and the move is picked by inverting the cumulative
// rates with one uniform, so a constant unit field and the simple walk
// produce the same path from the same stream.
template <typename Rates, typename OnJump>
void run_walk(const Lattice& lat, Rates&& rates, Site start, double horizon, Rng& rng, OnJump&& on_jump) {
  const int deg = lat.degree();
  double r[2 * kMaxDim];
  Site x = start;
  double t = 0.0;
  while (true) {
    double total = 0.0;
    rates(x, r);
    for (int k = 0; k < deg; ++k) total += r[k];
    t += rng.exponential(total);
    const double u = rng.uniform() * total;
    if (t > horizon) return;
    double acc = 0.0;
    int k = 0;
    for (; k < deg - 1; ++k) {
      acc += r[k];
      if (u < acc) break;
    }
    x = lat.neighbour(x, k);
    on_jump(t, x, k);
  }
}

inline auto field_rates(const ConductanceField& f) {
  return [&f](Site x, double* r) {
    for (int k = 0; k < f.lattice.degree(); ++k) r[k] = f.at(x, k);
  };
}

inline auto unit_rates(const Lattice& lat) {
  return [deg = lat.degree()](Site, double* r) {
    for (int k = 0; k < deg; ++k) r[k] = 1.0;
  };
}

}  // namespace detail

inline Trajectory simulate_vsrw(const ConductanceField& f, Site start, double horizon, Rng& rng) {
  if (!(horizon > 0.0)) throw RangeError("horizon must be > 0");
  Trajectory tr{f.lattice, start, horizon, {}};
  detail::run_walk(f.lattice, detail::field_rates(f), start, horizon, rng,
                   [&](double t, Site x, int k) { tr.events.push_back({t, x, k}); });
  return tr;
}

inline Trajectory simulate_srw(const Lattice& lat, Site start, double horizon, Rng& rng) {
  if (!(horizon > 0.0)) throw RangeError("horizon must be > 0");
  Trajectory tr{lat, start, horizon, {}};
  detail::run_walk(lat, detail::unit_rates(lat), start, horizon, rng,
                   [&](double t, Site x, int k) { tr.events.push_back({t, x, k}); });
  return tr;
}

// f(θ_{X_t} ω) at each requested time.
inline std::vector<double> env_samples(const ConductanceField& field, const LocalFunctional& f, const Trajectory& tr,
                                       const std::vector<double>& times) {
  check_stencil(f, field.lattice);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t < 0.0 || t > tr.horizon) throw RangeError("sampling time outside [0, horizon]");
    out.push_back(evaluate_unchecked(f, field, tr.position_at(t)));
  }
  return out;
}

// Z_t = ∫_0^t f(ω(s)) ds, summed exactly over sojourns.
inline double additive_functional(const ConductanceField& field, const LocalFunctional& f, const Trajectory& tr,
                                  double t) {
  if (t < 0.0 || t > tr.horizon) throw RangeError("t outside [0, horizon]");
  check_stencil(f, field.lattice);
  KahanSum z;
  double prev = 0.0;
  Site x = tr.start;
  for (const auto& e : tr.events) {
    if (e.time >= t) break;
    z.add((e.time - prev) * evaluate_unchecked(f, field, x));
    prev = e.time;
    x = e.site;
  }
  z.add((t - prev) * evaluate_unchecked(f, field, x));
  return z.value();
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  const int d = tr.lattice.dim();
  os << "# rcm-csv v1 trajectory\n";
  os << "time,site";
  for (int a = 0; a < d; ++a) os << ",u" << a;
  os << "\n" << std::setprecision(17);
  Offset u{};
  os << 0.0 << ',' << tr.start;
  for (int a = 0; a < d; ++a) os << ',' << u[a];
  os << "\n";
  for (const auto& e : tr.events) {
    u[e.direction / 2] += (e.direction % 2) ? -1 : 1;
    os << e.time << ',' << e.site;
    for (int a = 0; a < d; ++a) os << ',' << u[a];
    os << "\n";
  }
}

enum class WalkerKind { Conductance, Simple };

struct EnsembleConfig {
  ConductanceLaw law = ConductanceLaw::constant(1.0);
  Lattice lattice{1, 3};
  WalkerKind kind = WalkerKind::Conductance;
  int realizations = 1;
  int walks_per_field = 1;
  double horizon = 1.0;
  std::vector<double> times;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const {
    if (realizations < 1 || walks_per_field < 1) throw ParameterError("counts must be >= 1");
    if (!(horizon > 0.0)) throw ParameterError("horizon must be > 0");
    if (times.empty()) throw ParameterError("need at least one sampling time");
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] < 0.0 || times[i] > horizon) throw ParameterError("sampling times must lie in [0, horizon]");
      if (i > 0 && !(times[i] > times[i - 1])) throw ParameterError("sampling times must be increasing");
    }
  }
};

struct MsdPoint {
  double t = 0.0;
  double msd_over_t = 0.0;
  double se = 0.0;
};

// E[‖X_t‖²]/t with unwrapped displacement. The walk starts at the origin of
// each field (all sites are equivalent in law). Per-field averages over its
// walks are the independent units for the standard error.
inline std::vector<MsdPoint> msd_estimate(const EnsembleConfig& cfg) {
  cfg.validate();
  const std::size_t nt = cfg.times.size();
  const std::size_t units = static_cast<std::size_t>(cfg.realizations);
  std::vector<std::vector<double>> per_unit(nt, std::vector<double>(units, 0.0));
  const std::uint64_t field_tag = hash_name("msd-field");
  const std::uint64_t walk_tag = hash_name("msd-walk");
  parallel_for(cfg.realizations, cfg.workers, [&](std::int64_t r) {
    ConductanceField field;
    if (cfg.kind == WalkerKind::Conductance) {
      field = sample_field(cfg.law, cfg.lattice, derive_seed(cfg.seed, {field_tag}), static_cast<std::uint64_t>(r));
    }
    std::vector<KahanSum> acc(nt);
    for (int w = 0; w < cfg.walks_per_field; ++w) {
      Rng rng(derive_seed(cfg.seed, {walk_tag, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(w)}));
      Offset u{};
      std::size_t next = 0;
      auto flush_until = [&](double t) {
        while (next < nt && cfg.times[next] < t) {
          double s = 0.0;
          for (int a = 0; a < cfg.lattice.dim(); ++a) s += static_cast<double>(u[a]) * u[a];
          acc[next].add(s);
          ++next;
        }
      };
      auto on_jump = [&](double t, Site, int k) {
        flush_until(t);
        u[k / 2] += (k % 2) ? -1 : 1;
      };
      if (cfg.kind == WalkerKind::Conductance) {
        detail::run_walk(cfg.lattice, detail::field_rates(field), 0, cfg.horizon, rng, on_jump);
      } else {
        detail::run_walk(cfg.lattice, detail::unit_rates(cfg.lattice), 0, cfg.horizon, rng, on_jump);
      }
      flush_until(std::numeric_limits<double>::infinity());
    }
    for (std::size_t i = 0; i < nt; ++i) {
      per_unit[i][static_cast<std::size_t>(r)] = acc[i].value() / cfg.walks_per_field;
    }
  });
  std::vector<MsdPoint> out;
  for (std::size_t i = 0; i < nt; ++i) {
    const double t = cfg.times[i];
    const auto ms = mean_se(per_unit[i]);
    if (t == 0.0) {
      out.push_back({t, 0.0, 0.0});
    } else {
      out.push_back({t, ms.mean / t, ms.se / t});
    }
  }
  return out;
}

}  // namespace rcm
