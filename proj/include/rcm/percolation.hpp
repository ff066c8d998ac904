#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/field.hpp"

namespace rcm {

struct SiteClassification {
  double eta = 0.0;
  std::vector<char> good;  // per site: total jump rate <= eta
  double bad_fraction = 0.0;

  bool is_good(Site x) const { return good[static_cast<std::size_t>(x)] != 0; }
  bool is_bad(Site x) const { return good[static_cast<std::size_t>(x)] == 0; }
};

inline SiteClassification classify_sites(const ConductanceField& f, double eta) {
  if (!(eta > 0.0)) throw ParameterError("eta must be > 0");
  SiteClassification c;
  c.eta = eta;
  const std::int64_t n = f.lattice.sites();
  c.good.resize(static_cast<std::size_t>(n));
  std::int64_t bad = 0;
  for (Site x = 0; x < n; ++x) {
    const bool g = total_jump_rate(f, x) <= eta;
    c.good[static_cast<std::size_t>(x)] = g;
    bad += !g;
  }
  c.bad_fraction = static_cast<double>(bad) / static_cast<double>(n);
  return c;
}

namespace detail {

inline double irwin_hall_cdf(int m, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= m) return 1.0;
  // Symmetric form keeps the alternating sum short.
  if (x > 0.5 * m) return 1.0 - irwin_hall_cdf(m, m - x);
  double s = 0.0;
  double binom = 1.0;
  for (int k = 0; k <= static_cast<int>(std::floor(x)); ++k) {
    s += (k % 2 ? -1.0 : 1.0) * binom * std::pow(x - k, m);
    binom = binom * (m - k) / (k + 1);
  }
  return s / std::tgamma(m + 1.0);
}

}  // namespace detail

// Distribution of p_ω(0), the sum of 2d i.i.d. conductances, for laws with
// finitely many atoms. Values within 1e-12 relative are merged.
inline std::vector<std::pair<double, double>> jump_rate_atoms(const ConductanceLaw& law, int d) {
  const auto single = law.atoms();
  if (single.empty()) return {};
  std::map<double, double> dist{{0.0, 1.0}};
  for (int i = 0; i < 2 * d; ++i) {
    std::map<double, double> next;
    for (const auto& [v, p] : dist) {
      for (const auto& [a, q] : single) {
        double key = v + a;
        auto it = next.lower_bound(key * (1 - 1e-12));
        if (it != next.end() && std::abs(it->first - key) <= 1e-12 * key) {
          it->second += p * q;
        } else {
          next[key] += p * q;
        }
      }
    }
    dist.swap(next);
  }
  return {dist.begin(), dist.end()};
}

inline double percolation_threshold_q(int d) { return std::pow(2.0 * d, -(2.0 * d + 1.0)); }

// Smallest support value s of p_ω(0) with P[p_ω(0) > s] below (2d)^{-(2d+1)}.
// Available for discrete laws and the uniform law; empty otherwise.
inline std::optional<double> default_eta(const ConductanceLaw& law, int d) {
  const double q = percolation_threshold_q(d);
  const auto atoms = jump_rate_atoms(law, d);
  if (!atoms.empty()) {
    double above = 1.0;
    for (const auto& [v, p] : atoms) {
      above -= p;
      if (above < q) return v;
    }
    return atoms.back().first;
  }
  if (const auto* u = std::get_if<law::Uniform>(&law.variant())) {
    const int m = 2 * d;
    const double w = u->b - u->a;
    double lo = 0.0;
    double hi = m;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (1.0 - detail::irwin_hall_cdf(m, mid) < q) hi = mid;
      else lo = mid;
    }
    return m * u->a + hi * w;
  }
  return std::nullopt;
}

// Exact P[p_ω(0) > eta] where computable.
inline std::optional<double> bad_probability(const ConductanceLaw& law, int d, double eta) {
  const auto atoms = jump_rate_atoms(law, d);
  if (!atoms.empty()) {
    double s = 0.0;
    for (const auto& [v, p] : atoms) {
      if (v > eta) s += p;
    }
    return s;
  }
  if (const auto* u = std::get_if<law::Uniform>(&law.variant())) {
    const int m = 2 * d;
    return 1.0 - detail::irwin_hall_cdf(m, (eta - m * u->a) / (u->b - u->a));
  }
  return std::nullopt;
}

struct ClusterResult {
  std::vector<Site> sites;   // BFS order
  std::vector<Site> parent;  // parent[i] is the predecessor of sites[i], -1 for a seed
  bool saturated = false;

  std::size_t size() const { return sites.size(); }
  bool contains(Site x) const { return std::find(sites.begin(), sites.end(), x) != sites.end(); }
};

namespace detail {

// Breadth-first closure from the seeds. A visited site is expanded to its
// neighbours when it is bad, or when it is a seed flagged as always
// expanded. Unwrapped displacements are tracked; reaching a site along two
// lifts that differ by a torus period means the set wraps, and the full
// torus is returned with the saturation flag.
inline ClusterResult explore(const Lattice& lat, const SiteClassification& cls,
                             const std::vector<std::pair<Site, Offset>>& seeds, const std::vector<char>& force) {
  ClusterResult out;
  std::unordered_map<Site, Offset> disp;
  std::deque<std::size_t> queue;
  std::vector<char> forced;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto [it, fresh] = disp.emplace(seeds[i].first, seeds[i].second);
    if (!fresh) continue;
    out.sites.push_back(seeds[i].first);
    out.parent.push_back(-1);
    forced.push_back(force[i]);
    queue.push_back(out.sites.size() - 1);
  }
  const int dim = lat.dim();
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const Site u = out.sites[i];
    if (!forced[i] && !cls.is_bad(u)) continue;
    const Offset du = disp.at(u);
    for (int k = 0; k < 2 * dim; ++k) {
      const Site v = lat.neighbour(u, k);
      Offset dv = du;
      dv[k / 2] += (k % 2) ? -1 : 1;
      auto it = disp.find(v);
      if (it != disp.end()) {
        if (it->second != dv) {
          out.saturated = true;
          break;
        }
        continue;
      }
      disp.emplace(v, dv);
      out.sites.push_back(v);
      out.parent.push_back(u);
      forced.push_back(0);
      queue.push_back(out.sites.size() - 1);
    }
    if (out.saturated) break;
  }
  if (out.saturated) {
    out.sites.resize(static_cast<std::size_t>(lat.sites()));
    out.parent.assign(out.sites.size(), -1);
    for (Site x = 0; x < lat.sites(); ++x) out.sites[static_cast<std::size_t>(x)] = x;
  }
  return out;
}

}  // namespace detail

// Sites reachable from the origin by a nearest-neighbour path whose interior
// points are all bad. The parent array certifies every member.
inline ClusterResult bad_cluster(const ConductanceField& f, const SiteClassification& cls, Site origin) {
  return detail::explore(f.lattice, cls, {{origin, Offset{}}}, {1});
}

inline ClusterResult bad_cluster(const ConductanceField& f, double eta, Site origin) {
  return bad_cluster(f, classify_sites(f, eta), origin);
}

// Endpoints of edge e plus everything reachable from them through bad points
// (an endpoint propagates only when it is bad itself).
inline ClusterResult extended_vertex_set(const ConductanceField& f, const SiteClassification& cls, EdgeIndex e) {
  const Lattice& lat = f.lattice;
  const int axis = lat.edge_axis(e);
  return detail::explore(lat, cls, {{lat.edge_tail(e), Offset{}}, {lat.edge_head(e), unit(axis)}}, {0, 0});
}

struct WStatistic {
  double w = 0.0;
  std::size_t cluster_size = 0;
  double bound = 0.0;  // 2d |C|^2
  bool bound_holds = true;
  std::int64_t edges_counted = 0;
};

// W(ω) = Σ_e |V̄(e)| 1{origin ∈ V̄(e)}. Only edges touching the cluster of
// the origin can contribute, so those are the ones enumerated.
inline WStatistic w_statistic(const ConductanceField& f, double eta, Site origin) {
  const Lattice& lat = f.lattice;
  const auto cls = classify_sites(f, eta);
  const auto cluster = bad_cluster(f, cls, origin);
  if (cluster.saturated) {
    throw SaturationError("bad cluster wraps the torus; torus too small for this eta and law");
  }
  std::vector<EdgeIndex> candidates;
  for (Site x : cluster.sites) {
    for (int k = 0; k < lat.degree(); ++k) candidates.push_back(lat.incident_edge(x, k));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  WStatistic out;
  out.cluster_size = cluster.size();
  for (EdgeIndex e : candidates) {
    const auto v = extended_vertex_set(f, cls, e);
    if (v.saturated) throw SaturationError("extended vertex set wraps the torus");
    if (v.contains(origin)) {
      out.w += static_cast<double>(v.size());
      ++out.edges_counted;
    }
  }
  const double c = static_cast<double>(out.cluster_size);
  out.bound = 2.0 * lat.dim() * c * c;
  out.bound_holds = out.w <= out.bound;
  return out;
}

}  // namespace rcm
