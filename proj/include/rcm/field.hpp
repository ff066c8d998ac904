#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/lattice.hpp"
#include "rcm/law.hpp"
#include "rcm/rng.hpp"

namespace rcm {

// Edge conductances on a torus, one value per undirected edge in canonical
// edge order. Immutable once built; share freely across threads.
struct ConductanceField {
  Lattice lattice{1, 3};
  std::vector<double> omega;
  std::string law;  // descriptor of the generating law, empty if hand-built
  std::uint64_t seed = 0;
  std::uint64_t realization = 0;

  double operator[](EdgeIndex e) const { return omega[static_cast<std::size_t>(e)]; }

  // Conductance of the edge from x in direction k.
  double at(Site x, int k) const { return omega[static_cast<std::size_t>(lattice.incident_edge(x, k))]; }
};

inline ConductanceField make_field(const Lattice& lat, std::vector<double> omega) {
  if (static_cast<std::int64_t>(omega.size()) != lat.edges()) {
    throw ParameterError("edge array has " + std::to_string(omega.size()) + " values, lattice needs " +
                         std::to_string(lat.edges()));
  }
  for (double w : omega) {
    if (!(w >= 1.0) || !std::isfinite(w)) throw ParameterError("conductances must be finite and >= 1");
  }
  ConductanceField f;
  f.lattice = lat;
  f.omega = std::move(omega);
  return f;
}

inline ConductanceField constant_field(const Lattice& lat, double c = 1.0) {
  return make_field(lat, std::vector<double>(static_cast<std::size_t>(lat.edges()), c));
}

inline constexpr std::int64_t kEdgeBlock = 4096;

// i.i.d. field. Edge block b of realization r draws from the stream
// derive_seed(seed, {r, b}), so the result does not depend on scheduling.
inline ConductanceField sample_field(const ConductanceLaw& law, const Lattice& lat, std::uint64_t seed,
                                     std::uint64_t realization = 0) {
  ConductanceField f;
  f.lattice = lat;
  f.law = law.descriptor();
  f.seed = seed;
  f.realization = realization;
  const std::int64_t m = lat.edges();
  f.omega.resize(static_cast<std::size_t>(m));
  for (std::int64_t b = 0; b * kEdgeBlock < m; ++b) {
    Rng rng(derive_seed(seed, {realization, static_cast<std::uint64_t>(b)}));
    const std::int64_t end = std::min(m, (b + 1) * kEdgeBlock);
    for (std::int64_t e = b * kEdgeBlock; e < end; ++e) f.omega[static_cast<std::size_t>(e)] = law.sample(rng);
  }
  return f;
}

// The shifted environment θ_x ω: reading the edge (y, y+e) returns
// ω_{x+y, x+y+e}. Holds a pointer to the field; no copy.
class EnvView {
 public:
  EnvView(const ConductanceField& f, Site origin) : f_(&f), origin_(origin) {}

  const ConductanceField& field() const noexcept { return *f_; }
  Site origin() const noexcept { return origin_; }

  // Conductance of the edge leaving offset y in direction k.
  double at(const Offset& y, int k) const {
    return f_->at(f_->lattice.translate(origin_, y), k);
  }

  double operator()(const Offset& y, int axis, int sign) const { return at(y, 2 * axis + (sign < 0)); }

  EnvView translate(const Offset& y) const { return EnvView(*f_, f_->lattice.translate(origin_, y)); }

 private:
  const ConductanceField* f_;
  Site origin_;
};

inline EnvView translate(const ConductanceField& f, Site x) { return EnvView(f, x); }

inline double total_jump_rate(const ConductanceField& f, Site x) {
  double s = 0.0;
  for (int k = 0; k < f.lattice.degree(); ++k) s += f.at(x, k);
  return s;
}

inline void write_field(std::ostream& os, const ConductanceField& f) {
  os << "# rcm-field v1\n";
  os << "d=" << f.lattice.dim() << "\n";
  os << "n=" << f.lattice.period() << "\n";
  os << "law=" << f.law << "\n";
  os << "seed=" << f.seed << "\n";
  os << "realization=" << f.realization << "\n";
  os << "edges=" << f.omega.size() << "\n";
  os << std::setprecision(17);
  for (double w : f.omega) os << w << "\n";
}

inline ConductanceField read_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "# rcm-field v1") throw ParameterError("not an rcm-field v1 record");
  int d = 0;
  int n = 0;
  std::string law;
  std::uint64_t seed = 0;
  std::uint64_t realization = 0;
  std::int64_t edges = -1;
  while (edges < 0 && std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("malformed field header line: " + line);
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    try {
      if (key == "d") d = std::stoi(val);
      else if (key == "n") n = std::stoi(val);
      else if (key == "law") law = val;
      else if (key == "seed") seed = std::stoull(val);
      else if (key == "realization") realization = std::stoull(val);
      else if (key == "edges") edges = std::stoll(val);
      else throw ParameterError("unknown field header key: " + key);
    } catch (const std::logic_error&) {
      throw ParameterError("bad value in field header line: " + line);
    }
  }
  Lattice lat(d, n);
  if (edges != lat.edges()) throw ParameterError("edge count does not match lattice");
  std::vector<double> omega;
  omega.reserve(static_cast<std::size_t>(edges));
  double w;
  while (static_cast<std::int64_t>(omega.size()) < edges && is >> w) omega.push_back(w);
  ConductanceField f = make_field(lat, std::move(omega));
  f.law = law;
  f.seed = seed;
  f.realization = realization;
  return f;
}

// Per-edge inspection table: edge, tail site, axis, tail coordinates, omega.
inline void write_field_csv(std::ostream& os, const ConductanceField& f) {
  const Lattice& lat = f.lattice;
  os << "# rcm-csv v1 field-edges\n";
  os << "edge,site,axis";
  for (int a = 0; a < lat.dim(); ++a) os << ",x" << a;
  os << ",omega\n";
  os << std::setprecision(17);
  for (EdgeIndex e = 0; e < lat.edges(); ++e) {
    const Site x = lat.edge_tail(e);
    os << e << ',' << x << ',' << lat.edge_axis(e);
    for (int a = 0; a < lat.dim(); ++a) os << ',' << lat.coord(x, a);
    os << ',' << f[e] << "\n";
  }
}

}  // namespace rcm
