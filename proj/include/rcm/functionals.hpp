#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/field.hpp"
#include "rcm/parallel.hpp"

namespace rcm {

// Edge (base, base + e_axis) relative to the evaluation point.
struct StencilEdge {
  Offset base{};
  int axis = 0;
};

// Function of finitely many conductances around the origin. The evaluator
// only ever sees the values of the declared stencil edges, in stencil order.
struct LocalFunctional {
  std::string name;
  std::vector<StencilEdge> stencil;
  std::function<double(std::span<const double>)> evaluator;
  std::vector<double> oscillation;  // |∇f|(e) per stencil edge; empty if unknown
  std::optional<double> sup_bound;
  std::optional<double> mean_hint;

  // Largest coordinate of any site touched by the stencil.
  int radius() const {
    int r = 0;
    for (const auto& s : stencil) {
      for (int a = 0; a < kMaxDim; ++a) {
        const int hi = s.base[a] + (a == s.axis ? 1 : 0);
        r = std::max({r, std::abs(s.base[a]), std::abs(hi)});
      }
    }
    return r;
  }

  int max_dim() const {
    int m = 1;
    for (const auto& s : stencil) {
      m = std::max(m, s.axis + 1);
      for (int a = 0; a < kMaxDim; ++a) {
        if (s.base[a] != 0) m = std::max(m, a + 1);
      }
    }
    return m;
  }

  double operator()(std::span<const double> values) const { return evaluator(values); }
};

inline void check_stencil(const LocalFunctional& f, const Lattice& lat, int extra = 0) {
  if (f.max_dim() > lat.dim()) throw ParameterError("functional '" + f.name + "' needs a higher dimension");
  if (2 * (f.radius() + extra) >= lat.period()) {
    throw AliasingError("stencil of '" + f.name + "' (radius " + std::to_string(f.radius() + extra) +
                        ") wraps a torus of period " + std::to_string(lat.period()));
  }
}

// f(θ_x ω) without the aliasing check; callers check once up front.
inline double evaluate_unchecked(const LocalFunctional& f, const ConductanceField& field, Site x) {
  constexpr std::size_t kInline = 16;
  double buf[kInline];
  std::vector<double> heap;
  double* vals = buf;
  if (f.stencil.size() > kInline) {
    heap.resize(f.stencil.size());
    vals = heap.data();
  }
  const Lattice& lat = field.lattice;
  for (std::size_t i = 0; i < f.stencil.size(); ++i) {
    const Site y = lat.translate(x, f.stencil[i].base);
    vals[i] = field[lat.edge(y, f.stencil[i].axis)];
  }
  return f.evaluator(std::span<const double>(vals, f.stencil.size()));
}

inline double evaluate_at(const LocalFunctional& f, const ConductanceField& field, Site x) {
  check_stencil(f, field.lattice);
  return evaluate_unchecked(f, field, x);
}

// g(x) = f(θ_x ω) for every site.
inline std::vector<double> evaluate_all(const LocalFunctional& f, const ConductanceField& field) {
  check_stencil(f, field.lattice);
  std::vector<double> g(static_cast<std::size_t>(field.lattice.sites()));
  for (Site x = 0; x < field.lattice.sites(); ++x) g[static_cast<std::size_t>(x)] = evaluate_unchecked(f, field, x);
  return g;
}

// S_n(f) = Σ_{x ∈ center + [-n_box, n_box]^d} f(θ_x ω).
inline double spatial_sum(const LocalFunctional& f, const ConductanceField& field, int n_box, Site center) {
  if (n_box < 0) throw ParameterError("box radius must be >= 0");
  check_stencil(f, field.lattice, n_box);
  const Lattice& lat = field.lattice;
  const int d = lat.dim();
  const int side = 2 * n_box + 1;
  std::int64_t count = 1;
  for (int a = 0; a < d; ++a) count *= side;
  KahanSum s;
  Offset off{};
  for (std::int64_t i = 0; i < count; ++i) {
    std::int64_t r = i;
    for (int a = 0; a < d; ++a) {
      off[a] = static_cast<int>(r % side) - n_box;
      r /= side;
    }
    s.add(evaluate_unchecked(f, field, lat.translate(center, off)));
  }
  return s.value();
}

inline std::int64_t box_volume(int d, int n_box) {
  std::int64_t v = 1;
  for (int a = 0; a < d; ++a) v *= 2 * n_box + 1;
  return v;
}

// |||f||| = Σ_e |∇f|(e).
inline double triple_norm(const LocalFunctional& f) {
  if (f.oscillation.size() != f.stencil.size()) {
    throw DeclarationError("functional '" + f.name + "' has no oscillation bounds");
  }
  double s = 0.0;
  for (double o : f.oscillation) s += o;
  return s;
}

// N(f) = |||f|||² + ‖f‖²_∞.
inline double big_N(const LocalFunctional& f) {
  const double t = triple_norm(f);
  if (!f.sup_bound) throw DeclarationError("functional '" + f.name + "' has no sup bound");
  if (!std::isfinite(t) || !std::isfinite(*f.sup_bound)) {
    throw DeclarationError("functional '" + f.name + "' is unbounded under this law");
  }
  return t * t + *f.sup_bound * *f.sup_bound;
}

// ---------------------------------------------------------------------------
// Factories

inline LocalFunctional constant_functional(double c) {
  LocalFunctional f;
  f.name = c == 0.0 ? "zero" : "constant";
  f.evaluator = [c](std::span<const double>) { return c; };
  f.sup_bound = std::abs(c);
  f.mean_hint = c;
  return f;
}

// 𝔡(ω) = ω_{0,e1} − ω_{0,−e1}.
inline LocalFunctional local_drift(const ConductanceLaw& law) {
  LocalFunctional f;
  f.name = "drift";
  f.stencil = {{Offset{}, 0}, {unit(0, -1), 0}};
  f.evaluator = [](std::span<const double> v) { return v[0] - v[1]; };
  const double osc = law.support_max() - law.support_min();
  f.oscillation = {osc, osc};
  f.sup_bound = osc;
  f.mean_hint = 0.0;
  return f;
}

// ω_{0,e1} − E[ω].
inline LocalFunctional centered_edge(const ConductanceLaw& law) {
  LocalFunctional f;
  f.name = "edge";
  const double m = law.mean();
  f.stencil = {{Offset{}, 0}};
  f.evaluator = [m](std::span<const double> v) { return v[0] - m; };
  const double lo = law.support_min();
  const double hi = law.support_max();
  f.oscillation = {hi - lo};
  f.sup_bound = std::max(hi - m, m - lo);
  f.mean_hint = 0.0;
  return f;
}

// f(ω) = ω_{−1,0} + (ω_{2,3})², evaluated on the unscaled conductances
// a·ω when the field was generated by a law rescaled by 1/a.
inline LocalFunctional contract_example(const ConductanceLaw& law, double scale = 1.0) {
  LocalFunctional f;
  f.name = "contract-example";
  f.stencil = {{unit(0, -1), 0}, {unit(0, 2), 0}};
  f.evaluator = [scale](std::span<const double> v) {
    const double b = scale * v[1];
    return scale * v[0] + b * b;
  };
  const double lo = scale * law.support_min();
  const double hi = scale * law.support_max();
  f.oscillation = {hi - lo, hi * hi - lo * lo};
  f.sup_bound = hi + hi * hi;
  f.mean_hint = scale * law.moment(1) + scale * scale * law.moment(2);
  return f;
}

// Sum of monomials c·ω_e^k of single edges plus a constant, written as
//   "poly: 1*[-1;0] + 1*[2;0]^2 - 0.5"
// where [x0,x1,...;axis] is the edge (x, x + e_axis).
inline LocalFunctional parse_polynomial(const std::string& text, const ConductanceLaw& law) {
  std::string body = text;
  if (body.rfind("poly:", 0) == 0) body = body.substr(5);
  struct Term {
    double coef;
    int edge;
    int power;
  };
  std::vector<Term> terms;
  double constant = 0.0;
  std::vector<StencilEdge> stencil;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
  };
  auto fail = [&](const std::string& why) -> void {
    throw ParameterError("polynomial functional: " + why + " at position " + std::to_string(i) + " in '" + text + "'");
  };
  auto number = [&]() -> double {
    skip();
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(body.substr(i), &used);
    } catch (const std::exception&) {
      fail("expected a number");
    }
    i += used;
    return v;
  };
  bool first = true;
  while (true) {
    skip();
    if (i >= body.size()) break;
    double sign = 1.0;
    if (body[i] == '+' || body[i] == '-') {
      sign = body[i] == '-' ? -1.0 : 1.0;
      ++i;
      skip();
    } else if (!first) {
      fail("expected '+' or '-'");
    }
    first = false;
    double coef = 1.0;
    if (i < body.size() && body[i] != '[') {
      coef = number();
      skip();
      if (i < body.size() && body[i] == '*') {
        ++i;
        skip();
      } else {
        constant += sign * coef;
        continue;
      }
    }
    if (i >= body.size() || body[i] != '[') fail("expected '['");
    ++i;
    StencilEdge se;
    int a = 0;
    while (true) {
      const double c = number();
      if (a >= kMaxDim) fail("too many coordinates");
      se.base[a++] = static_cast<int>(c);
      skip();
      if (i < body.size() && body[i] == ',') {
        ++i;
        continue;
      }
      if (i < body.size() && body[i] == ';') {
        ++i;
        break;
      }
      fail("expected ',' or ';'");
    }
    se.axis = static_cast<int>(number());
    if (se.axis < 0 || se.axis >= kMaxDim) fail("bad axis");
    skip();
    if (i >= body.size() || body[i] != ']') fail("expected ']'");
    ++i;
    skip();
    int power = 1;
    if (i < body.size() && body[i] == '^') {
      ++i;
      power = static_cast<int>(number());
      if (power < 1) fail("power must be >= 1");
    }
    int idx = -1;
    for (std::size_t k = 0; k < stencil.size(); ++k) {
      if (stencil[k].base == se.base && stencil[k].axis == se.axis) idx = static_cast<int>(k);
    }
    if (idx < 0) {
      idx = static_cast<int>(stencil.size());
      stencil.push_back(se);
    }
    terms.push_back({sign * coef, idx, power});
  }
  LocalFunctional f;
  f.name = "poly";
  f.stencil = stencil;
  f.evaluator = [terms, constant](std::span<const double> v) {
    double s = constant;
    for (const auto& t : terms) s += t.coef * std::pow(v[static_cast<std::size_t>(t.edge)], t.power);
    return s;
  };
  const double lo = law.support_min();
  const double hi = law.support_max();
  f.oscillation.assign(stencil.size(), 0.0);
  double sup = std::abs(constant);
  double mean = constant;
  for (const auto& t : terms) {
    const double span = std::pow(hi, t.power) - std::pow(lo, t.power);
    f.oscillation[static_cast<std::size_t>(t.edge)] += std::abs(t.coef) * span;
    sup += std::abs(t.coef) * std::pow(hi, t.power);
    mean += t.coef * law.moment(t.power);
  }
  f.sup_bound = sup;
  f.mean_hint = mean;
  return f;
}

// Registry: "drift", "edge", "contract-example", "zero", "constant:c", "poly:...".
inline LocalFunctional functional_by_name(const std::string& name, const ConductanceLaw& law) {
  if (name == "drift") return local_drift(law);
  if (name == "edge") return centered_edge(law);
  if (name == "contract-example") return contract_example(law);
  if (name == "zero") return constant_functional(0.0);
  if (name.rfind("constant:", 0) == 0) {
    try {
      return constant_functional(std::stod(name.substr(9)));
    } catch (const std::exception&) {
      throw ParameterError("bad constant functional '" + name + "'");
    }
  }
  if (name.rfind("poly:", 0) == 0) return parse_polynomial(name, law);
  throw ParameterError("unknown functional '" + name + "'");
}

inline std::vector<std::string> functional_names() {
  return {"drift", "edge", "contract-example", "zero", "constant:<c>", "poly:<terms>"};
}

// ---------------------------------------------------------------------------
// 𝒩(f) = sup_n E[S_n(f)²]/|B_n|, Monte Carlo over fresh fields.

struct ScriptNRow {
  int n = 0;
  double value = 0.0;  // E[S_n²]/|B_n|
  double se = 0.0;
};

struct ScriptNEstimate {
  std::vector<ScriptNRow> table;
  double sup = 0.0;
  int argmax = 0;
  bool divergent = false;
};

inline ScriptNEstimate estimate_script_N(const LocalFunctional& f, const ConductanceLaw& law, const Lattice& lat,
                                         int n_max, int realizations, std::uint64_t seed, int workers = 1) {
  if (n_max < 0) throw ParameterError("n_max must be >= 0");
  if (realizations < 2) throw ParameterError("need at least 2 realizations");
  check_stencil(f, lat, n_max);
  const std::size_t rows = static_cast<std::size_t>(n_max + 1);
  std::vector<std::vector<double>> samples(rows, std::vector<double>(static_cast<std::size_t>(realizations)));
  const std::uint64_t tag = hash_name("script-N");
  parallel_for(realizations, workers, [&](std::int64_t r) {
    const auto field = sample_field(law, lat, derive_seed(seed, {tag}), static_cast<std::uint64_t>(r));
    for (int n = 0; n <= n_max; ++n) {
      const double s = spatial_sum(f, field, n, 0);
      samples[static_cast<std::size_t>(n)][static_cast<std::size_t>(r)] =
          s * s / static_cast<double>(box_volume(lat.dim(), n));
    }
  });
  ScriptNEstimate out;
  for (int n = 0; n <= n_max; ++n) {
    const auto ms = mean_se(samples[static_cast<std::size_t>(n)]);
    out.table.push_back({n, ms.mean, ms.se});
    if (n == 0 || ms.mean > out.sup) {
      out.sup = ms.mean;
      out.argmax = n;
    }
  }
  // Growth over the last three box sizes, beyond 3 pooled standard errors.
  if (out.table.size() >= 3) {
    const auto& a = out.table[rows - 3];
    const auto& b = out.table[rows - 2];
    const auto& c = out.table[rows - 1];
    const double pooled = std::sqrt(a.se * a.se + c.se * c.se);
    out.divergent = a.value < b.value && b.value < c.value && c.value - a.value > 3.0 * pooled;
  }
  if (f.mean_hint && std::abs(*f.mean_hint) > 1e-12) out.divergent = true;
  if (out.divergent) out.sup = std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace rcm
