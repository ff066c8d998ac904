#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/fit.hpp"
#include "rcm/operators.hpp"
#include "rcm/parallel.hpp"

namespace rcm {

inline constexpr double kZeroMassTolerance = 1e-10;

// Atomic measure Σ w_i δ_{λ_i}, λ ascending.
struct SpectralMeasure {
  std::vector<double> lambda;
  std::vector<double> weight;
  double removed_mean = 0.0;  // mean subtracted before projecting

  std::size_t size() const noexcept { return lambda.size(); }

  double total_mass() const {
    KahanSum s;
    for (double w : weight) s.add(w);
    return s.value();
  }

  // Mass sitting at eigenvalue 0.
  double zero_mass() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      if (lambda[i] < kZeroEigenvalue) s += weight[i];
    }
    return s;
  }

  void require_ergodic() const {
    if (zero_mass() > kZeroMassTolerance) {
      throw NonergodicError("spectral measure carries mass " + std::to_string(zero_mass()) + " at eigenvalue 0");
    }
  }

  void validate() const {
    if (lambda.size() != weight.size()) throw ParameterError("measure arrays differ in length");
    for (std::size_t i = 0; i < size(); ++i) {
      if (lambda[i] < 0.0 || weight[i] < 0.0) throw ParameterError("measure atoms must be nonnegative");
      if (i > 0 && lambda[i] < lambda[i - 1]) throw ParameterError("measure atoms must be sorted");
    }
  }

  static SpectralMeasure single(double lambda, double weight) { return {{lambda}, {weight}, 0.0}; }
};

// Atoms (λ_i, ⟨ψ_i, g⟩²/|T|) from an eigendecomposition of −L. With
// `center`, the site mean of g is removed first.
inline SpectralMeasure spectral_measure(const DenseSpectrum& s, const FieldFunction& g, bool center = true) {
  if (static_cast<Eigen::Index>(g.size()) != s.lambda.size()) throw ParameterError("dimension mismatch");
  FieldFunction h = center ? g.centered() : g;
  const Eigen::Map<const Eigen::VectorXd> hv(h.values.data(), static_cast<Eigen::Index>(h.size()));
  const Eigen::VectorXd c = s.vectors.transpose() * hv;
  SpectralMeasure m;
  m.removed_mean = center ? g.mean() : 0.0;
  const double inv = 1.0 / static_cast<double>(g.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    m.lambda.push_back(std::max(0.0, s.lambda(i)));
    m.weight.push_back(c(i) * c(i) * inv);
  }
  if (center) {
    // The constant direction is exactly orthogonal to a centered vector.
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m.lambda[i] == 0.0 && m.weight[i] < 1e-24 + 1e-14 * h.mean_square()) m.weight[i] = 0.0;
    }
  }
  return m;
}

inline SpectralMeasure spectral_measure(const TorusOperator& op, const FieldFunction& g, bool center = true) {
  return spectral_measure(dense_spectrum(op), g, center);
}

// Σ w e^{−2λt}.
inline double variance_at(const SpectralMeasure& m, double t) {
  if (t < 0.0) throw RangeError("time must be >= 0");
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) s.add(m.weight[i] * std::exp(-2.0 * m.lambda[i] * t));
  return s.value();
}

inline DecayCurve variance_curve(const SpectralMeasure& m, const std::vector<double>& times) {
  DecayCurve c;
  for (double t : times) c.samples.push_back({t, variance_at(m, t), 0.0});
  c.validate();
  return c;
}

// Σ_{λ ≤ δ} w/λ.
inline double spectral_tail(const SpectralMeasure& m, double delta) {
  m.require_ergodic();
  KahanSum s;
  for (std::size_t i = 0; i < m.size() && m.lambda[i] <= delta; ++i) {
    if (m.lambda[i] >= kZeroEigenvalue) s.add(m.weight[i] / m.lambda[i]);
  }
  return s.value();
}

// σ² = 2 Σ w/λ.
inline double sigma_squared(const SpectralMeasure& m) {
  m.require_ergodic();
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.lambda[i] >= kZeroEigenvalue) s.add(m.weight[i] / m.lambda[i]);
  }
  return 2.0 * s.value();
}

// Ē[ξ_t²]/t = 2 Σ w (1 − e^{−λt})/(λ² t).
inline double xi_variance(const SpectralMeasure& m, double t) {
  if (!(t > 0.0)) throw RangeError("t must be > 0");
  m.require_ergodic();
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double l = m.lambda[i];
    if (l < kZeroEigenvalue) continue;
    const double x = l * t;
    s.add(m.weight[i] * (-std::expm1(-x)) / (l * x));
  }
  return 2.0 * s.value();
}

// Ē[Z_t²] = 2 Σ w (e^{−λt} − 1 + λt)/λ²; atoms at 0 contribute w t².
inline double zt_variance(const SpectralMeasure& m, double t) {
  if (t < 0.0) throw RangeError("t must be >= 0");
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double l = m.lambda[i];
    const double x = l * t;
    double v;
    if (x < 1e-4) {
      v = m.weight[i] * t * t * (1.0 - x / 3.0 + x * x / 12.0);
    } else {
      v = 2.0 * m.weight[i] * (std::expm1(-x) + x) / (l * l);
    }
    s.add(v);
  }
  return s.value();
}

inline double psi_alpha(double alpha, double t) {
  if (!(alpha > 1.0)) throw ParameterError("psi_alpha needs alpha > 1");
  if (t < 0.0) throw RangeError("t must be >= 0");
  if (alpha < 2.0) return std::pow(t, alpha - 1.0);
  if (alpha == 2.0) return t / std::max(1.0, std::log(t));
  return t;
}

// I_{k,μ} = Σ w (μ² + (2−k)λμ)/(λ(λ+μ)²).
inline double i_k_mu(const SpectralMeasure& m, double k, double mu) {
  if (!(mu > 0.0)) throw ParameterError("mu must be > 0");
  m.require_ergodic();
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double l = m.lambda[i];
    if (l < kZeroEigenvalue) continue;
    const double den = l + mu;
    s.add(m.weight[i] * (mu * mu + (2.0 - k) * l * mu) / (l * den * den));
  }
  return s.value();
}

// E[(R_μ f)²] = Σ w/(λ+μ)².
inline double resolvent_second_moment(const SpectralMeasure& m, double mu) {
  if (!(mu > 0.0)) throw ParameterError("mu must be > 0");
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double den = m.lambda[i] + mu;
    s.add(m.weight[i] / (den * den));
  }
  return s.value();
}

// ⟨R_μ f, f⟩ = Σ w/(λ+μ).
inline double resolvent_form(const SpectralMeasure& m, double mu) {
  if (!(mu > 0.0)) throw ParameterError("mu must be > 0");
  KahanSum s;
  for (std::size_t i = 0; i < m.size(); ++i) s.add(m.weight[i] / (m.lambda[i] + mu));
  return s.value();
}

// ---------------------------------------------------------------------------
// A-estimators of σ̄²/2 at an approximate corrector φ.

struct AEstimates {
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double phi_square = 0.0;     // E[φ²]
  double chain_residual = 0.0; // max relative deviation of the chain, if μ given
};

// 𝔡 as a function on the sites: ω_{x,x+e1} − ω_{x−e1,x}.
inline FieldFunction drift_function(const ConductanceField& field) {
  const Lattice& lat = field.lattice;
  FieldFunction g = FieldFunction::zeros(lat);
  for (Site x = 0; x < lat.sites(); ++x) g[static_cast<std::size_t>(x)] = field.at(x, 0) - field.at(x, 1);
  return g;
}

inline AEstimates a_estimators(const ConductanceField& field, const FieldFunction& phi,
                               std::optional<double> mu_used = std::nullopt) {
  const Lattice& lat = field.lattice;
  if (!(phi.lattice == lat) || static_cast<std::int64_t>(phi.size()) != lat.sites()) {
    throw ParameterError("corrector dimension does not match the field");
  }
  const std::int64_t n = lat.sites();
  const int deg = lat.degree();
  KahanSum mean_w, energy, a1, a2, sq;
  for (Site x = 0; x < n; ++x) {
    const double px = phi[static_cast<std::size_t>(x)];
    const double w1 = field.at(x, 0);
    const double grad1 = phi[static_cast<std::size_t>(lat.neighbour(x, 0))] - px;
    mean_w.add(w1);
    a1.add(w1 * (1.0 + grad1));
    sq.add(px * px);
    for (int k = 0; k < deg; ++k) {
      const double w = field.at(x, k);
      const double grad = phi[static_cast<std::size_t>(lat.neighbour(x, k))] - px;
      const double e1z = k == 0 ? 1.0 : (k == 1 ? -1.0 : 0.0);
      const double v = e1z + grad;
      a2.add(0.5 * w * v * v);
      if (k % 2 == 0) energy.add(w * grad * grad);
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  AEstimates r;
  r.a0 = mean_w.value() * inv - energy.value() * inv;
  r.a1 = a1.value() * inv;
  r.a2 = a2.value() * inv;
  r.phi_square = sq.value() * inv;
  if (mu_used) {
    const double m = *mu_used * r.phi_square;
    const double scale = std::max({std::abs(r.a0), std::abs(r.a1), std::abs(r.a2), 1e-300});
    r.chain_residual = std::max(std::abs(r.a0 - (r.a1 + m)), std::abs(r.a0 - (r.a2 + 2.0 * m))) / scale;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic measures and IO.

// Discretization of λ^{β−1} dλ on [lo, 1]: `atoms` geometric cells, each
// carrying its exact mass at the geometric midpoint.
inline SpectralMeasure power_law_measure(double beta, std::size_t atoms = 10000, double lo = 1e-6) {
  if (!(beta > 0.0)) throw ParameterError("power-law exponent must be > 0");
  SpectralMeasure m;
  const double ratio = std::pow(1.0 / lo, 1.0 / static_cast<double>(atoms));
  double a = lo;
  for (std::size_t i = 0; i < atoms; ++i) {
    const double b = (i + 1 == atoms) ? 1.0 : a * ratio;
    m.lambda.push_back(std::sqrt(a * b));
    m.weight.push_back((std::pow(b, beta) - std::pow(a, beta)) / beta);
    a = b;
  }
  return m;
}

inline void write_measure_csv(std::ostream& os, const SpectralMeasure& m) {
  os << "# rcm-csv v1 measure\n";
  os << "lambda,weight\n" << std::setprecision(17);
  for (std::size_t i = 0; i < m.size(); ++i) os << m.lambda[i] << ',' << m.weight[i] << "\n";
}

inline SpectralMeasure read_measure_csv(std::istream& is) {
  SpectralMeasure m;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "lambda,weight") throw ParameterError("measure CSV must start with 'lambda,weight'");
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
      throw ParameterError("measure CSV line " + std::to_string(lineno) + ": expected two columns");
    }
    try {
      m.lambda.push_back(std::stod(a));
      m.weight.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw ParameterError("measure CSV line " + std::to_string(lineno) + ": not a number");
    }
  }
  std::vector<std::size_t> idx(m.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return m.lambda[x] < m.lambda[y]; });
  SpectralMeasure s;
  for (auto i : idx) {
    s.lambda.push_back(m.lambda[i]);
    s.weight.push_back(m.weight[i]);
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Equivalence of the two decay conditions on a finite grid.

struct TclSide {
  double sup = 0.0;
  double end_slope = 0.0;  // log-log slope over the upper half of the grid
  bool bounded = true;
};

struct TclVerdict {
  double alpha = 0.0;
  TclSide variance;  // t^α E[f_t²], t ∈ {2^0..2^k}
  TclSide tail;      // δ^{1−α} ∫_{[0,δ]} λ^{-1} de, 1/δ ∈ {2^0..2^k}
  bool agree = true;
  // Constants of the two implications, with the grid slack folded in:
  //   sup tail side     ≤ k_tail · sup_{t ∈ 2^{-1..k}} t^α var(t)
  //   sup variance side ≤ k_var  · sup_{δ ∈ 2^{-k..10}} δ^{1−α} tail(δ)
  double k_tail = 0.0;
  double k_var = 0.0;
  bool mutual_bound = true;
};

inline constexpr double kBoundedSlope = 0.1;

namespace detail {

inline TclSide grid_side(const std::vector<double>& values) {
  TclSide s;
  for (double v : values) s.sup = std::max(s.sup, v);
  std::vector<double> x, y;
  const std::size_t half = values.size() / 2;
  for (std::size_t i = half; i < values.size(); ++i) {
    if (values[i] > 0.0) {
      x.push_back(static_cast<double>(i) * std::log(2.0));
      y.push_back(std::log(values[i]));
    }
  }
  // An upper half that has collapsed to zero is as bounded as it gets.
  if (x.size() >= 2) s.end_slope = least_squares(x, y).slope;
  s.bounded = s.end_slope <= kBoundedSlope;
  return s;
}

// ∫_1^∞ (u − 1) e^{−u} u^{α−1} du, composite Simpson on [1, 1 + 60 + 4α].
inline double tail_gamma_moment(double alpha) {
  const int n = 20000;
  const double hi = 61.0 + 4.0 * alpha;
  const double h = (hi - 1.0) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = 1.0 + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * (u - 1.0) * std::exp(-u) * std::pow(u, alpha - 1.0);
  }
  return s * h / 3.0;
}

}  // namespace detail

inline TclVerdict tcl_check(const SpectralMeasure& m, double alpha, int grid_exponent = 20) {
  if (!(alpha > 1.0)) throw ParameterError("alpha must be > 1");
  m.require_ergodic();
  TclVerdict v;
  v.alpha = alpha;
  auto var_side = [&](int k) {
    const double t = std::ldexp(1.0, k);
    return std::pow(t, alpha) * variance_at(m, t);
  };
  auto tail_side = [&](int k) {
    const double delta = std::ldexp(1.0, -k);
    return std::pow(delta, 1.0 - alpha) * spectral_tail(m, delta);
  };
  std::vector<double> vs, ts;
  for (int k = 0; k <= grid_exponent; ++k) {
    vs.push_back(var_side(k));
    ts.push_back(tail_side(k));
  }
  v.variance = detail::grid_side(vs);
  v.tail = detail::grid_side(ts);
  v.agree = v.variance.bounded == v.tail.bounded;

  double v_ext = std::max(v.variance.sup, var_side(-1));
  double t_ext = v.tail.sup;
  for (int k = -10; k < 0; ++k) t_ext = std::max(t_ext, tail_side(k));
  v.k_tail = std::exp(1.0) * std::pow(4.0, alpha) / (alpha - 1.0);
  v.k_var = 0.5 * detail::tail_gamma_moment(alpha);
  const double slack = 1.0 + 1e-9;
  v.mutual_bound = v.tail.sup <= v.k_tail * v_ext * slack && v.variance.sup <= v.k_var * t_ext * slack;
  return v;
}

}  // namespace rcm
