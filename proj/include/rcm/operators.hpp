#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/field.hpp"
#include "rcm/functionals.hpp"
#include "rcm/parallel.hpp"

namespace rcm {

// g(x) = f(θ_x ω): a function on the torus sites.
struct FieldFunction {
  Lattice lattice{1, 3};
  std::vector<double> values;

  FieldFunction() = default;
  FieldFunction(const Lattice& lat, std::vector<double> v) : lattice(lat), values(std::move(v)) {
    if (static_cast<std::int64_t>(values.size()) != lat.sites()) {
      throw ParameterError("function length does not match the site count");
    }
  }
  static FieldFunction zeros(const Lattice& lat) {
    return FieldFunction(lat, std::vector<double>(static_cast<std::size_t>(lat.sites()), 0.0));
  }

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  double mean() const {
    KahanSum s;
    for (double v : values) s.add(v);
    return s.value() / static_cast<double>(values.size());
  }

  // Site-averaged square, ‖g‖²/|T|.
  double mean_square() const {
    KahanSum s;
    for (double v : values) s.add(v * v);
    return s.value() / static_cast<double>(values.size());
  }

  FieldFunction centered() const {
    FieldFunction c = *this;
    const double m = mean();
    for (double& v : c.values) v -= m;
    return c;
  }
};

inline FieldFunction field_function(const LocalFunctional& f, const ConductanceField& field) {
  return FieldFunction(field.lattice, evaluate_all(f, field));
}

// Site-averaged inner product ⟨a, b⟩/|T|.
inline double site_average_product(const FieldFunction& a, const FieldFunction& b) {
  if (a.size() != b.size()) throw ParameterError("dimension mismatch");
  KahanSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value() / static_cast<double>(a.size());
}

enum class OperatorKind { Conductance, Simple };

// Generator of the walk on a fixed torus field, stored as a neighbour table:
// (Lg)(x) = Σ_k w(x,k) (g(x+k) − g(x)). Symmetric, rows sum to zero.
class TorusOperator {
 public:
  TorusOperator(const ConductanceField& field, OperatorKind kind) : lat_(field.lattice), kind_(kind) {
    const std::int64_t n = lat_.sites();
    const int deg = lat_.degree();
    nbr_.resize(static_cast<std::size_t>(n * deg));
    w_.resize(nbr_.size());
    diag_.assign(static_cast<std::size_t>(n), 0.0);
    for (Site x = 0; x < n; ++x) {
      for (int k = 0; k < deg; ++k) {
        const std::size_t i = static_cast<std::size_t>(x * deg + k);
        nbr_[i] = lat_.neighbour(x, k);
        w_[i] = kind == OperatorKind::Simple ? 1.0 : field.at(x, k);
        diag_[static_cast<std::size_t>(x)] += w_[i];
      }
    }
  }

  const Lattice& lattice() const noexcept { return lat_; }
  OperatorKind kind() const noexcept { return kind_; }
  std::int64_t size() const noexcept { return lat_.sites(); }
  int degree() const noexcept { return lat_.degree(); }
  Site neighbour(Site x, int k) const { return nbr_[static_cast<std::size_t>(x * degree() + k)]; }
  double weight(Site x, int k) const { return w_[static_cast<std::size_t>(x * degree() + k)]; }
  // p(x): total rate out of x, minus the diagonal of L.
  double rate(Site x) const { return diag_[static_cast<std::size_t>(x)]; }
  double max_rate() const { return *std::max_element(diag_.begin(), diag_.end()); }

  // out = L in.
  void apply(const double* in, double* out) const {
    const std::int64_t n = size();
    const int deg = degree();
    for (Site x = 0; x < n; ++x) {
      const double gx = in[x];
      double s = 0.0;
      const std::size_t base = static_cast<std::size_t>(x * deg);
      for (int k = 0; k < deg; ++k) s += w_[base + k] * (in[nbr_[base + k]] - gx);
      out[x] = s;
    }
  }

  FieldFunction apply(const FieldFunction& g) const {
    check(g);
    FieldFunction out = FieldFunction::zeros(lat_);
    apply(g.values.data(), out.values.data());
    return out;
  }

  Eigen::MatrixXd to_dense() const {
    const std::int64_t n = size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Site x = 0; x < n; ++x) {
      for (int k = 0; k < degree(); ++k) m(x, neighbour(x, k)) += weight(x, k);
      m(x, x) -= rate(x);
    }
    return m;
  }

  void check(const FieldFunction& g) const {
    if (static_cast<std::int64_t>(g.size()) != size()) throw ParameterError("dimension mismatch");
  }

  // Coordinate-list export, one entry per stored nonzero.
  void write_coo(std::ostream& os) const {
    os << "# rcm-coo v1 sites=" << size() << "\n";
    os << "row,col,value\n" << std::setprecision(17);
    for (Site x = 0; x < size(); ++x) {
      os << x << ',' << x << ',' << -rate(x) << "\n";
      for (int k = 0; k < degree(); ++k) {
        if (neighbour(x, k) == x) continue;
        os << x << ',' << neighbour(x, k) << ',' << weight(x, k) << "\n";
      }
    }
  }

 private:
  Lattice lat_;
  OperatorKind kind_;
  std::vector<Site> nbr_;
  std::vector<double> w_;
  std::vector<double> diag_;
};

inline TorusOperator build_generator(const ConductanceField& field, OperatorKind kind = OperatorKind::Conductance) {
  return TorusOperator(field, kind);
}

// (1/|T|) Σ_edges w_e (g(y) − g(x))².
inline double dirichlet_form(const TorusOperator& op, const FieldFunction& g) {
  op.check(g);
  KahanSum s;
  for (Site x = 0; x < op.size(); ++x) {
    for (int k = 0; k < op.degree(); k += 2) {  // positive directions only: each edge once
      const double diff = g[static_cast<std::size_t>(op.neighbour(x, k))] - g[static_cast<std::size_t>(x)];
      s.add(op.weight(x, k) * diff * diff);
    }
  }
  return s.value() / static_cast<double>(op.size());
}

// ---------------------------------------------------------------------------
// Dense spectrum of −L.

inline constexpr std::int64_t kDenseLimit = 4096;
inline constexpr double kZeroEigenvalue = 1e-12;

struct DenseSpectrum {
  Eigen::VectorXd lambda;  // ascending, ≥ 0
  Eigen::MatrixXd vectors;  // orthonormal columns
};

inline DenseSpectrum dense_spectrum(const TorusOperator& op) {
  if (op.size() > kDenseLimit) {
    throw CapacityError("dense spectrum limited to " + std::to_string(kDenseLimit) + " sites, torus has " +
                        std::to_string(op.size()));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-op.to_dense());
  if (es.info() != Eigen::Success) throw SolverError("eigendecomposition failed", 0.0);
  DenseSpectrum s{es.eigenvalues(), es.eigenvectors()};
  for (Eigen::Index i = 0; i < s.lambda.size(); ++i) {
    if (std::abs(s.lambda(i)) < kZeroEigenvalue * std::max(1.0, op.max_rate())) s.lambda(i) = 0.0;
  }
  return s;
}

inline void write_spectrum_csv(std::ostream& os, const DenseSpectrum& s) {
  os << "# rcm-csv v1 spectrum\n";
  os << "index,eigenvalue\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < s.lambda.size(); ++i) os << i << ',' << s.lambda(i) << "\n";
}

// ---------------------------------------------------------------------------
// Semigroup e^{tL}.

enum class SemigroupBackend { Auto, Dense, Uniformization };

inline FieldFunction semigroup_apply(const DenseSpectrum& s, const FieldFunction& g, double t) {
  if (t < 0.0) throw RangeError("semigroup time must be >= 0");
  const Eigen::Map<const Eigen::VectorXd> gv(g.values.data(), static_cast<Eigen::Index>(g.size()));
  Eigen::VectorXd c = s.vectors.transpose() * gv;
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::exp(-t * s.lambda(i));
  Eigen::VectorXd out = s.vectors * c;
  FieldFunction r = g;
  for (Eigen::Index i = 0; i < out.size(); ++i) r[static_cast<std::size_t>(i)] = out(i);
  return r;
}

// Poissonized jump chain P = I + L/Λ, Λ = max rate:
// e^{tL} g = Σ_k e^{−Λt}(Λt)^k/k! P^k g, truncated once the remaining
// Poisson mass is below `tail`. The kept weights are renormalized, so the
// mean of g is preserved exactly (P is doubly stochastic).
inline FieldFunction semigroup_uniformization(const TorusOperator& op, const FieldFunction& g, double t,
                                              double tail = 1e-12) {
  if (t < 0.0) throw RangeError("semigroup time must be >= 0");
  op.check(g);
  if (t == 0.0) return g;
  const double rate = op.max_rate();
  const double m = rate * t;
  const std::size_t n = g.size();
  std::vector<double> cur = g.values, lg(n), acc(n, 0.0);
  KahanSum mass;
  const double log_m = std::log(m);
  for (std::int64_t k = 0;; ++k) {
    const double wk = std::exp(-m + static_cast<double>(k) * log_m - std::lgamma(static_cast<double>(k) + 1.0));
    if (wk > 0.0) {
      for (std::size_t i = 0; i < n; ++i) acc[i] += wk * cur[i];
      mass.add(wk);
    }
    if (static_cast<double>(k) > m && 1.0 - mass.value() < tail) break;
    if (k > static_cast<std::int64_t>(m + 50.0 * std::sqrt(m) + 100.0)) break;
    op.apply(cur.data(), lg.data());
    for (std::size_t i = 0; i < n; ++i) cur[i] += lg[i] / rate;
  }
  const double total = mass.value();
  FieldFunction r = g;
  for (std::size_t i = 0; i < n; ++i) r[i] = acc[i] / total;
  return r;
}

inline FieldFunction semigroup_apply(const TorusOperator& op, const FieldFunction& g, double t,
                                     SemigroupBackend backend = SemigroupBackend::Auto) {
  if (t < 0.0) throw RangeError("semigroup time must be >= 0");
  op.check(g);
  if (backend == SemigroupBackend::Auto) {
    backend = op.size() <= kDenseLimit ? SemigroupBackend::Dense : SemigroupBackend::Uniformization;
  }
  if (backend == SemigroupBackend::Dense) return semigroup_apply(dense_spectrum(op), g, t);
  return semigroup_uniformization(op, g, t);
}

// ---------------------------------------------------------------------------
// Resolvent (μ − L)^{-1} by Jacobi-preconditioned conjugate gradients.

struct SolverOptions {
  double tolerance = 1e-10;      // relative residual ‖g − (μ−L)u‖/‖g‖
  std::int64_t max_iterations = 0;  // 0: max(50·√N, 200)
};

struct ResolventResult {
  FieldFunction u;
  std::int64_t iterations = 0;
  double relative_residual = 0.0;
};

inline ResolventResult resolvent_solve_report(const TorusOperator& op, const FieldFunction& g, double mu,
                                              SolverOptions opt = {}) {
  if (!(mu > 0.0)) throw ParameterError("mu must be > 0");
  op.check(g);
  const std::size_t n = g.size();
  const std::int64_t cap =
      opt.max_iterations > 0
          ? opt.max_iterations
          : std::max<std::int64_t>(200, static_cast<std::int64_t>(50.0 * std::sqrt(static_cast<double>(n))));
  ResolventResult res{FieldFunction::zeros(op.lattice()), 0, 0.0};
  double gnorm = 0.0;
  for (double v : g.values) gnorm += v * v;
  gnorm = std::sqrt(gnorm);
  if (gnorm == 0.0) return res;

  std::vector<double> inv_diag(n), r(n), z(n), p(n), q(n), lp(n);
  for (std::size_t i = 0; i < n; ++i) inv_diag[i] = 1.0 / (mu + op.rate(static_cast<Site>(i)));
  auto& u = res.u.values;
  auto matvec = [&](const std::vector<double>& in, std::vector<double>& out) {
    op.apply(in.data(), lp.data());
    for (std::size_t i = 0; i < n; ++i) out[i] = mu * in[i] - lp[i];
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto true_residual = [&] {
    matvec(u, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = g[i] - q[i];
    return std::sqrt(dot(r, r)) / gnorm;
  };

  double rel = true_residual();
  std::int64_t it = 0;
  // Restarted from the true residual whenever the recursive one claims
  // convergence, so the reported residual is never a recursion artefact.
  while (rel > opt.tolerance && it < cap) {
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    while (it < cap) {
      matvec(p, q);
      const double alpha = rz / dot(p, q);
      for (std::size_t i = 0; i < n; ++i) {
        u[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      ++it;
      if (std::sqrt(dot(r, r)) / gnorm <= 0.5 * opt.tolerance) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    rel = true_residual();
  }
  res.iterations = it;
  res.relative_residual = rel;
  if (rel > opt.tolerance) {
    throw SolverError("resolvent solve did not converge (mu=" + std::to_string(mu) + ", " + std::to_string(it) +
                          " iterations, relative residual " + std::to_string(rel) + ")",
                      rel);
  }
  return res;
}

inline FieldFunction resolvent_solve(const TorusOperator& op, const FieldFunction& g, double mu,
                                     SolverOptions opt = {}) {
  return resolvent_solve_report(op, g, mu, opt).u;
}

// ---------------------------------------------------------------------------
// Spectral gap of the free-boundary box {−n..n}^d.

struct BoxGap {
  double lambda2 = 0.0;
  double cs = 0.0;  // 4/(n² λ₂)
  std::int64_t vertices = 0;
  bool dense = false;
};

inline double path_gap(int vertices) {
  return 2.0 * (1.0 - std::cos(M_PI / static_cast<double>(vertices)));
}

// Dense solve of the box graph Laplacian (any size; the caller bounds it).
inline double box_gap_dense(int d, int n) {
  const int side = 2 * n + 1;
  std::int64_t m = 1;
  for (int a = 0; a < d; ++a) m *= side;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
  for (std::int64_t x = 0; x < m; ++x) {
    std::int64_t stride = 1;
    for (int a = 0; a < d; ++a) {
      const int c = static_cast<int>((x / stride) % side);
      if (c + 1 < side) {
        const std::int64_t y = x + stride;
        lap(x, y) -= 1.0;
        lap(y, x) -= 1.0;
        lap(x, x) += 1.0;
        lap(y, y) += 1.0;
      }
      stride *= side;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap, Eigen::EigenvaluesOnly);
  return m > 1 ? es.eigenvalues()(1) : 0.0;
}

// Above the dense limit the Cartesian-product identity λ₂(P^d) = λ₂(P) for
// the path P on 2n+1 vertices is used.
inline BoxGap box_spectral_gap(int d, int n) {
  if (d < 1 || d > kMaxDim) throw ParameterError("d must be in 1.." + std::to_string(kMaxDim));
  if (n < 1) throw ParameterError("box radius must be >= 1");
  BoxGap g;
  g.vertices = box_volume(d, n);
  if (g.vertices <= kDenseLimit) {
    g.lambda2 = box_gap_dense(d, n);
    g.dense = true;
  } else {
    g.lambda2 = path_gap(2 * n + 1);
  }
  g.cs = 4.0 / (static_cast<double>(n) * n * g.lambda2);
  return g;
}

}  // namespace rcm
