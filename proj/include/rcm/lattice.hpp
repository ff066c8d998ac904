#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "rcm/errors.hpp"

namespace rcm {

using Site = std::int64_t;
using EdgeIndex = std::int64_t;

// Integer displacement on Z^d. Unused trailing components stay zero.
inline constexpr int kMaxDim = 8;
using Offset = std::array<int, kMaxDim>;

// Periodic d-dimensional lattice {0..n-1}^d.
//
// Sites are numbered x = sum_a c_a n^a. The undirected edge between x and
// x + e_a has index x*d + a, so every site owns the d edges pointing in the
// positive axis directions and the torus has exactly d*n^d edges.
class Lattice {
 public:
  Lattice(int d, int n) : d_(d), n_(n) {
    if (d < 1 || d > kMaxDim) {
      throw ParameterError("d must be in 1.." + std::to_string(kMaxDim));
    }
    if (n < 3) throw ParameterError("n must be >= 3");
    sites_ = 1;
    for (int a = 0; a < d; ++a) {
      stride_[a] = sites_;
      sites_ *= n;
      if (sites_ > (std::int64_t{1} << 40)) throw ParameterError("lattice too large");
    }
  }

  int dim() const noexcept { return d_; }
  int period() const noexcept { return n_; }
  std::int64_t sites() const noexcept { return sites_; }
  std::int64_t edges() const noexcept { return sites_ * d_; }
  int degree() const noexcept { return 2 * d_; }

  int coord(Site x, int axis) const noexcept {
    return static_cast<int>((x / stride_[axis]) % n_);
  }

  Offset coords(Site x) const noexcept {
    Offset c{};
    for (int a = 0; a < d_; ++a) c[a] = coord(x, a);
    return c;
  }

  Site site(const Offset& c) const noexcept {
    Site x = 0;
    for (int a = 0; a < d_; ++a) x += static_cast<Site>(wrap(c[a])) * stride_[a];
    return x;
  }

  int wrap(long v) const noexcept {
    long r = v % n_;
    return static_cast<int>(r < 0 ? r + n_ : r);
  }

  // Neighbour x + sign*e_axis.
  Site step(Site x, int axis, int sign) const noexcept {
    const int c = coord(x, axis);
    const int nc = wrap(static_cast<long>(c) + sign);
    return x + static_cast<Site>(nc - c) * stride_[axis];
  }

  // Direction index k in 0..2d-1: k = 2*axis + (sign < 0).
  Site neighbour(Site x, int k) const noexcept { return step(x, k / 2, (k % 2) ? -1 : +1); }

  Site translate(Site x, const Offset& off) const noexcept {
    Site y = x;
    for (int a = 0; a < d_; ++a) {
      if (off[a] == 0) continue;
      const int c = coord(y, a);
      const int nc = wrap(static_cast<long>(c) + off[a]);
      y += static_cast<Site>(nc - c) * stride_[a];
    }
    return y;
  }

  EdgeIndex edge(Site x, int axis) const noexcept { return x * d_ + axis; }

  // Edge joining x and x + sign*e_axis.
  EdgeIndex edge(Site x, int axis, int sign) const noexcept {
    return sign > 0 ? edge(x, axis) : edge(step(x, axis, -1), axis);
  }

  // Edge in direction k (see neighbour()).
  EdgeIndex incident_edge(Site x, int k) const noexcept {
    return edge(x, k / 2, (k % 2) ? -1 : +1);
  }

  // Edge between two neighbouring sites, in either order. Returns -1 when
  // x and y are not neighbours.
  EdgeIndex edge_between(Site x, Site y) const noexcept {
    for (int k = 0; k < 2 * d_; ++k) {
      if (neighbour(x, k) == y) return incident_edge(x, k);
    }
    return -1;
  }

  Site edge_tail(EdgeIndex e) const noexcept { return e / d_; }
  int edge_axis(EdgeIndex e) const noexcept { return static_cast<int>(e % d_); }
  Site edge_head(EdgeIndex e) const noexcept { return step(edge_tail(e), edge_axis(e), +1); }

  // Graph distance on the torus, per coordinate min(|dc|, n-|dc|) summed.
  int torus_distance(Site x, Site y) const noexcept {
    int s = 0;
    for (int a = 0; a < d_; ++a) {
      int dc = std::abs(coord(x, a) - coord(y, a));
      s += dc < n_ - dc ? dc : n_ - dc;
    }
    return s;
  }

  bool operator==(const Lattice& o) const noexcept { return d_ == o.d_ && n_ == o.n_; }

 private:
  int d_;
  int n_;
  std::int64_t sites_ = 1;
  std::array<std::int64_t, kMaxDim> stride_{};
};

inline Offset unit(int axis, int sign = 1) {
  Offset o{};
  o[axis] = sign;
  return o;
}

inline Offset operator+(Offset a, const Offset& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
  return a;
}

inline Offset operator-(Offset a) {
  for (auto& v : a) v = -v;
  return a;
}

}  // namespace rcm
