#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/rng.hpp"

namespace rcm {

namespace law {

struct Constant {
  double c = 1.0;
};

struct Uniform {
  double a = 1.0;
  double b = 2.0;
};

// Value `high` with probability p, `low` otherwise.
struct TwoPoint {
  double p = 0.5;
  double low = 1.0;
  double high = 4.0;
};

// Pre-law (1-p)·δ_atom + p·(s x^{-(s+1)} on [1,cap], renormalized), s = 4+eps,
// divided by min(atom, 1) so that the support starts at 1. cap may be +inf.
struct BoundedPareto {
  double p = 0.25;
  double eps = 0.1;
  double cap = 1e3;
  double atom = 1.0;

  double tail_index() const noexcept { return 4.0 + eps; }
  double scale() const noexcept { return 1.0 / std::min(atom, 1.0); }

  // E[X^i] of the truncated Pareto part.
  double pareto_moment(double i) const noexcept {
    const double s = tail_index();
    if (std::isinf(cap)) {
      return i < s ? s / (s - i) : std::numeric_limits<double>::infinity();
    }
    const double norm = 1.0 - std::pow(cap, -s);
    if (std::abs(s - i) < 1e-14) return s * std::log(cap) / norm;
    return s / (s - i) * (1.0 - std::pow(cap, i - s)) / norm;
  }

  // Moment of the pre-rescale law (atom at `atom`, Pareto on [1,cap]).
  double pre_moment(double i) const noexcept {
    return (1.0 - p) * std::pow(atom, i) + p * pareto_moment(i);
  }
};

}  // namespace law

// Law of a single i.i.d. edge conductance. Every variant is supported in
// [1, inf); parameters are validated by the factory functions.
class ConductanceLaw {
 public:
  using Variant = std::variant<law::Constant, law::Uniform, law::TwoPoint, law::BoundedPareto>;

  static ConductanceLaw constant(double c) {
    if (!(c >= 1.0) || !std::isfinite(c)) throw ParameterError("constant law needs c >= 1");
    return ConductanceLaw(law::Constant{c});
  }

  static ConductanceLaw uniform(double a, double b) {
    if (!(a >= 1.0) || !(b >= a) || !std::isfinite(b)) {
      throw ParameterError("uniform law needs 1 <= a <= b < inf");
    }
    return ConductanceLaw(law::Uniform{a, b});
  }

  static ConductanceLaw two_point(double p, double low, double high) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("two-point law needs 0 <= p <= 1");
    if (!(low >= 1.0) || !(high >= 1.0) || !std::isfinite(low) || !std::isfinite(high)) {
      throw ParameterError("two-point law values must be finite and >= 1");
    }
    return ConductanceLaw(law::TwoPoint{p, low, high});
  }

  static ConductanceLaw bounded_pareto(double p, double eps, double cap, double atom = 1.0) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("pareto law needs 0 <= p <= 1");
    if (!(eps > 0.0)) throw ParameterError("pareto law needs eps > 0");
    if (!(cap > 1.0)) throw ParameterError("pareto law needs cap > 1");
    if (!(atom > 0.0) || !std::isfinite(atom)) throw ParameterError("pareto law needs atom > 0");
    return ConductanceLaw(law::BoundedPareto{p, eps, cap, atom});
  }

  const Variant& variant() const noexcept { return v_; }

  double sample(Rng& rng) const {
    return std::visit(
        [&](const auto& l) -> double {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, law::Constant>) {
            return l.c;
          } else if constexpr (std::is_same_v<T, law::Uniform>) {
            return l.a + (l.b - l.a) * rng.uniform();
          } else if constexpr (std::is_same_v<T, law::TwoPoint>) {
            return rng.uniform() < l.p ? l.high : l.low;
          } else {
            const double pick = rng.uniform();
            const double u = rng.uniform();
            double x;
            if (pick >= l.p) {
              x = l.atom;
            } else {
              const double s = l.tail_index();
              const double tail = std::isinf(l.cap) ? 0.0 : std::pow(l.cap, -s);
              x = std::pow(1.0 - u * (1.0 - tail), -1.0 / s);
              if (!std::isinf(l.cap)) x = std::min(x, l.cap);
            }
            return std::max(1.0, x * l.scale());
          }
        },
        v_);
  }

  // Raw moment E[ω^i]; +inf when it diverges.
  double moment(int i) const {
    return std::visit(
        [&](const auto& l) -> double {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, law::Constant>) {
            return std::pow(l.c, i);
          } else if constexpr (std::is_same_v<T, law::Uniform>) {
            if (l.b == l.a) return std::pow(l.a, i);
            return (std::pow(l.b, i + 1) - std::pow(l.a, i + 1)) / ((i + 1) * (l.b - l.a));
          } else if constexpr (std::is_same_v<T, law::TwoPoint>) {
            return (1.0 - l.p) * std::pow(l.low, i) + l.p * std::pow(l.high, i);
          } else {
            return std::pow(l.scale(), i) * l.pre_moment(i);
          }
        },
        v_);
  }

  double mean() const { return moment(1); }
  double variance() const {
    const double m = mean();
    return moment(2) - m * m;
  }

  double support_min() const {
    return std::visit(
        [](const auto& l) -> double {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, law::Constant>) {
            return l.c;
          } else if constexpr (std::is_same_v<T, law::Uniform>) {
            return l.a;
          } else if constexpr (std::is_same_v<T, law::TwoPoint>) {
            if (l.p == 0.0) return l.low;
            if (l.p == 1.0) return l.high;
            return std::min(l.low, l.high);
          } else {
            if (l.p == 1.0) return l.scale();
            if (l.p == 0.0) return l.atom * l.scale();
            return std::min(l.atom, 1.0) * l.scale();
          }
        },
        v_);
  }

  double support_max() const {
    return std::visit(
        [](const auto& l) -> double {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, law::Constant>) {
            return l.c;
          } else if constexpr (std::is_same_v<T, law::Uniform>) {
            return l.b;
          } else if constexpr (std::is_same_v<T, law::TwoPoint>) {
            if (l.p == 0.0) return l.low;
            if (l.p == 1.0) return l.high;
            return std::max(l.low, l.high);
          } else {
            if (l.p == 0.0) return l.atom * l.scale();
            return std::max(l.atom, l.cap) * l.scale();
          }
        },
        v_);
  }

  bool bounded() const { return std::isfinite(support_max()); }

  bool deterministic() const { return support_min() == support_max(); }

  // Finite support as (value, probability) pairs, or empty for continuous laws.
  std::vector<std::pair<double, double>> atoms() const {
    return std::visit(
        [](const auto& l) -> std::vector<std::pair<double, double>> {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, law::Constant>) {
            return {{l.c, 1.0}};
          } else if constexpr (std::is_same_v<T, law::TwoPoint>) {
            if (l.low == l.high) return {{l.low, 1.0}};
            return {{l.low, 1.0 - l.p}, {l.high, l.p}};
          } else if constexpr (std::is_same_v<T, law::Uniform>) {
            if (l.a == l.b) return {{l.a, 1.0}};
            return {};
          } else {
            if (l.p == 0.0) return {{l.atom * l.scale(), 1.0}};
            return {};
          }
        },
        v_);
  }

  // Text form accepted by parse(): "constant:c", "uniform:a,b",
  // "twopoint:p,low,high", "pareto:p,eps,cap[,atom]".
  std::string descriptor() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, law::Constant>) {
            os << "constant:" << l.c;
          } else if constexpr (std::is_same_v<T, law::Uniform>) {
            os << "uniform:" << l.a << ',' << l.b;
          } else if constexpr (std::is_same_v<T, law::TwoPoint>) {
            os << "twopoint:" << l.p << ',' << l.low << ',' << l.high;
          } else {
            os << "pareto:" << l.p << ',' << l.eps << ',' << l.cap;
            if (l.atom != 1.0) os << ',' << l.atom;
          }
        },
        v_);
    return os.str();
  }

  static ConductanceLaw parse(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw ParameterError("law descriptor needs 'name:params': " + text);
    const std::string name = text.substr(0, colon);
    std::vector<double> args;
    std::stringstream ss(text.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        const double v = tok == "inf" ? std::numeric_limits<double>::infinity() : std::stod(tok, &used);
        if (tok != "inf" && used != tok.size()) throw std::invalid_argument(tok);
        args.push_back(v);
      } catch (const std::exception&) {
        throw ParameterError("bad number '" + tok + "' in law descriptor " + text);
      }
    }
    auto need = [&](std::size_t lo, std::size_t hi) {
      if (args.size() < lo || args.size() > hi) {
        throw ParameterError("wrong parameter count for law " + name);
      }
    };
    if (name == "constant") {
      need(1, 1);
      return constant(args[0]);
    }
    if (name == "uniform") {
      need(2, 2);
      return uniform(args[0], args[1]);
    }
    if (name == "twopoint") {
      need(3, 3);
      return two_point(args[0], args[1], args[2]);
    }
    if (name == "pareto") {
      need(3, 4);
      return bounded_pareto(args[0], args[1], args[2], args.size() == 4 ? args[3] : 1.0);
    }
    throw ParameterError("unknown law '" + name + "'");
  }

 private:
  explicit ConductanceLaw(Variant v) : v_(v) {}
  Variant v_;
};

}  // namespace rcm
