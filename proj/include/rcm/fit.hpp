#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/rng.hpp"

namespace rcm {

struct CurveSample {
  double t = 0.0;
  double value = 0.0;
  double se = 0.0;
};

struct PowerFit {
  double alpha = 0.0;      // value ~ C t^{-alpha}
  double intercept = 0.0;  // log C
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t points = 0;
  double residual = 0.0;   // RMS of log residuals
  bool flagged = false;    // residual above kCurvatureThreshold
  double ci_lo = 0.0;      // bootstrap 95% interval for alpha
  double ci_hi = 0.0;
};

inline constexpr double kCurvatureThreshold = 0.05;

struct DecayCurve {
  std::vector<CurveSample> samples;
  std::optional<PowerFit> fit;

  void validate() const {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (i > 0 && !(samples[i].t > samples[i - 1].t)) throw ParameterError("curve times must be increasing");
    }
  }
};

namespace detail {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace detail

// Log-log least squares on samples with t in [t_lo, t_hi].
inline PowerFit decay_fit(const DecayCurve& curve, double t_lo, double t_hi, int bootstrap = 400,
                          std::uint64_t seed = 12345) {
  std::vector<double> x, y;
  for (const auto& s : curve.samples) {
    if (s.t < t_lo || s.t > t_hi) continue;
    if (!(s.value > 0.0) || !(s.t > 0.0)) {
      throw FitError("nonpositive value or time in fit window at t=" + std::to_string(s.t));
    }
    x.push_back(std::log(s.t));
    y.push_back(std::log(s.value));
  }
  if (x.size() < 5) throw FitError("fit window holds " + std::to_string(x.size()) + " samples, need >= 5");
  const auto lf = detail::least_squares(x, y);
  PowerFit f;
  f.alpha = -lf.slope;
  f.intercept = lf.intercept;
  f.t_lo = std::exp(x.front());
  f.t_hi = std::exp(x.back());
  f.points = x.size();
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (lf.intercept + lf.slope * x[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / static_cast<double>(x.size()));
  f.flagged = f.residual > kCurvatureThreshold;

  std::vector<double> alphas;
  Rng rng(seed);
  std::vector<double> bx(x.size()), by(y.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto j = static_cast<std::size_t>(rng.below(static_cast<std::int64_t>(x.size())));
      bx[i] = x[j];
      by[i] = y[j];
    }
    alphas.push_back(-detail::least_squares(bx, by).slope);
  }
  if (!alphas.empty()) {
    std::sort(alphas.begin(), alphas.end());
    f.ci_lo = alphas[static_cast<std::size_t>(0.025 * (alphas.size() - 1))];
    f.ci_hi = alphas[static_cast<std::size_t>(0.975 * (alphas.size() - 1))];
  } else {
    f.ci_lo = f.ci_hi = f.alpha;
  }
  return f;
}

inline PowerFit decay_fit(const DecayCurve& curve) {
  if (curve.samples.empty()) throw FitError("empty curve");
  const double hi = curve.samples.back().t;
  return decay_fit(curve, hi / 10.0, hi);
}

inline void write_curve_csv(std::ostream& os, const DecayCurve& c, const char* value_name = "value") {
  os << "t," << value_name << ",se\n" << std::setprecision(17);
  for (const auto& s : c.samples) os << s.t << ',' << s.value << ',' << s.se << "\n";
}

}  // namespace rcm
