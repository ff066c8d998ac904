#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/errors.hpp"
#include "rcm/lattice.hpp"
#include "rcm/law.hpp"

namespace rcm {

struct ConfigIssue {
  int line = 0;  // 0 for command-line overrides
  std::string message;
};

// Batch configuration. Unset keys fall back to per-experiment defaults.
struct RunConfig {
  std::string experiment;
  std::optional<ConductanceLaw> law;
  std::optional<int> d;
  std::optional<int> n;
  std::optional<std::string> functional;
  std::optional<std::vector<double>> times;
  std::optional<std::vector<double>> mu;
  std::optional<int> realizations;
  std::optional<int> walks;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;
  std::optional<std::string> walker;  // simple | conductance
  std::optional<std::string> path;    // exact | mc
  std::optional<std::vector<double>> boxes;
  std::optional<int> period;
  std::optional<double> horizon;
  std::optional<double> eta;
  std::optional<double> fit_lo;
  std::optional<double> fit_hi;
  std::optional<double> target;
  std::optional<double> tolerance;
  std::optional<double> p;
  std::optional<double> eps;
  std::optional<double> cap;
  std::optional<double> atom;
  std::optional<double> sigma_bar2;
  std::optional<double> sigma_bar2_se;
  std::optional<std::string> input;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"simulate", "decay",    "diffusivity", "msd",
                                              "spectrum", "contract", "nash-check",  "field-dump"};
  return names;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_int(const std::string& v, long long& out) {
  try {
    std::size_t used = 0;
    out = std::stoll(v, &used);
    return used == v.size();
  } catch (const std::exception&) {
    return false;
  }
}

inline bool parse_double(const std::string& v, double& out) {
  try {
    std::size_t used = 0;
    out = std::stod(v, &used);
    return used == v.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

// "a,b,c" or "geom:lo,hi,count" (geometric grid) or "lin:lo,hi,count".
inline bool parse_list(const std::string& v, std::vector<double>& out) {
  out.clear();
  std::string body = v;
  int mode = 0;
  if (body.rfind("geom:", 0) == 0) {
    mode = 1;
    body = body.substr(5);
  } else if (body.rfind("lin:", 0) == 0) {
    mode = 2;
    body = body.substr(4);
  }
  std::stringstream ss(body);
  std::string tok;
  std::vector<double> vals;
  while (std::getline(ss, tok, ',')) {
    double x;
    if (!parse_double(trim(tok), x)) return false;
    vals.push_back(x);
  }
  if (mode == 0) {
    out = vals;
    return !out.empty();
  }
  if (vals.size() != 3 || vals[2] < 2 || vals[2] != std::floor(vals[2])) return false;
  const int count = static_cast<int>(vals[2]);
  if (mode == 1 && !(vals[0] > 0.0 && vals[1] > 0.0)) return false;
  for (int i = 0; i < count; ++i) {
    const double s = static_cast<double>(i) / (count - 1);
    out.push_back(mode == 1 ? vals[0] * std::pow(vals[1] / vals[0], s) : vals[0] + (vals[1] - vals[0]) * s);
  }
  return true;
}

}  // namespace detail

// Applies one key=value assignment; problems are appended to `issues`.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value, int line,
                          std::vector<ConfigIssue>& issues) {
  auto bad = [&](const std::string& m) { issues.push_back({line, m}); };
  auto as_int = [&](std::optional<int>& dst, long long lo, const char* what) {
    long long v;
    if (!detail::parse_int(value, v)) return bad(std::string(what) + " must be an integer, got '" + value + "'");
    if (v < lo) return bad(std::string(what) + " must be >= " + std::to_string(lo));
    if (v > 1000000000LL) return bad(std::string(what) + " is too large");
    dst = static_cast<int>(v);
  };
  auto as_double = [&](std::optional<double>& dst, const char* what, bool positive) {
    double v;
    if (!detail::parse_double(value, v)) return bad(std::string(what) + " must be a number, got '" + value + "'");
    if (positive && !(v > 0.0)) return bad(std::string(what) + " must be > 0");
    dst = v;
  };
  auto as_list = [&](std::optional<std::vector<double>>& dst, const char* what) {
    std::vector<double> v;
    if (!detail::parse_list(value, v)) return bad(std::string(what) + " must be a comma-separated number list");
    dst = v;
  };

  if (key == "experiment") {
    bool known = false;
    for (const auto& n : experiment_names()) known = known || n == value;
    if (!known) return bad("unknown experiment '" + value + "'");
    c.experiment = value;
  } else if (key == "law") {
    try {
      c.law = ConductanceLaw::parse(value);
    } catch (const Error& e) {
      bad(e.what());
    }
  } else if (key == "d") {
    as_int(c.d, 1, "d");
    if (c.d && *c.d > kMaxDim) bad("d must be <= " + std::to_string(kMaxDim));
  } else if (key == "n") {
    long long v;
    if (!detail::parse_int(value, v)) return bad("n must be an integer, got '" + value + "'");
    if (v < 3) return bad("n must be >= 3");
    c.n = static_cast<int>(v);
  } else if (key == "functional") {
    c.functional = value;
  } else if (key == "times") {
    as_list(c.times, "times");
    if (c.times) {
      for (std::size_t i = 0; i < c.times->size(); ++i) {
        if ((*c.times)[i] < 0.0) return bad("times must be >= 0");
        if (i > 0 && !((*c.times)[i] > (*c.times)[i - 1])) return bad("times must be strictly increasing");
      }
    }
  } else if (key == "mu") {
    as_list(c.mu, "mu");
    if (c.mu) {
      for (double m : *c.mu) {
        if (!(m > 0.0)) {
          c.mu.reset();
          return bad("mu values must be > 0");
        }
      }
    }
  } else if (key == "realizations") {
    as_int(c.realizations, 1, "realizations");
  } else if (key == "walks") {
    as_int(c.walks, 1, "walks");
  } else if (key == "seed") {
    long long v;
    if (!detail::parse_int(value, v) || v < 0) return bad("seed must be a nonnegative integer");
    c.seed = static_cast<std::uint64_t>(v);
  } else if (key == "workers") {
    as_int(c.workers, 1, "workers");
  } else if (key == "out") {
    if (value.empty()) return bad("out must not be empty");
    c.out = value;
  } else if (key == "walker") {
    if (value != "simple" && value != "conductance") return bad("walker must be 'simple' or 'conductance'");
    c.walker = value;
  } else if (key == "path") {
    if (value != "exact" && value != "mc") return bad("path must be 'exact' or 'mc'");
    c.path = value;
  } else if (key == "boxes") {
    as_list(c.boxes, "boxes");
    if (c.boxes) {
      for (double b : *c.boxes) {
        if (b < 1 || b != std::floor(b)) return bad("boxes must be integers >= 1");
      }
    }
  } else if (key == "period") {
    as_int(c.period, 3, "period");
  } else if (key == "horizon") {
    as_double(c.horizon, "horizon", true);
  } else if (key == "eta") {
    as_double(c.eta, "eta", true);
  } else if (key == "fit_lo") {
    as_double(c.fit_lo, "fit_lo", true);
  } else if (key == "fit_hi") {
    as_double(c.fit_hi, "fit_hi", true);
  } else if (key == "target") {
    as_double(c.target, "target", false);
  } else if (key == "tolerance") {
    as_double(c.tolerance, "tolerance", true);
  } else if (key == "p") {
    as_double(c.p, "p", false);
    if (c.p && (*c.p < 0.0 || *c.p > 1.0)) bad("p must lie in [0, 1]");
  } else if (key == "eps") {
    as_double(c.eps, "eps", true);
  } else if (key == "cap") {
    as_double(c.cap, "cap", true);
    if (c.cap && *c.cap <= 1.0) bad("cap must be > 1");
  } else if (key == "atom") {
    as_double(c.atom, "atom", true);
  } else if (key == "sigma_bar2") {
    as_double(c.sigma_bar2, "sigma_bar2", true);
  } else if (key == "sigma_bar2_se") {
    as_double(c.sigma_bar2_se, "sigma_bar2_se", false);
  } else if (key == "input") {
    c.input = value;
  } else {
    bad("unknown key '" + key + "'");
  }
}

struct ParsedConfig {
  RunConfig config;
  std::vector<ConfigIssue> issues;
  bool ok() const { return issues.empty(); }
};

// key=value per line, '#' starts a comment. Every problem is collected.
inline ParsedConfig parse_config(const std::string& text) {
  ParsedConfig out;
  std::stringstream ss(text);
  std::string raw;
  int line = 0;
  std::map<std::string, int> seen;
  while (std::getline(ss, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      out.issues.push_back({line, "expected key=value, got '" + s + "'"});
      continue;
    }
    const std::string key = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end()) {
      out.issues.push_back({line, "duplicate key '" + key + "' (first on line " + std::to_string(it->second) + ")"});
      continue;
    }
    seen[key] = line;
    apply_setting(out.config, key, value, line, out.issues);
  }
  return out;
}

inline std::string format_issues(const std::vector<ConfigIssue>& issues) {
  std::ostringstream os;
  for (const auto& i : issues) {
    if (i.line > 0) os << "line " << i.line << ": ";
    else os << "command line: ";
    os << i.message << "\n";
  }
  return os.str();
}

}  // namespace rcm
