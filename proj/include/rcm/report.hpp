#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace rcm {

inline constexpr const char* kCsvVersion = "# rcm-csv v1";

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

struct Target {
  std::string name;
  std::string detail;
  bool passed = false;
};

// Outcome of one experiment: the configuration that reproduces it, its
// tables, and pass/fail lines for declared targets.
struct ExperimentReport {
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<Table> tables;
  std::vector<Target> targets;
  std::vector<std::string> notes;

  template <typename T>
  void echo(const std::string& key, const T& value) {
    std::ostringstream os;
    os << std::setprecision(17) << value;
    config.emplace_back(key, os.str());
  }

  void target(const std::string& name, bool passed, const std::string& detail) {
    targets.push_back({name, detail, passed});
  }

  bool passed() const {
    for (const auto& t : targets) {
      if (!t.passed) return false;
    }
    return true;
  }

  const Table* table(const std::string& name) const {
    for (const auto& t : tables) {
      if (t.name == name) return &t;
    }
    return nullptr;
  }
};

inline void write_config_echo(std::ostream& os, const ExperimentReport& r) {
  os << "# rcm-config v1\n";
  os << "experiment=" << r.experiment << "\n";
  for (const auto& [k, v] : r.config) os << k << "=" << v << "\n";
}

inline void write_table_csv(std::ostream& os, const ExperimentReport& r, const Table& t) {
  os << kCsvVersion << ' ' << r.experiment << ' ' << t.name << "\n";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n" << std::setprecision(17);
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
}

inline void write_summary(std::ostream& os, const ExperimentReport& r) {
  os << "experiment " << r.experiment << "\n";
  for (const auto& n : r.notes) os << "note: " << n << "\n";
  for (const auto& t : r.targets) os << (t.passed ? "[PASS] " : "[FAIL] ") << t.name << ": " << t.detail << "\n";
  os << (r.passed() ? "result: pass\n" : "result: fail\n");
}

// Writes config.txt, one CSV per table and summary.txt into dir.
inline void write_report(const std::filesystem::path& dir, const ExperimentReport& r) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "config.txt");
    write_config_echo(os, r);
  }
  for (const auto& t : r.tables) {
    std::ofstream os(dir / (t.name + ".csv"));
    write_table_csv(os, r, t);
  }
  std::ofstream os(dir / "summary.txt");
  write_summary(os, r);
}

}  // namespace rcm
