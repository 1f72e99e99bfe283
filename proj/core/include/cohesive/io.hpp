#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cohesive/common.hpp"

namespace cohesive {

// Flat key=value config: one pair per line, '#' starts a comment.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // comma-separated doubles
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  std::string echo() const;  // "k=v;k=v" in key order

 private:
  std::map<std::string, std::string> values_;
};

struct ResultRow {
  std::string subcommand;
  std::string params;  // parameter echo
  std::string metric;
  double value = 0.0;
  double tolerance = std::numeric_limits<double>::quiet_NaN();
  bool pass = true;
  double wall_ms = 0.0;
};

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  ~CsvWriter();
  void write_row(const ResultRow& row);

 private:
  std::FILE* f_ = nullptr;
};

std::string format_double(double x);

}  // namespace cohesive
