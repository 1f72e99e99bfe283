#include "cohesive/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace cohesive {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("KeyValueConfig: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InputError("KeyValueConfig: missing '=' on line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InputError("KeyValueConfig: empty key on line " + std::to_string(lineno));
    cfg.values_[key] = value;
  }
  return cfg;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    if (it->second == "inf") return std::numeric_limits<double>::infinity();
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw InputError("KeyValueConfig: bad numeric value for " + key + ": " + it->second);
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw InputError("KeyValueConfig: bad integer value for " + key + ": " + it->second);
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InputError("KeyValueConfig: bad boolean value for " + key + ": " + v);
}

std::vector<double> KeyValueConfig::get_list(const std::string& key,
                                             const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::istringstream ss(it->second);
  std::string token;
  while (std::getline(ss, token, ',')) {
    token = trim(token);
    if (token.empty()) continue;
    try {
      out.push_back(token == "inf" ? std::numeric_limits<double>::infinity()
                                   : std::stod(token));
    } catch (const std::exception&) {
      throw InputError("KeyValueConfig: bad list entry for " + key + ": " + token);
    }
  }
  if (out.empty()) throw InputError("KeyValueConfig: empty list for " + key);
  return out;
}

std::string KeyValueConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (!out.empty()) out += ";";
    out += k + "=" + v;
  }
  return out;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path) {
  f_ = std::fopen(path.c_str(), "w");
  if (!f_) throw InputError("CsvWriter: cannot open " + path);
  std::fprintf(f_, "# cohesive-phase results schema v1\n");
  std::fprintf(f_, "subcommand,params,metric,value,tolerance,pass,wall_ms\n");
}

CsvWriter::~CsvWriter() {
  if (f_) std::fclose(f_);
}

void CsvWriter::write_row(const ResultRow& row) {
  std::fprintf(f_, "%s,\"%s\",%s,%s,%s,%d,%.3f\n", row.subcommand.c_str(), row.params.c_str(),
               row.metric.c_str(), format_double(row.value).c_str(),
               format_double(row.tolerance).c_str(), row.pass ? 1 : 0, row.wall_ms);
}

}  // namespace cohesive
