#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace betacoal {

// Shortest round-trip decimal; NaN is written as an empty field.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(&os) {}

  CsvWriter& field(std::string_view s) {
    sep();
    *os_ << csv_escape(s);
    return *this;
  }
  CsvWriter& field(double v) { return field(std::string_view(format_double(v))); }
  CsvWriter& field(std::int64_t v) { return field(std::string_view(std::to_string(v))); }
  CsvWriter& field(int v) { return field(static_cast<std::int64_t>(v)); }
  CsvWriter& field(std::uint64_t v) { return field(std::string_view(std::to_string(v))); }

  void row(const std::vector<std::string>& fields) {
    for (const auto& f : fields) field(std::string_view(f));
    end_row();
  }
  void end_row() {
    *os_ << "\r\n";
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) *os_ << ',';
    first_ = false;
  }
  std::ostream* os_;
  bool first_ = true;
};

// key = value lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& source = "config") {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline std::vector<std::int64_t> parse_int_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    const double v = std::stod(item, &pos);
    if (v != std::floor(v) || v < 0) throw std::invalid_argument("not a non-negative integer: " + item);
    out.push_back(static_cast<std::int64_t>(v));
  }
  return out;
}

}  // namespace betacoal
