#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazeforge::textio {

// Fixed six decimals with trailing zeros (and a bare dot) trimmed, so values
// that are really integers print as integers and CSV files stay diff-friendly.
inline std::string fmt(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("refusing to format non-finite value");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  const auto dot = s.find('.');
  auto end = s.find_last_not_of('0');
  if (end == dot) --end;
  s.erase(end + 1);
  if (s == "-0") s = "0";
  return s;
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto at = line.find(sep, start);
    if (at == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, at - start));
    start = at + 1;
  }
}

inline double to_double(const std::string& s, const char* what = "number") {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::runtime_error("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("bad ") + what + " '" + s + "'");
  }
}

inline long to_long(const std::string& s, const char* what = "integer") {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::runtime_error("");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("bad ") + what + " '" + s + "'");
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("short write to " + path);
}

// Non-empty lines of a text file; tolerates both \n and \r\n input.
inline std::vector<std::string> read_lines(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::string cur;
  for (const char c : text) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      if (!cur.empty()) lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() && cur.back() == '\r') cur.pop_back();
  if (!cur.empty()) lines.push_back(cur);
  return lines;
}

}  // namespace gazeforge::textio
