#include "gendid/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>

namespace gendid::csv {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

Row split_line(const std::string& line) {
  Row fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::vector<Row> read_all(std::istream& in) {
  std::vector<Row> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      first = false;
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    rows.push_back(split_line(line));
  }
  return rows;
}

double parse_double(const std::string& cell, const std::string& context) {
  const std::string s = trim(cell);
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (s.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value))
    throw ParseError(context + ": not a finite number: '" + cell + "'");
  return value;
}

int parse_int(const std::string& cell, const std::string& context) {
  const std::string s = trim(cell);
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ptr == s.data() + s.size() && ec == std::errc{} && !s.empty()) return value;
  // Accept integral floats such as "3.0".
  const double d = parse_double(s, context);
  if (d != std::floor(d)) throw ParseError(context + ": not an integer: '" + cell + "'");
  return static_cast<int>(d);
}

Matrix read_matrix(std::istream& in) {
  auto rows = read_all(in);
  if (rows.empty()) throw ParseError("matrix file is empty");
  // Tolerate a header row.
  try {
    parse_double(rows.front().front(), "");
  } catch (const ParseError&) {
    rows.erase(rows.begin());
  }
  if (rows.empty()) throw ParseError("matrix file has no numeric rows");
  const auto n_cols = static_cast<Index>(rows.front().size());
  Matrix m(static_cast<Index>(rows.size()), n_cols);
  for (Index r = 0; r < m.rows(); ++r) {
    if (static_cast<Index>(rows[r].size()) != n_cols)
      throw ParseError("matrix row " + std::to_string(r + 1) + " has " +
                       std::to_string(rows[r].size()) + " fields, expected " +
                       std::to_string(n_cols));
    for (Index c = 0; c < n_cols; ++c)
      m(r, c) = parse_double(rows[r][c], "matrix cell (" + std::to_string(r + 1) + "," +
                                             std::to_string(c + 1) + ")");
  }
  return m;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_matrix(in);
}

std::string format_number(double x) {
  if (x == 0.0) return "0";  // no "-0"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace gendid::csv
