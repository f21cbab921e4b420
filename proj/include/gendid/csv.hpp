#pragma once

#include "gendid/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace gendid::csv {

using Row = std::vector<std::string>;

// Splits one CSV record. Handles double-quoted fields with "" escapes; does not
// support embedded newlines.
Row split_line(const std::string& line);

// Reads all non-empty records. Strips a UTF-8 BOM and trailing CR.
std::vector<Row> read_all(std::istream& in);

std::string trim(const std::string& s);

// Numeric cell parsing; throws ParseError with `context` in the message.
double parse_double(const std::string& cell, const std::string& context);
int parse_int(const std::string& cell, const std::string& context);

// Reads a headerless numeric matrix (rows of equal length).
Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::string& path);

// 12 significant digits.
std::string format_number(double x);

}  // namespace gendid::csv
