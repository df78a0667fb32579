#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace fwl::cli {

namespace {

std::string trimmed(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::string raw = comma == std::string::npos
                                ? line.substr(start)
                                : line.substr(start, comma - start);
    const std::string field = trimmed(raw);
    if (field.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ", field " +
                       std::to_string(fields.size() + 1) + ": empty value");
    }
    fields.push_back(field);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header,
                   std::vector<std::vector<std::string>> rows)
    : header_(std::move(header)), rows_(std::move(rows)) {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    for (std::size_t j = i + 1; j < header_.size(); ++j) {
      if (header_[i] == header_[j]) {
        throw ParseError("duplicate column name '" + header_[i] + "'");
      }
    }
  }
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != header_.size()) {
      throw ParseError("line " + std::to_string(r + 2) + ": expected " +
                       std::to_string(header_.size()) + " fields, found " +
                       std::to_string(rows_[r].size()));
    }
  }
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header_.begin(), header_.end(), name) != header_.end();
}

std::size_t CsvTable::column_index(const std::string& name) const {
  const auto it = std::find(header_.begin(), header_.end(), name);
  if (it == header_.end()) {
    throw ParseError("column '" + name + "' not found in the header");
  }
  return static_cast<std::size_t>(it - header_.begin());
}

Vector CsvTable::numeric_column(const std::string& name) const {
  const std::size_t col = column_index(name);
  Vector values(n_rows());
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    const std::string& field = rows_[r][col];
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || !std::isfinite(v)) {
      throw ParseError("line " + std::to_string(r + 2) + ", column '" + name +
                       "': '" + field + "' is not a finite number");
    }
    values(static_cast<Index>(r)) = v;
  }
  return values;
}

std::vector<std::string> CsvTable::string_column(const std::string& name) const {
  const std::size_t col = column_index(name);
  std::vector<std::string> values;
  values.reserve(rows_.size());
  for (const auto& row : rows_) {
    values.push_back(row[col]);
  }
  return values;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw FileNotFound("cannot open '" + path + "'");
  }

  std::string line;
  std::size_t line_no = 0;
  bool in_trailing_blanks = false;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) {
      if (line_no == 1) throw ParseError("line 1: header row is empty");
      in_trailing_blanks = true;
      continue;
    }
    if (in_trailing_blanks) {
      throw ParseError("line " + std::to_string(line_no - 1) + ": blank line inside the data");
    }
    auto fields = split_line(line, line_no);
    if (line_no == 1) {
      header = std::move(fields);
    } else {
      rows.push_back(std::move(fields));
    }
  }
  if (header.empty()) {
    throw ParseError("'" + path + "' has no header row");
  }
  return CsvTable(std::move(header), std::move(rows));
}

}  // namespace fwl::cli
