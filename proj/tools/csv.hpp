#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fwl/core.hpp"

namespace fwl::cli {

class FileNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Strict comma-separated table: header row required, '.' decimal point, no
/// quoting, no missing values. Numeric conversion happens per column so the
/// cluster column can stay textual.
class CsvTable {
 public:
  CsvTable(std::vector<std::string> header,
           std::vector<std::vector<std::string>> rows);

  Index n_rows() const { return static_cast<Index>(rows_.size()); }
  const std::vector<std::string>& header() const { return header_; }

  bool has_column(const std::string& name) const;

  /// Column values parsed as finite doubles; throws ParseError with the
  /// offending line on any failure.
  Vector numeric_column(const std::string& name) const;

  std::vector<std::string> string_column(const std::string& name) const;

 private:
  std::size_t column_index(const std::string& name) const;

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Reads and validates a CSV file. Blank or ragged fields are rejected with
/// their line number.
CsvTable read_csv(const std::string& path);

}  // namespace fwl::cli
