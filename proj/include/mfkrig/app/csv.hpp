#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mfkrig/types.hpp"

namespace mfkrig::app {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

/// Parses a comma-separated file with a mandatory header row and '.'-decimal
/// floats. Throws ParseError with the offending row and column.
CsvTable parse_csv(const std::string& text, const std::string& source = "<input>");
CsvTable read_csv(const std::string& path);

/// Writes with 17 significant digits so values round-trip exactly.
std::string format_csv(const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);

/// Treats all columns but the last as inputs. Throws ParseError when the
/// column count differs from expected_columns (if non-negative).
Dataset dataset_from_csv(const CsvTable& table, Eigen::Index expected_columns = -1, const std::string& source = "");

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace mfkrig::app
