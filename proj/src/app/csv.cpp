#include "mfkrig/app/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mfkrig/error.hpp"

namespace mfkrig::app {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  CsvTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (blank(line)) throw Error(ErrorCode::ParseError, source + ": missing header row");
  for (const auto& h : split_line(line)) table.header.push_back(trim(h));
  const std::size_t cols = table.header.size();

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split_line(line);
    if (cells.size() != cols) {
      throw Error(ErrorCode::ParseError, source + ": row " + std::to_string(line_no) + " has " +
                                             std::to_string(cells.size()) + " columns, header has " +
                                             std::to_string(cols));
    }
    std::vector<double> row(cols);
    for (std::size_t j = 0; j < cols; ++j) {
      const std::string cell = trim(cells[j]);
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError, source + ": row " + std::to_string(line_no) + ", column " +
                                               std::to_string(j + 1) + ": cannot parse '" + cell + "' as a number");
      }
      row[j] = v;
    }
    rows.push_back(std::move(row));
  }

  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::InvalidConfig, "write to '" + path + "' failed");
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text_file(path), path); }

std::string format_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j) out += ',';
    out += table.header[j];
  }
  out += '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      if (j) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", table.values(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const std::string& path, const CsvTable& table) { write_text_file(path, format_csv(table)); }

Dataset dataset_from_csv(const CsvTable& table, Eigen::Index expected_columns, const std::string& source) {
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  const std::string where = source.empty() ? "" : source + ": ";
  if (cols < 2) throw Error(ErrorCode::ParseError, where + "need at least one input column and one output column");
  if (expected_columns >= 0 && cols != expected_columns) {
    throw Error(ErrorCode::ParseError, where + "found " + std::to_string(cols) + " columns, expected " +
                                           std::to_string(expected_columns));
  }
  Dataset d;
  d.x = table.values.leftCols(cols - 1);
  d.z = table.values.col(cols - 1);
  return d;
}

}  // namespace mfkrig::app
