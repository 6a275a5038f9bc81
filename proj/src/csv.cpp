#include "lddl/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lddl/error.hpp"

namespace lddl::csv {

std::string format(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_columns(const std::filesystem::path& path,
                   std::span<const std::string> header,
                   std::span<const std::vector<double>> columns) {
  if (header.size() != columns.size()) {
    throw IoError("csv: header/column count mismatch for " + path.string());
  }
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) {
      throw IoError("csv: ragged columns for " + path.string());
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) {
    out << (c ? "," : "") << header[c];
  }
  out << '\n';
  std::string line;
  for (std::size_t r = 0; r < rows; ++r) {
    line.clear();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) line += ',';
      line += format(columns[c][r]);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

const std::vector<double>& Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return columns[i];
  }
  throw IoError("csv: missing column '" + name + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      t.columns.resize(t.header.size());
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw IngestError(lineno, "expected " +
                                    std::to_string(t.header.size()) +
                                    " fields, got " +
                                    std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const char* s = cells[c].c_str();
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(s, &end);
      if (cells[c].empty() || *end != '\0' || errno == ERANGE) {
        throw IngestError(lineno, "cannot parse '" + cells[c] + "'");
      }
      t.columns[c].push_back(v);
    }
  }
  if (t.header.empty()) throw IngestError(0, "missing header row");
  return t;
}

}  // namespace lddl::csv
