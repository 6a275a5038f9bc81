#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lddl::csv {

/// Shortest-safe round-trip formatting: 17 significant digits.
std::string format(double x);

/// Writes a header row and equally long numeric columns.
void write_columns(const std::filesystem::path& path,
                   std::span<const std::string> header,
                   std::span<const std::vector<double>> columns);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  /// Column by header name; throws IoError when absent.
  const std::vector<double>& column(const std::string& name) const;
};

/// Reads a numeric CSV with one header row. Throws IoError / IngestError.
Table read_table(const std::filesystem::path& path);

}  // namespace lddl::csv
