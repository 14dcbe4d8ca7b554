#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vitality {

/// Plain comma-separated table: no quoting, first row is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name, or throws ValidationError naming `source`.
  std::size_t column(std::string_view name, const std::string& source = {}) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// "%.17g": reads back to the same double.
std::string format_number(double v);

double parse_double(std::string_view s, const std::string& where);
std::int64_t parse_int(std::string_view s, const std::string& where);

}  // namespace vitality
