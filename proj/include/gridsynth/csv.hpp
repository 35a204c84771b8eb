#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gridsynth::csv {

struct Row {
  int line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Column index of `name`; throws ValidationError naming the file if absent.
  int column(std::string_view name) const;
  int find_column(std::string_view name) const;  // -1 when absent
};

/// Reads a comma-separated file with a header row. Double-quoted fields may
/// contain commas; blank lines are skipped.
Table read(const std::filesystem::path& path);
Table parse(std::string_view text, std::string source);

double to_double(const Table& t, const Row& r, int col, std::string_view field);
long long to_int(const Table& t, const Row& r, int col, std::string_view field);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

}  // namespace gridsynth::csv
