#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace solarcast {

/// Minimal comma-separated reader: header row, no quoting, blank lines skipped.
/// Errors are IngestionError naming file, line and column.
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path);

  /// Column index of `name`; throws when the header lacks it.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;

  /// Advances to the next data row; false at end of file.
  bool next();

  std::string_view field(std::size_t col) const;
  double number(std::size_t col) const;
  long long integer(std::size_t col) const;
  std::size_t line() const { return line_; }

  [[noreturn]] void fail(std::size_t col, const std::string& what) const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::string row_;
  std::vector<std::string_view> fields_;
  std::size_t line_ = 0;
};

/// Shortest round-trip decimal representation.
std::string format_number(double v);

}  // namespace solarcast
