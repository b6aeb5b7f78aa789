#include "solarcast/csv.hpp"

#include <charconv>
#include <cmath>

#include "solarcast/error.hpp"

namespace solarcast {

namespace {

void split(std::string_view row, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = row.find(',', start);
    std::string_view f = row.substr(start, comma == std::string_view::npos ? row.npos : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
}

}  // namespace

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw IngestionError("cannot open '" + path.string() + "'");
  std::string head;
  if (!std::getline(in_, head)) throw IngestionError("'" + path.string() + "' is empty");
  ++line_;
  if (head.size() >= 3 && head.compare(0, 3, "\xEF\xBB\xBF") == 0) head.erase(0, 3);
  std::vector<std::string_view> cols;
  split(head, cols);
  for (auto c : cols) header_.emplace_back(c);
}

bool CsvReader::has_column(std::string_view name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t CsvReader::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw IngestionError(path_.string() + ": missing column '" + std::string(name) + "'");
}

bool CsvReader::next() {
  while (std::getline(in_, row_)) {
    ++line_;
    if (row_.find_first_not_of(" \t\r") == std::string::npos) continue;
    split(row_, fields_);
    if (fields_.size() != header_.size())
      throw IngestionError(path_.string() + ":" + std::to_string(line_) + ": expected " +
                           std::to_string(header_.size()) + " fields, got " +
                           std::to_string(fields_.size()));
    return true;
  }
  return false;
}

std::string_view CsvReader::field(std::size_t col) const { return fields_.at(col); }

void CsvReader::fail(std::size_t col, const std::string& what) const {
  throw IngestionError(path_.string() + ":" + std::to_string(line_) + ": column '" +
                       header_.at(col) + "': " + what);
}

double CsvReader::number(std::size_t col) const {
  const auto f = field(col);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size() || !std::isfinite(v))
    fail(col, "unparseable value '" + std::string(f) + "'");
  return v;
}

long long CsvReader::integer(std::size_t col) const {
  const auto f = field(col);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc{} || ptr != f.data() + f.size())
    fail(col, "unparseable integer '" + std::string(f) + "'");
  return v;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace solarcast
