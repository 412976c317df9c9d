#pragma once

#include <spillover/common.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spillover::csv {

// Header-bearing RFC-4180 table held in memory.
class Table {
 public:
  Table() = default;
  Table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows);

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  // Column index or nullopt when the header lacks it.
  std::optional<std::size_t> column(std::string_view name) const;
  // Throws InvalidArgument listing the first missing name.
  void require_columns(const std::vector<std::string>& names) const;

  const std::string& at(std::size_t row, std::string_view name) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

Table parse(std::string_view text);
Table read_file(const std::filesystem::path& path);

// Quotes a field when it holds a delimiter, quote, or line break.
std::string escape(std::string_view field);

// Shortest representation that parses back to the same double.
std::string format_number(double value);
std::string format_number(long long value);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

// Parses a full-field double; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

}  // namespace spillover::csv
