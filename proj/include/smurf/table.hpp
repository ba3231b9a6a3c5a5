#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "smurf/model.hpp"

namespace smurf {

/// Column-oriented CSV table of raw cells. Errors name the source and the
/// line number.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<std::string> header);

  /// Header line then one record per line; quoted fields may contain commas
  /// and doubled quotes. Blank lines are skipped.
  static Table read_csv(std::istream& in, const std::string& source = "<input>");
  static Table read_csv_file(const std::filesystem::path& path);
  void write_csv(std::ostream& out) const;

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return lines_.size(); }
  std::size_t cols() const noexcept { return header_.size(); }
  const std::string& source() const noexcept { return source_; }

  bool has_column(std::string_view name) const;
  /// Throws InputError naming the missing column.
  std::size_t column_index(std::string_view name) const;
  const std::vector<std::string>& column(std::string_view name) const;
  const std::string& cell(std::size_t row, std::size_t col) const { return columns_[col][row]; }
  /// Input line of a data row (1-based, header is line 1).
  std::size_t line_of(std::size_t row) const { return lines_[row]; }

  /// Parses a column as numbers.
  Vector numeric(std::string_view name) const;

  void add_row(std::vector<std::string> cells);

 private:
  std::string source_ = "<table>";
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> columns_;
  std::vector<std::size_t> lines_;
};

/// Strict number parse of a whole cell; false on any trailing text.
bool parse_number(std::string_view text, double& value);

/// Shortest round-tripping text of a double.
std::string format_number(double value);

}  // namespace smurf
