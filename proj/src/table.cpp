#include "smurf/table.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace smurf {

namespace {

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> split_record(const std::string& line, const std::string& source, std::size_t number) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      if (!field.empty() || was_quoted) throw InputError(where(source, number) + "stray quote inside a field");
      quoted = was_quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      if (was_quoted) throw InputError(where(source, number) + "text after a closing quote");
      field += c;
    }
  }
  if (quoted) throw InputError(where(source, number) + "unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\n\r") != std::string::npos || (!s.empty() && (s.front() == ' ' || s.back() == ' '));
}

}  // namespace

bool parse_number(std::string_view text, double& value) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(value);
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(value);
}

Table::Table(std::vector<std::string> header) : header_(std::move(header)), columns_(header_.size()) {}

Table Table::read_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t number = 0;
  Table t;
  t.source_ = source;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_record(line, source, number);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].empty()) throw InputError(where(source, number) + "empty column name");
        for (std::size_t k = 0; k < i; ++k)
          if (fields[k] == fields[i]) throw InputError(where(source, number) + "duplicate column '" + fields[i] + "'");
      }
      t.header_ = std::move(fields);
      t.columns_.assign(t.header_.size(), {});
      have_header = true;
      continue;
    }
    if (fields.size() != t.header_.size())
      throw InputError(where(source, number) + "expected " + std::to_string(t.header_.size()) + " fields, found " +
                       std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) t.columns_[c].push_back(std::move(fields[c]));
    t.lines_.push_back(number);
  }
  if (!have_header) throw InputError(source + ": no header line");
  return t;
}

Table Table::read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  return read_csv(in, path.string());
}

void Table::write_csv(std::ostream& out) const {
  auto put = [&](const std::string& s) {
    if (!needs_quotes(s)) {
      out << s;
      return;
    }
    out << '"';
    for (char c : s) {
      if (c == '"') out << '"';
      out << c;
    }
    out << '"';
  };
  for (std::size_t c = 0; c < header_.size(); ++c) {
    if (c) out << ',';
    put(header_[c]);
  }
  out << '\n';
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c = 0; c < header_.size(); ++c) {
      if (c) out << ',';
      put(columns_[c][r]);
    }
    out << '\n';
  }
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header_)
    if (h == name) return true;
  return false;
}

std::size_t Table::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return i;
  throw InputError(source_ + ": missing column '" + std::string(name) + "'");
}

const std::vector<std::string>& Table::column(std::string_view name) const { return columns_[column_index(name)]; }

Vector Table::numeric(std::string_view name) const {
  const auto& col = column(name);
  Vector v(static_cast<Index>(col.size()));
  for (std::size_t r = 0; r < col.size(); ++r)
    if (!parse_number(col[r], v[static_cast<Index>(r)]))
      throw InputError(where(source_, lines_[r]) + "column '" + std::string(name) + "': '" + col[r] +
                       "' is not a finite number");
  return v;
}

void Table::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw InputError("row has " + std::to_string(cells.size()) + " cells, table has " +
                                                       std::to_string(header_.size()) + " columns");
  for (std::size_t c = 0; c < cells.size(); ++c) columns_[c].push_back(std::move(cells[c]));
  lines_.push_back(lines_.size() + 2);
}

}  // namespace smurf
