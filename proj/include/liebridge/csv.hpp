#pragma once

#include <string>
#include <vector>

namespace liebridge {

/// Shortest decimal string that parses back to exactly x ("nan", "inf", "-inf" otherwise).
std::string format_double(double x);

/// RFC-4180 field quoting: fields containing a comma, quote, CR or LF are quoted and
/// embedded quotes doubled.
std::string csv_quote(const std::string& field);

/// In-memory CSV document with a mandatory header row.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  std::size_t columns() const { return header_.size(); }
  /// Start a row; cells are appended with add() and the row is closed by end_row().
  CsvWriter& add(double x);
  CsvWriter& add(long long x);
  CsvWriter& add(int x) { return add(static_cast<long long>(x)); }
  CsvWriter& add(const std::string& s);
  CsvWriter& add_empty();
  /// Throws InputError when the row has the wrong number of cells.
  void end_row();

  const std::string& str() const { return out_; }

 private:
  void sep();
  std::vector<std::string> header_;
  std::string out_;
  std::size_t cells_ = 0;
};

/// Splits one CSV document into rows of raw (unquoted) fields.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace liebridge
