#include "liebridge/csv.hpp"

#include <charconv>
#include <cmath>

#include "liebridge/error.hpp"

namespace liebridge {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw InputError("csv header must not be empty");
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out_ += ',';
    out_ += csv_quote(header_[i]);
  }
  out_ += '\n';
}

void CsvWriter::sep() {
  if (cells_ > 0) out_ += ',';
  ++cells_;
}

CsvWriter& CsvWriter::add(double x) {
  sep();
  out_ += format_double(x);
  return *this;
}

CsvWriter& CsvWriter::add(long long x) {
  sep();
  out_ += std::to_string(x);
  return *this;
}

CsvWriter& CsvWriter::add(const std::string& s) {
  sep();
  out_ += csv_quote(s);
  return *this;
}

CsvWriter& CsvWriter::add_empty() {
  sep();
  return *this;
}

void CsvWriter::end_row() {
  if (cells_ != header_.size()) {
    throw InputError("csv row has " + std::to_string(cells_) + " cells, header has " +
                     std::to_string(header_.size()));
  }
  out_ += '\n';
  cells_ = 0;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace liebridge
