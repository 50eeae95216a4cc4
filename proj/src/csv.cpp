#include "cotlsa/csv.hpp"

#include <charconv>
#include <istream>
#include <stdexcept>

#include "cotlsa/errors.hpp"

namespace cotlsa {

namespace {

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

template <class T>
std::string to_chars_string(T value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_number(double value) { return to_chars_string(value); }
std::string format_number(std::size_t value) { return to_chars_string(value); }
std::string format_number(long value) { return to_chars_string(value); }

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> columns, bool write_header)
    : out_(out), columns_(std::move(columns)) {
  if (!write_header) return;
  out_ << "# schema=" << kCsvSchema << '\n';
  for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "," : "") << quote(columns_[i]);
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_.size()) throw DimensionMismatch("CsvWriter: field count differs from header");
  for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << quote(fields[i]);
  out_ << '\n';
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# schema=", 0) != 0) throw Error("csv: missing schema line");
  t.schema = std::stoi(line.substr(9));
  if (t.schema != kCsvSchema) throw Error("csv: unsupported schema " + line.substr(9));
  if (!std::getline(in, line)) throw Error("csv: missing header");
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_line(line));
  }
  return t;
}

}  // namespace cotlsa
