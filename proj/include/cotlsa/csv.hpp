#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace cotlsa {

inline constexpr int kCsvSchema = 1;

// Shortest round-trip representation.
std::string format_number(double value);
std::string format_number(std::size_t value);
std::string format_number(long value);

// Writes "# schema=1", the header row, then one row per call. Fields
// containing commas or quotes are quoted. With write_header = false the
// schema and header lines are skipped (appending to an existing table).
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> columns, bool write_header = true);

  void row(const std::vector<std::string>& fields);
  std::size_t columns() const noexcept { return columns_.size(); }

 private:
  std::ostream& out_;
  std::vector<std::string> columns_;
};

struct CsvTable {
  int schema = 0;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Parses a file written by CsvWriter. Throws Error on a missing or unknown
// schema line.
CsvTable read_csv(std::istream& in);

}  // namespace cotlsa
