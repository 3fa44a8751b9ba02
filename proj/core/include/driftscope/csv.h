#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace driftscope::csv {

// Quotes a field when it contains a separator, quote or newline.
std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

// Fixed "%.*g" formatting; stable across runs and platforms.
std::string format_double(double v, int precision = 10);

// Splits one CSV record, honouring double-quoted fields.
std::vector<std::string> split_line(std::string_view line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws DataError when missing.
  std::size_t column(std::string_view name) const;
};

Table read(std::istream& in);

// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace driftscope::csv
