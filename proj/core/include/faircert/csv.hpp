#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace faircert::csv {

// In-memory CSV table. Quoted fields with embedded commas, quotes and
// newlines are supported; rows may end in \n or \r\n.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, -1 if absent. Names are case-sensitive.
  int column(const std::string& name) const;
};

Table parse(std::string_view text);
Table read_file(const std::string& path);

// Quotes a field if it contains a comma, quote or newline.
std::string escape(const std::string& field);

}  // namespace faircert::csv
