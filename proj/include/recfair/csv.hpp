#pragma once

#include <string>
#include <vector>

namespace recfair {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, -1 if absent.
  int column(const std::string& name) const;
};

// Reads a UTF-8, comma-separated file with a header row. Quoted fields may
// contain commas and doubled quotes. Trailing \r is stripped.
CsvTable read_csv(const std::string& path);

// Quotes a field only when it contains a comma, quote or newline.
std::string csv_escape(const std::string& field);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace recfair
