// Minimal RFC-4180 CSV reader/writer (quoted fields, escaped quotes, CRLF).
#ifndef NVCAP_CSV_HPP
#define NVCAP_CSV_HPP

#include <string>
#include <vector>

#include "nvcap/common.hpp"

namespace nvcap {

inline std::string csv_quote(const std::string& field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

inline std::string csv_join(const std::vector<std::string>& row) {
  std::string out;
  for (size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(',');
    out += csv_quote(row[i]);
  }
  return out;
}

// Parses a full CSV document into rows of fields.
inline std::vector<std::vector<std::string>> csv_parse(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        field.push_back(c);
        ++i;
      }
    } else if (c == '"') {
      in_quotes = true;
      row_started = true;
      ++i;
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
      row_started = true;
      ++i;
    } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
      row.push_back(field);
      rows.push_back(row);
      field.clear();
      row.clear();
      row_started = false;
      i += 2;
    } else if (c == '\n') {
      row.push_back(field);
      rows.push_back(row);
      field.clear();
      row.clear();
      row_started = false;
      ++i;
    } else {
      field.push_back(c);
      row_started = true;
      ++i;
    }
  }
  if (in_quotes) fail(ErrorKind::malformed_line, "unterminated quoted CSV field");
  if (row_started || !field.empty() || !row.empty()) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nvcap

#endif  // NVCAP_CSV_HPP
