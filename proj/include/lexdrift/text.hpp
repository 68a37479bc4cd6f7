#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the readers and writers.
namespace lexdrift::text {

bool isSpace(char c) noexcept;

std::string_view trim(std::string_view s) noexcept;

/// ASCII lower-casing; bytes >= 0x80 pass through so UTF-8 stays intact.
std::string toLower(std::string_view s);

/// Maximal runs of non-whitespace characters, in order.
std::vector<std::string_view> splitWords(std::string_view s);

/// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8Length(std::string_view s) noexcept;

/// Fixed-point rendering with `decimals` digits, independent of the global locale.
std::string fixed(double value, int decimals);

/// Shortest round-trippable rendering of a double.
std::string shortest(double value);

// CSV (RFC 4180 quoting).
std::string csvField(std::string_view s);
std::vector<std::string> parseCsvLine(std::string_view line, std::size_t lineNo);

/// Reads a CSV stream with a header row into records of strings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws ValidationError if absent
};
CsvTable readCsv(std::istream& in);

/// Natural ordering for identifiers: all-digit ids compare numerically, otherwise lexicographically.
bool idLess(std::string_view a, std::string_view b) noexcept;

}  // namespace lexdrift::text
