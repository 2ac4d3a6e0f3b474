#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xchan {

// Shortest round-trip decimal form; "NA" for nullopt, "nan"/"inf"/"-inf"
// for non-finite values.
std::string format_number(double value);
std::string format_number(std::optional<double> value);

// nullopt for "NA" or an empty cell. Throws InvalidInput on anything else
// that does not parse completely.
std::optional<double> parse_number(std::string_view cell);

// Quotes a cell when it contains a comma, quote or line break.
std::string csv_escape(std::string_view cell);
std::string csv_join(const std::vector<std::string>& cells);

// One CSV record (RFC 4180 quoting, no embedded line breaks).
std::vector<std::string> csv_split(std::string_view line);

// Writes through a temporary sibling and renames it into place. Throws Error
// on failure.
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace xchan
