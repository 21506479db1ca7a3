// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace gridcal {

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double value);

/// Minimal CSV table: one header row, then string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view contents);
std::string read_text(const std::filesystem::path& path);

/// Parse a CSV cell as a double; throws ParseError naming the cell on failure.
double parse_number(std::string_view cell);

}  // namespace gridcal
