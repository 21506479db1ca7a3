// SPDX-License-Identifier: Apache-2.0
#include "gridcal/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gridcal/error.hpp"

namespace gridcal {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0";
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) throw Error("format_number: conversion failed");
    return std::string(buffer, end);
}

double parse_number(std::string_view cell) {
    if (cell == "nan") return std::nan("");
    if (cell == "inf") return INFINITY;
    if (cell == "-inf") return -INFINITY;
    double value = 0.0;
    auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || end != cell.data() + cell.size()) {
        throw ParseError("not a number: '" + std::string(cell) + "'");
    }
    return value;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ParseError("missing CSV column '" + std::string(name) + "'");
}

namespace {

void append_row(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    out += '\n';
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(line);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::string out;
    append_row(out, table.header);
    for (const auto& row : table.rows) append_row(out, row);
    write_text(path, out);
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::istringstream stream(read_text(path));
    CsvTable table;
    std::string line;
    if (!std::getline(stream, line)) throw ParseError(path.string() + ": empty CSV file");
    table.header = split_row(line);
    while (std::getline(stream, line)) {
        if (line.empty()) continue;
        auto row = split_row(line);
        if (row.size() != table.header.size()) {
            throw ParseError(path.string() + ": row with " + std::to_string(row.size()) +
                             " cells, expected " + std::to_string(table.header.size()));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_text(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace gridcal
