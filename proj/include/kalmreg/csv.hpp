#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "kalmreg/errors.hpp"

namespace kalmreg {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double value) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    (void)ec;
    return std::string(buf.data(), end);
}

/// Strict numeric field parse. The whole field (after trimming spaces) must be a number.
inline double parse_double_field(std::string_view field, std::size_t row, std::size_t column) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    if (field.empty()) {
        throw CsvError("empty cell at row " + std::to_string(row) + ", column " +
                           std::to_string(column),
                       row, column);
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw CsvError("non-numeric cell '" + std::string(field) + "' at row " +
                           std::to_string(row) + ", column " + std::to_string(column),
                       row, column);
    }
    return value;
}

/// Splits one CSV line on the delimiter. No quoting rules; a trailing '\r' is dropped.
inline std::vector<std::string> split_fields(std::string_view line, char delimiter) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delimiter, start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

} // namespace kalmreg
