#pragma once

#include <jasr/core/error.hpp>

#include <charconv>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace jasr::csv {

using Row = std::vector<std::string>;

/// Fixed-precision decimal; empty for a missing value.
inline std::string num(std::optional<double> v, int precision = 6) {
    if (!v) return {};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
    return buf;
}

inline std::string format(const std::vector<Row>& rows) {
    std::string out;
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i].find_first_of(",\"\n") != std::string::npos)
                throw Error("CSV field needs quoting, which this writer does not emit: " + r[i]);
            out += (i ? "," : "") + r[i];
        }
        out += '\n';
    }
    return out;
}

/// Strict reader: every row must have the header's column count.
inline std::vector<Row> parse_strict(const std::string& text) {
    std::vector<Row> rows;
    std::istringstream is(text);
    std::size_t line = 0;
    for (std::string l; std::getline(is, l);) {
        ++line;
        Row r;
        std::size_t start = 0;
        for (std::size_t c; (c = l.find(',', start)) != std::string::npos; start = c + 1) r.push_back(l.substr(start, c - start));
        r.push_back(l.substr(start));
        if (!rows.empty() && r.size() != rows.front().size())
            throw ParseError("ragged CSV row: " + std::to_string(r.size()) + " fields, header has " +
                                 std::to_string(rows.front().size()),
                             line);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ParseError("empty CSV document");
    return rows;
}

}  // namespace jasr::csv
