#ifndef FAIRFIT_CSV_HPP
#define FAIRFIT_CSV_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fairfit/types.hpp"

namespace fairfit {

// One parsed CSV file: a header row plus string cells, RFC-4180 rules
// (quoted fields, "" escapes, commas and newlines allowed inside quotes).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::vector<std::string>> parse_csv_records(const std::string& text,
                                                               const std::string& origin) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    const std::size_t len = text.size();
    for (std::size_t i = 0; i < len; ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < len && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted)
                    throw DataError(origin + ": stray quote inside unquoted field");
                in_quotes = true;
                field_was_quoted = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < len && text[i + 1] == '\n') ++i;
                end_record();
                break;
            case '\n':
                end_record();
                break;
            default:
                field.push_back(c);
        }
    }
    if (in_quotes) throw DataError(origin + ": unterminated quoted field");
    if (!field.empty() || field_was_quoted || !record.empty()) end_record();
    return records;
}

}  // namespace detail

inline CsvTable parse_csv(const std::string& text, const std::string& origin = "csv") {
    auto records = detail::parse_csv_records(text, origin);
    if (records.empty()) throw DataError(origin + ": no header row");
    CsvTable table;
    table.header = std::move(records.front());
    const std::size_t width = table.header.size();
    for (std::size_t k = 1; k < records.size(); ++k) {
        if (records[k].size() == 1 && records[k][0].empty()) continue;  // trailing blank line
        if (records[k].size() != width) {
            throw DataError(origin + ": row " + std::to_string(k) + " has " +
                            std::to_string(records[k].size()) + " fields, header has " +
                            std::to_string(width));
        }
        table.rows.push_back(std::move(records[k]));
    }
    return table;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), path);
}

// Shortest representation that round-trips a double (17 significant digits max).
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace fairfit

#endif
