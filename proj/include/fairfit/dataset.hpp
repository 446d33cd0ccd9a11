#ifndef FAIRFIT_DATASET_HPP
#define FAIRFIT_DATASET_HPP

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairfit/csv.hpp"
#include "fairfit/types.hpp"

namespace fairfit {

// Column roles for one modelling problem. `predictors` empty means
// "every column that is neither the response nor sensitive".
struct Schema {
    std::string response;
    std::vector<std::string> sensitive;
    std::vector<std::string> predictors;
    bool scale = false;

    void validate(const std::vector<std::string>& header) const {
        auto present = [&](const std::string& name) {
            return std::find(header.begin(), header.end(), name) != header.end();
        };
        if (response.empty()) throw DataError("schema: response column name is empty");
        if (!present(response)) throw DataError("schema: response column '" + response + "' not in header");
        if (sensitive.empty()) throw DataError("schema: at least one sensitive column is required");
        std::set<std::string> seen;
        for (const auto& s : sensitive) {
            if (!present(s)) throw DataError("schema: sensitive column '" + s + "' not in header");
            if (s == response) throw DataError("schema: '" + s + "' is both response and sensitive");
            if (!seen.insert(s).second) throw DataError("schema: duplicate sensitive column '" + s + "'");
        }
        for (const auto& p : predictors) {
            if (!present(p)) throw DataError("schema: predictor column '" + p + "' not in header");
            if (p == response) throw DataError("schema: '" + p + "' is both response and predictor");
            if (seen.count(p)) throw DataError("schema: '" + p + "' is both sensitive and predictor");
        }
    }

    std::vector<std::string> effective_predictors(const std::vector<std::string>& header) const {
        if (!predictors.empty()) return predictors;
        std::vector<std::string> out;
        for (const auto& name : header) {
            if (name == response) continue;
            if (std::find(sensitive.begin(), sensitive.end(), name) != sensitive.end()) continue;
            out.push_back(name);
        }
        return out;
    }
};

inline Schema schema_from_json(const nlohmann::json& j) {
    Schema s;
    if (!j.contains("response")) throw DataError("schema: missing key 'response'");
    s.response = j.at("response").get<std::string>();
    if (!j.contains("sensitive")) throw DataError("schema: missing key 'sensitive'");
    s.sensitive = j.at("sensitive").get<std::vector<std::string>>();
    if (j.contains("predictors")) s.predictors = j.at("predictors").get<std::vector<std::string>>();
    if (j.contains("scale")) s.scale = j.at("scale").get<bool>();
    return s;
}

inline Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open schema file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schema file " + path + ": " + e.what());
    }
    return schema_from_json(j);
}

// Either a numeric vector or a categorical vector of string levels.
struct RawColumn {
    std::string name;
    bool numeric = true;
    std::vector<double> values;        // when numeric
    std::vector<std::string> labels;   // when categorical
};

struct RawDataset {
    std::vector<RawColumn> columns;
    Index n = 0;
    Index dropped_rows = 0;

    const RawColumn& column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return c;
        throw DataError("column '" + name + "' not found");
    }
    bool has_column(const std::string& name) const {
        for (const auto& c : columns)
            if (c.name == name) return true;
        return false;
    }
    std::vector<std::string> header() const {
        std::vector<std::string> h;
        h.reserve(columns.size());
        for (const auto& c : columns) h.push_back(c.name);
        return h;
    }

    // Row subset in the given order; used by the cross-validation harness.
    RawDataset subset(const std::vector<Index>& rows) const {
        RawDataset out;
        out.n = static_cast<Index>(rows.size());
        out.columns.reserve(columns.size());
        for (const auto& c : columns) {
            RawColumn oc;
            oc.name = c.name;
            oc.numeric = c.numeric;
            if (c.numeric) {
                oc.values.reserve(rows.size());
                for (Index r : rows) oc.values.push_back(c.values[static_cast<std::size_t>(r)]);
            } else {
                oc.labels.reserve(rows.size());
                for (Index r : rows) oc.labels.push_back(c.labels[static_cast<std::size_t>(r)]);
            }
            out.columns.push_back(std::move(oc));
        }
        return out;
    }
};

namespace detail {

inline bool is_missing_field(const std::string& s) {
    return s.empty() || s == "NA";
}

inline bool parse_full_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* begin = s.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end == begin + s.size();
}

}  // namespace detail

// Reads a CSV file and types its columns. Rows with a missing value
// ("" or "NA") in any schema-referenced column are dropped and counted;
// columns whose remaining entries do not all parse as numbers become
// categorical.
inline RawDataset load_csv(const std::string& path, const Schema& schema) {
    const CsvTable table = read_csv(path);
    schema.validate(table.header);

    std::set<std::size_t> referenced;
    auto mark = [&](const std::string& name) {
        for (std::size_t j = 0; j < table.header.size(); ++j)
            if (table.header[j] == name) referenced.insert(j);
    };
    mark(schema.response);
    for (const auto& s : schema.sensitive) mark(s);
    for (const auto& p : schema.effective_predictors(table.header)) mark(p);

    std::vector<std::size_t> kept;
    kept.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        bool missing = false;
        for (std::size_t j : referenced) {
            if (detail::is_missing_field(table.rows[i][j])) {
                missing = true;
                break;
            }
        }
        if (!missing) kept.push_back(i);
    }
    if (kept.empty()) throw DataError(path + ": no rows left after removing missing values");

    RawDataset out;
    out.n = static_cast<Index>(kept.size());
    out.dropped_rows = static_cast<Index>(table.rows.size() - kept.size());
    out.columns.resize(table.header.size());
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        RawColumn& col = out.columns[j];
        col.name = table.header[j];
        std::vector<double> values(kept.size());
        bool numeric = true;
        for (std::size_t k = 0; k < kept.size(); ++k) {
            if (!detail::parse_full_double(table.rows[kept[k]][j], values[k])) {
                numeric = false;
                break;
            }
        }
        col.numeric = numeric;
        if (numeric) {
            col.values = std::move(values);
        } else {
            col.labels.reserve(kept.size());
            for (std::size_t k : kept) col.labels.push_back(table.rows[k][j]);
        }
    }
    return out;
}

inline void write_csv(const RawDataset& data, std::ostream& os) {
    for (std::size_t j = 0; j < data.columns.size(); ++j)
        os << (j ? "," : "") << csv_quote(data.columns[j].name);
    os << "\n";
    for (Index i = 0; i < data.n; ++i) {
        for (std::size_t j = 0; j < data.columns.size(); ++j) {
            const auto& c = data.columns[j];
            if (j) os << ",";
            if (c.numeric) os << format_double(c.values[static_cast<std::size_t>(i)]);
            else os << csv_quote(c.labels[static_cast<std::size_t>(i)]);
        }
        os << "\n";
    }
}

}  // namespace fairfit

#endif
