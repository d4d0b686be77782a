#ifndef INSURTREND_TABLE_HPP
#define INSURTREND_TABLE_HPP

#include "insurtrend/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace insurtrend {

enum class TableFormat { csv, json };

inline TableFormat parse_table_format(std::string_view s) {
    if (s == "csv") return TableFormat::csv;
    if (s == "json") return TableFormat::json;
    throw Error("unknown table format '" + std::string(s) + "' (expected csv or json)");
}

inline const char* extension(TableFormat f) { return f == TableFormat::csv ? ".csv" : ".json"; }

/// Parses a whole string as a finite double. Returns false on any trailing garbage.
inline bool parse_double(std::string_view s, double& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_int(std::string_view s, long long& out) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return !s.empty() && ec == std::errc{} && ptr == s.data() + s.size();
}

/// Splits one delimited line (RFC 4180 quoting: "" inside quotes is a quote).
inline std::vector<std::string> split_delimited(std::string_view line, char delimiter) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

/// A flat table used for every exported artifact. Cells hold already-rendered
/// strings.
struct Table {
    std::map<std::string, std::string> meta;
    std::vector<std::string> columns;
    std::vector<bool> numeric;
    std::vector<std::vector<std::string>> rows;

    Table() = default;
    Table(std::vector<std::string> cols, std::vector<bool> is_numeric)
        : columns(std::move(cols)), numeric(std::move(is_numeric)) {}

    std::size_t column(std::string_view name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) throw Error("table has no column '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    bool has_column(std::string_view name) const {
        return std::find(columns.begin(), columns.end(), name) != columns.end();
    }

    double number(std::size_t row, std::size_t col) const {
        double v = 0.0;
        if (!parse_double(rows.at(row).at(col), v)) {
            throw Error("row " + std::to_string(row + 1) + ", column '" + columns.at(col) +
                        "': not a number: '" + rows[row][col] + "'");
        }
        return v;
    }
};

namespace detail {

inline std::string csv_quote(const std::string& s, char delimiter) {
    if (s.find_first_of(std::string{delimiter, '"', '\n'}) == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    return out + "\"";
}

}  // namespace detail

inline std::string to_csv(const Table& t, char delimiter = ',') {
    std::ostringstream os;
    for (const auto& [k, v] : t.meta) os << "# " << k << '=' << v << '\n';
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (c) os << delimiter;
        os << detail::csv_quote(t.columns[c], delimiter);
    }
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) os << delimiter;
            os << detail::csv_quote(row[c], delimiter);
        }
        os << '\n';
    }
    return os.str();
}

inline std::string to_json(const Table& t) {
    std::ostringstream os;
    os << "{\n  \"meta\": {";
    bool first = true;
    for (const auto& [k, v] : t.meta) {
        os << (first ? "" : ", ") << nlohmann::json(k).dump() << ": " << nlohmann::json(v).dump();
        first = false;
    }
    os << "},\n  \"columns\": [";
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        os << (c ? ", " : "") << nlohmann::json(t.columns[c]).dump();
    }
    os << "],\n  \"rows\": [";
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        os << (r ? ",\n    [" : "\n    [");
        for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
            if (c) os << ", ";
            const bool num = c < t.numeric.size() && t.numeric[c];
            os << (num ? t.rows[r][c] : nlohmann::json(t.rows[r][c]).dump());
        }
        os << ']';
    }
    os << (t.rows.empty() ? "]\n}\n" : "\n  ]\n}\n");
    return os.str();
}

inline Table parse_csv(std::istream& in, char delimiter = ',') {
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto body = line.substr(line.find_first_not_of("# "));
            const auto eq = body.find('=');
            if (eq != std::string::npos) t.meta[body.substr(0, eq)] = body.substr(eq + 1);
            continue;
        }
        auto fields = split_delimited(line, delimiter);
        if (!have_header) {
            t.columns = std::move(fields);
            have_header = true;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    t.numeric.assign(t.columns.size(), false);
    return t;
}

inline Table parse_json_table(std::istream& in) {
    const auto j = nlohmann::json::parse(in);
    Table t;
    for (const auto& [k, v] : j.at("meta").items()) t.meta[k] = v.get<std::string>();
    for (const auto& c : j.at("columns")) t.columns.push_back(c.get<std::string>());
    t.numeric.assign(t.columns.size(), false);
    for (const auto& r : j.at("rows")) {
        std::vector<std::string> row;
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (r[c].is_string()) {
                row.push_back(r[c].get<std::string>());
            } else {
                row.push_back(format_double(r[c].get<double>()));
                if (c < t.numeric.size()) t.numeric[c] = true;
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_table(const std::filesystem::path& path, const Table& t, TableFormat fmt) {
    write_text_file(path, fmt == TableFormat::csv ? to_csv(t) : to_json(t));
}

/// Reads a table, choosing the parser from the file extension.
inline Table read_table(const std::filesystem::path& path, char delimiter = ',') {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    if (path.extension() == ".json") return parse_json_table(in);
    return parse_csv(in, delimiter);
}

}  // namespace insurtrend

#endif
