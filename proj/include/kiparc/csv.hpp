#pragma once

// CSV serialization. Layout: '#'-prefixed metadata lines, one header line of
// column names, then numeric rows. Numbers are rendered with std::to_chars
// at 12 significant digits, so output is locale-independent and
// bit-reproducible for identical inputs.

#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "kiparc/errors.hpp"

namespace kiparc {

[[nodiscard]] inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                   std::chars_format::general, 12);
    return {buf, res.ptr};
}

/// In-memory CSV document; serialize() produces the full file contents.
struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;  // rendered '# key: value'
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void add_meta(std::string key, std::string value) {
        meta.emplace_back(std::move(key), std::move(value));
    }

    void add_row(std::initializer_list<double> values) { rows.emplace_back(values); }

    [[nodiscard]] std::string serialize() const {
        std::string out;
        for (const auto& [key, value] : meta) {
            out += "# " + key + ": " + value + "\n";
        }
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) out += ',';
            out += columns[i];
        }
        out += '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += format_number(row[i]);
            }
            out += '\n';
        }
        return out;
    }
};

/// Parsed CSV with metadata preserved and 1-based source line numbers kept
/// for row-level error reporting.
struct ParsedCsv {
    std::map<std::string, std::string> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> row_lines;

    [[nodiscard]] int column_index(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace detail

/// Parse CSV text; `origin` names the source in error messages.
[[nodiscard]] inline ParsedCsv parse_csv(std::string_view text, const std::string& origin) {
    ParsedCsv out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool have_header = false;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos
                                                     ? std::string_view::npos
                                                     : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::string_view body = detail::trim(line.substr(1));
            const std::size_t colon = body.find(':');
            if (colon != std::string_view::npos) {
                out.meta.emplace(std::string(detail::trim(body.substr(0, colon))),
                                 std::string(detail::trim(body.substr(colon + 1))));
            }
            continue;
        }
        if (!have_header) {
            for (std::string_view f : detail::split_fields(line))
                out.columns.emplace_back(detail::trim(f));
            have_header = true;
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() != out.columns.size())
            throw ConfigError(origin + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(out.columns.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::string_view raw : fields) {
            const std::string_view f = detail::trim(raw);
            double v = 0.0;
            const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size())
                throw ConfigError(origin + ": line " + std::to_string(line_no) +
                                  ": cannot parse '" + std::string(f) + "' as a number");
            row.push_back(v);
        }
        out.rows.push_back(std::move(row));
        out.row_lines.push_back(line_no);
    }
    if (!have_header)
        throw ConfigError(origin + ": no header line found");
    return out;
}

} // namespace kiparc
