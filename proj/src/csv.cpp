#include "distviz/csv.hpp"

#include "distviz/core.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

namespace distviz::csv {

std::optional<std::size_t> Table::column(std::string_view name) const {
    auto it = std::ranges::find(header, name);
    if (it == header.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

Table parse(std::string_view text, char delimiter, bool has_header) {
    Table table;
    Row row;
    std::string field;
    bool in_quotes = false;
    bool row_has_content = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto end_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        if (row_has_content || row.size() > 1 || !row.front().empty()) {
            table.rows.push_back(std::move(row));
            table.lines.push_back(row_line);
        }
        row.clear();
        row_has_content = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
            row_has_content = true;
        } else if (c == delimiter) {
            row.push_back(std::move(field));
            field.clear();
            row_has_content = true;
        } else if (c == '\r') {
            // swallowed; the following '\n' ends the row
        } else if (c == '\n') {
            end_row();
            ++line;
            row_line = line;
        } else {
            field += c;
        }
    }
    if (in_quotes)
        throw DataError("unterminated quoted field starting on line " + std::to_string(row_line));
    if (!field.empty() || !row.empty() || row_has_content)
        end_row();

    if (has_header) {
        if (table.rows.empty())
            throw DataError("missing header row");
        table.header = std::move(table.rows.front());
        table.rows.erase(table.rows.begin());
        table.lines.erase(table.lines.begin());
    }
    return table;
}

Table read_file(const std::filesystem::path& path, char delimiter, bool has_header) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), delimiter, has_header);
}

std::string escape(std::string_view field, char delimiter) {
    bool needs = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
    if (!needs)
        return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i)
            out << delimiter;
        out << escape(row[i], delimiter);
    }
    out << '\n';
}

} // namespace distviz::csv
