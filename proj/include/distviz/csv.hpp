#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace distviz::csv {

using Row = std::vector<std::string>;

/// RFC-4180 style table: quoted fields may contain delimiters, quotes ("") and newlines.
struct Table {
    Row header;
    std::vector<Row> rows;
    /// 1-based physical line number where each row starts (for error messages).
    std::vector<std::size_t> lines;

    std::optional<std::size_t> column(std::string_view name) const;
};

Table parse(std::string_view text, char delimiter = ',', bool has_header = true);
Table read_file(const std::filesystem::path& path, char delimiter = ',', bool has_header = true);

/// Quotes a field only when needed.
std::string escape(std::string_view field, char delimiter = ',');
void write_row(std::ostream& out, const Row& row, char delimiter = ',');

} // namespace distviz::csv
