#pragma once

#include "distviz/core.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace distviz::ingest {

/// Model fields a microdata extract must provide.
inline constexpr const char* microdata_fields[] = {
    "survey_year", "state", "income", "weight", "members",
    "age",         "sex",   "black",  "hispanic", "edu_years",
};

/// Where a model field comes from: a column (name, or 0-based index when the
/// file has no header) or a constant applied to every row.
struct FieldSource {
    std::string column;
    std::string constant;
    bool is_constant = false;
};

/// Column mapping and file locations of a user-supplied extract.
struct ExtractSpec {
    std::vector<std::filesystem::path> microdata;
    std::filesystem::path cpi;
    std::filesystem::path rpp;
    std::filesystem::path rent;
    char delimiter = ',';
    bool header = true;
    YearRange years;
    std::map<std::string, FieldSource> fields;

    /// Layout written by the synthetic generator, rooted at `dir`.
    static ExtractSpec defaults(const std::filesystem::path& dir);
    /// Relative paths resolve against `base_dir`. Unmapped fields keep the default column.
    static ExtractSpec from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
    static ExtractSpec from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// Throws DataError unless every model field has exactly one source.
    void check() const;
};

struct RejectionReport {
    std::size_t rows = 0;
    std::size_t accepted = 0;
    std::map<std::string, std::size_t> rejected;

    std::size_t total_rejected() const;
    nlohmann::json to_json() const;
};

struct MicrodataLoad {
    std::vector<HouseholdRecord> records;
    RejectionReport report;
};

/// Parses all microdata files (in parallel across files, order preserved).
/// Missing columns are hard errors; bad rows are rejected and counted.
MicrodataLoad load_microdata(const ExtractSpec& spec);

/// Parses one already-loaded table. Exposed for tests.
MicrodataLoad parse_microdata(std::string_view text, const ExtractSpec& spec);

/// CPI must cover `spec.years`; RPP must cover the last two years of the range
/// for every state that appears in it.
PriceTables load_price_tables(const ExtractSpec& spec);

/// Earliest year Y such that every RPP state is observed in each of Y..last.
int contiguous_rpp_start(const std::map<StateYear, double>& rpp, int last_year);

} // namespace distviz::ingest
