#include "distviz/ingest.hpp"

#include "distviz/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

namespace distviz::ingest {

namespace {

const std::map<std::string, std::string>& default_columns() {
    static const std::map<std::string, std::string> cols{
        {"survey_year", "YEAR"}, {"state", "STATEFIP"}, {"income", "HHINCOME"},
        {"weight", "ASECWTH"},   {"members", "NUMPREC"}, {"age", "AGE"},
        {"sex", "SEX"},          {"black", "BLACK"},     {"hispanic", "HISPANIC"},
        {"edu_years", "EDUC_YEARS"},
    };
    return cols;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

std::optional<int> to_int(std::string_view s) {
    s = trim(s);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size())
        return std::nullopt;
    return v;
}

std::optional<bool> to_bool(std::string_view s) {
    auto l = lower(trim(s));
    if (l == "1" || l == "true" || l == "yes" || l == "y")
        return true;
    if (l == "0" || l == "false" || l == "no" || l == "n")
        return false;
    return std::nullopt;
}

std::optional<Sex> to_sex(std::string_view s) {
    auto l = lower(trim(s));
    if (l == "1" || l == "male" || l == "m")
        return Sex::male;
    if (l == "2" || l == "female" || l == "f")
        return Sex::female;
    return std::nullopt;
}

std::optional<StateId> to_state(std::string_view s) {
    s = trim(s);
    if (auto fips = to_int(s)) {
        if (StateId::is_known(*fips))
            return StateId{*fips};
        return std::nullopt;
    }
    std::string upper(s);
    std::ranges::transform(upper, upper.begin(), [](unsigned char c) { return std::toupper(c); });
    return StateId::from_code(upper);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path{p};
    return path.is_absolute() ? path : base / path;
}

char parse_delimiter(const std::string& d) {
    if (d == "\\t" || d == "tab")
        return '\t';
    if (d.size() != 1)
        throw DataError("delimiter must be a single character, got '" + d + "'");
    return d.front();
}

// Column index per field; SIZE_MAX for constants.
struct Binding {
    std::string field;
    std::size_t index = SIZE_MAX;
    std::string constant;
};

std::vector<Binding> bind(const csv::Table& table, const ExtractSpec& spec) {
    std::vector<Binding> out;
    std::vector<std::string> missing;
    for (const char* field : microdata_fields) {
        const auto& src = spec.fields.at(field);
        Binding b{field, SIZE_MAX, {}};
        if (src.is_constant) {
            b.constant = src.constant;
        } else if (spec.header) {
            auto idx = table.column(src.column);
            if (!idx)
                missing.push_back(src.column + " (" + field + ")");
            else
                b.index = *idx;
        } else {
            auto idx = to_int(src.column);
            if (!idx || *idx < 0)
                throw DataError("headerless extract needs a column index for " + std::string(field));
            b.index = static_cast<std::size_t>(*idx);
        }
        out.push_back(std::move(b));
    }
    if (!missing.empty()) {
        std::string msg = "missing column(s):";
        for (const auto& m : missing)
            msg += " " + m;
        throw DataError(msg);
    }
    return out;
}

MicrodataLoad parse_table(const csv::Table& table, const ExtractSpec& spec) {
    auto bindings = bind(table, spec);
    MicrodataLoad load;
    load.records.reserve(table.rows.size());

    for (const auto& row : table.rows) {
        ++load.report.rows;
        auto value = [&](std::size_t i) -> std::optional<std::string_view> {
            const auto& b = bindings[i];
            if (b.index == SIZE_MAX)
                return std::string_view{b.constant};
            if (b.index >= row.size())
                return std::nullopt;
            return std::string_view{row[b.index]};
        };

        std::string reason;
        HouseholdRecord r;
        auto fail = [&](std::size_t i) { reason = "unparseable " + bindings[i].field; };

        auto get_int = [&](std::size_t i, int& out) {
            auto v = value(i);
            auto parsed = v ? to_int(*v) : std::nullopt;
            if (!parsed)
                return fail(i), false;
            out = *parsed;
            return true;
        };

        bool ok = true;
        int survey_year = 0;
        ok = ok && get_int(0, survey_year);
        if (ok) {
            auto s = value(1) ? to_state(*value(1)) : std::nullopt;
            if (!s) {
                fail(1);
                ok = false;
            } else {
                r.state = *s;
            }
        }
        if (ok) {
            auto inc = value(2) ? to_double(*value(2)) : std::nullopt;
            auto w = value(3) ? to_double(*value(3)) : std::nullopt;
            if (!inc)
                fail(2), ok = false;
            else if (!w)
                fail(3), ok = false;
            else
                r.income = *inc, r.weight = *w;
        }
        ok = ok && get_int(4, r.members) && get_int(5, r.age);
        if (ok) {
            auto sx = value(6) ? to_sex(*value(6)) : std::nullopt;
            auto bl = value(7) ? to_bool(*value(7)) : std::nullopt;
            auto hi = value(8) ? to_bool(*value(8)) : std::nullopt;
            if (!sx)
                fail(6), ok = false;
            else if (!bl)
                fail(7), ok = false;
            else if (!hi)
                fail(8), ok = false;
            else
                r.sex = *sx, r.black = *bl, r.hispanic = *hi;
        }
        ok = ok && get_int(9, r.edu_years);

        if (ok) {
            r.year = survey_year - 1;
            if (auto why = validate(r, spec.years)) {
                reason = *why;
                ok = false;
            }
        }
        if (ok) {
            load.records.push_back(r);
            ++load.report.accepted;
        } else {
            ++load.report.rejected[reason];
        }
    }
    return load;
}

std::size_t require_column(const csv::Table& t, std::initializer_list<std::string_view> names,
                           const std::filesystem::path& path) {
    for (auto n : names)
        if (auto idx = t.column(n))
            return *idx;
    throw DataError(path.string() + ": missing column '" + std::string(*names.begin()) + "'");
}

std::map<StateYear, double> load_state_panel(const std::filesystem::path& path, char delim,
                                             std::string_view value_col) {
    auto t = csv::read_file(path, delim, true);
    auto si = require_column(t, {"state", "statefip", "STATEFIP"}, path);
    auto yi = require_column(t, {"year", "YEAR"}, path);
    auto vi = require_column(t, {value_col}, path);
    std::map<StateYear, double> panel;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        auto where = path.string() + ":" + std::to_string(t.lines[i]);
        if (row.size() <= std::max({si, yi, vi}))
            throw DataError(where + ": short row");
        auto s = to_state(row[si]);
        auto y = to_int(row[yi]);
        auto v = to_double(row[vi]);
        if (!s || !y || !v)
            throw DataError(where + ": unparseable row");
        if (!(*v > 0))
            throw DataError(where + ": " + std::string(value_col) + " must be > 0");
        if (!panel.emplace(StateYear{*s, *y}, *v).second)
            throw DataError(where + ": duplicate cell");
    }
    return panel;
}

} // namespace

ExtractSpec ExtractSpec::defaults(const std::filesystem::path& dir) {
    ExtractSpec s;
    s.microdata = {dir / "households.csv"};
    s.cpi = dir / "cpi.csv";
    s.rpp = dir / "rpp.csv";
    s.rent = dir / "rent.csv";
    for (const auto& [field, col] : default_columns())
        s.fields[field] = FieldSource{col, {}, false};
    return s;
}

ExtractSpec ExtractSpec::from_json(const nlohmann::json& j, const std::filesystem::path& base) {
    auto s = defaults(base);
    try {
        if (j.contains("microdata")) {
            s.microdata.clear();
            if (j["microdata"].is_array())
                for (const auto& p : j["microdata"])
                    s.microdata.push_back(resolve(base, p.get<std::string>()));
            else
                s.microdata.push_back(resolve(base, j["microdata"].get<std::string>()));
        }
        for (auto [key, member] : {std::pair{"cpi", &ExtractSpec::cpi}, std::pair{"rpp", &ExtractSpec::rpp},
                                   std::pair{"rent", &ExtractSpec::rent}})
            if (j.contains(key))
                s.*member = resolve(base, j[key].get<std::string>());
        if (j.contains("delimiter"))
            s.delimiter = parse_delimiter(j["delimiter"].get<std::string>());
        if (j.contains("header"))
            s.header = j["header"].get<bool>();
        if (j.contains("years"))
            s.years = parse_year_range(j["years"].get<std::string>());

        std::set<std::string> explicit_cols;
        if (j.contains("columns"))
            for (const auto& [field, col] : j["columns"].items()) {
                if (!default_columns().contains(field))
                    throw DataError("unknown model field '" + field + "' in columns");
                s.fields[field] = FieldSource{col.is_string() ? col.get<std::string>() : col.dump(), {}, false};
                explicit_cols.insert(field);
            }
        if (j.contains("constants"))
            for (const auto& [field, val] : j["constants"].items()) {
                if (!default_columns().contains(field))
                    throw DataError("unknown model field '" + field + "' in constants");
                if (explicit_cols.contains(field))
                    throw DataError("field '" + field + "' has both a column and a constant");
                s.fields[field] = FieldSource{{}, val.is_string() ? val.get<std::string>() : val.dump(), true};
            }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("extract spec: ") + e.what());
    }
    s.check();
    return s;
}

ExtractSpec ExtractSpec::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

nlohmann::json ExtractSpec::to_json() const {
    nlohmann::json j;
    j["microdata"] = nlohmann::json::array();
    for (const auto& p : microdata)
        j["microdata"].push_back(p.string());
    j["cpi"] = cpi.string();
    j["rpp"] = rpp.string();
    j["rent"] = rent.string();
    j["delimiter"] = std::string(1, delimiter);
    j["header"] = header;
    j["years"] = std::to_string(years.first) + ":" + std::to_string(years.last);
    for (const auto& [field, src] : fields) {
        if (src.is_constant)
            j["constants"][field] = src.constant;
        else
            j["columns"][field] = src.column;
    }
    return j;
}

void ExtractSpec::check() const {
    for (const char* field : microdata_fields) {
        auto it = fields.find(field);
        if (it == fields.end())
            throw DataError(std::string("no source for model field '") + field + "'");
        if (!it->second.is_constant && it->second.column.empty())
            throw DataError(std::string("empty column name for model field '") + field + "'");
    }
    if (fields.size() != std::size(microdata_fields))
        throw DataError("extract spec maps unknown fields");
}

std::size_t RejectionReport::total_rejected() const {
    std::size_t n = 0;
    for (const auto& [_, c] : rejected)
        n += c;
    return n;
}

nlohmann::json RejectionReport::to_json() const {
    nlohmann::json j;
    j["rows"] = rows;
    j["accepted"] = accepted;
    j["rejected"] = nlohmann::json::object();
    for (const auto& [reason, c] : rejected)
        j["rejected"][reason] = c;
    return j;
}

MicrodataLoad parse_microdata(std::string_view text, const ExtractSpec& spec) {
    spec.check();
    return parse_table(csv::parse(text, spec.delimiter, spec.header), spec);
}

MicrodataLoad load_microdata(const ExtractSpec& spec) {
    spec.check();
    const auto n = static_cast<std::ptrdiff_t>(spec.microdata.size());
    std::vector<MicrodataLoad> parts(spec.microdata.size());
    std::vector<std::string> errors(spec.microdata.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            auto table = csv::read_file(spec.microdata[i], spec.delimiter, spec.header);
            parts[i] = parse_table(table, spec);
        } catch (const std::exception& e) {
            errors[i] = spec.microdata[i].string() + ": " + e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty())
            throw DataError(e);

    MicrodataLoad out;
    for (auto& p : parts) {
        out.records.insert(out.records.end(), p.records.begin(), p.records.end());
        out.report.rows += p.report.rows;
        out.report.accepted += p.report.accepted;
        for (const auto& [reason, c] : p.report.rejected)
            out.report.rejected[reason] += c;
    }
    return out;
}

int contiguous_rpp_start(const std::map<StateYear, double>& rpp, int last_year) {
    std::set<StateId> states;
    for (const auto& [key, _] : rpp)
        states.insert(key.state);
    auto all_have = [&](int y) {
        return std::ranges::all_of(states, [&](StateId s) { return rpp.contains({s, y}); });
    };
    int y = last_year;
    if (states.empty() || !all_have(y))
        return last_year + 1;
    while (all_have(y - 1))
        --y;
    return y;
}

PriceTables load_price_tables(const ExtractSpec& spec) {
    PriceTables out;

    auto t = csv::read_file(spec.cpi, spec.delimiter, true);
    auto yi = require_column(t, {"year", "YEAR"}, spec.cpi);
    auto vi = require_column(t, {"cpi", "CPI"}, spec.cpi);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        auto y = row.size() > yi ? to_int(row[yi]) : std::nullopt;
        auto v = row.size() > vi ? to_double(row[vi]) : std::nullopt;
        auto where = spec.cpi.string() + ":" + std::to_string(t.lines[i]);
        if (!y || !v)
            throw DataError(where + ": unparseable row");
        if (!(*v > 0))
            throw DataError(where + ": cpi must be > 0");
        out.cpi[*y] = *v;
    }
    for (int y = spec.years.first; y <= spec.years.last; ++y)
        if (!out.cpi.contains(y))
            throw DataError("CPI missing for year " + std::to_string(y) + " (" + spec.cpi.string() + ")");

    out.rpp = load_state_panel(spec.rpp, spec.delimiter, "rpp");
    out.rent = load_state_panel(spec.rent, spec.delimiter, "rent");

    out.rpp_observed_from = contiguous_rpp_start(out.rpp, spec.years.last);
    if (out.rpp_observed_from > spec.years.last - 1)
        throw DataError("RPP must be observed for every state in the last two years of the range");
    return out;
}

} // namespace distviz::ingest
