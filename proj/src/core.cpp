#include "distviz/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace distviz {

namespace {

struct StateEntry {
    int fips;
    std::string_view code;
};

constexpr std::array<StateEntry, 51> state_table{{
    {1, "AL"},  {2, "AK"},  {4, "AZ"},  {5, "AR"},  {6, "CA"},  {8, "CO"},  {9, "CT"},
    {10, "DE"}, {11, "DC"}, {12, "FL"}, {13, "GA"}, {15, "HI"}, {16, "ID"}, {17, "IL"},
    {18, "IN"}, {19, "IA"}, {20, "KS"}, {21, "KY"}, {22, "LA"}, {23, "ME"}, {24, "MD"},
    {25, "MA"}, {26, "MI"}, {27, "MN"}, {28, "MS"}, {29, "MO"}, {30, "MT"}, {31, "NE"},
    {32, "NV"}, {33, "NH"}, {34, "NJ"}, {35, "NM"}, {36, "NY"}, {37, "NC"}, {38, "ND"},
    {39, "OH"}, {40, "OK"}, {41, "OR"}, {42, "PA"}, {44, "RI"}, {45, "SC"}, {46, "SD"},
    {47, "TN"}, {48, "TX"}, {49, "UT"}, {50, "VT"}, {51, "VA"}, {53, "WA"}, {54, "WV"},
    {55, "WI"}, {56, "WY"},
}};

const StateEntry* find_fips(int fips) noexcept {
    auto it = std::ranges::find(state_table, fips, &StateEntry::fips);
    return it == state_table.end() ? nullptr : &*it;
}

int parse_int(std::string_view text) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw DataError("not an integer: '" + std::string(text) + "'");
    return value;
}

} // namespace

std::string_view StateId::code() const noexcept {
    const auto* e = find_fips(fips_);
    return e ? e->code : std::string_view{"??"};
}

std::optional<StateId> StateId::from_code(std::string_view code) {
    auto it = std::ranges::find(state_table, code, &StateEntry::code);
    if (it == state_table.end())
        return std::nullopt;
    return StateId{it->fips};
}

bool StateId::is_known(int fips) noexcept { return find_fips(fips) != nullptr; }

const std::vector<StateId>& StateId::all() {
    static const std::vector<StateId> states = [] {
        std::vector<StateId> v;
        for (const auto& e : state_table)
            v.emplace_back(e.fips);
        return v;
    }();
    return states;
}

YearRange parse_year_range(std::string_view text) {
    auto colon = text.find(':');
    YearRange r;
    if (colon == std::string_view::npos) {
        r.first = r.last = parse_int(text);
    } else {
        r.first = parse_int(text.substr(0, colon));
        r.last = parse_int(text.substr(colon + 1));
    }
    if (r.last < r.first)
        throw DataError("empty year range '" + std::string(text) + "'");
    return r;
}

std::optional<std::string> validate(const HouseholdRecord& r, YearRange years) {
    if (!(r.weight >= 0.0))
        return "weight >= 0";
    if (r.members < 1)
        return "members >= 1";
    if (r.age < 0 || r.age > 120)
        return "0 <= age <= 120";
    if (!years.contains(r.year))
        return "year within range";
    if (!StateId::is_known(r.state.fips()))
        return "known state";
    if (!std::isfinite(r.income))
        return "finite income";
    return std::nullopt;
}

std::string_view to_string(Variant v) noexcept {
    switch (v) {
    case Variant::RHH: return "RHH";
    case Variant::ERHH: return "ERHH";
    case Variant::RHHRPP: return "RHHRPP";
    case Variant::ERHHRPP: return "ERHHRPP";
    }
    return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
    for (auto v : all_variants)
        if (to_string(v) == name)
            return v;
    return std::nullopt;
}

std::string SubpopulationFilter::name() const {
    std::vector<std::string_view> parts;
    if (sex)
        parts.push_back(*sex == Sex::male ? "male" : "female");
    if (black)
        parts.push_back(*black ? "black" : "non-black");
    if (hispanic)
        parts.push_back(*hispanic ? "hispanic" : "non-hispanic");
    if (edu)
        parts.push_back(*edu == EduBand::up_to_12 ? "edu-le12" : "edu-gt12");
    if (parts.empty())
        return "all";
    std::string out;
    for (auto p : parts) {
        if (!out.empty())
            out += '+';
        out += p;
    }
    return out;
}

std::optional<SubpopulationFilter> SubpopulationFilter::parse(std::string_view name) {
    SubpopulationFilter f;
    if (name == "all")
        return f;
    while (!name.empty()) {
        auto plus = name.find('+');
        auto part = name.substr(0, plus);
        name = plus == std::string_view::npos ? std::string_view{} : name.substr(plus + 1);
        if (part == "male" && !f.sex)
            f.sex = Sex::male;
        else if (part == "female" && !f.sex)
            f.sex = Sex::female;
        else if ((part == "black" || part == "non-black") && !f.black)
            f.black = part == "black";
        else if ((part == "hispanic" || part == "non-hispanic") && !f.hispanic)
            f.hispanic = part == "hispanic";
        else if ((part == "edu-le12" || part == "edu-gt12") && !f.edu)
            f.edu = part == "edu-le12" ? EduBand::up_to_12 : EduBand::above_12;
        else
            return std::nullopt;
    }
    return f;
}

std::vector<SubpopulationFilter> standard_filters() {
    std::vector<SubpopulationFilter> out(9);
    out[1].sex = Sex::male;
    out[2].sex = Sex::female;
    out[3].black = true;
    out[4].black = false;
    out[5].hispanic = true;
    out[6].hispanic = false;
    out[7].edu = EduBand::up_to_12;
    out[8].edu = EduBand::above_12;
    return out;
}

} // namespace distviz
