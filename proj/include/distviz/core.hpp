#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace distviz {

/// Input data is malformed, incomplete or inconsistent (CLI exit code 3).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numerical procedure cannot produce a defined result (CLI exit code 4).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// US state identity, keyed by FIPS code. The two-letter code is presentation only.
class StateId {
public:
    constexpr StateId() = default;
    constexpr explicit StateId(int fips) : fips_{fips} {}

    constexpr int fips() const noexcept { return fips_; }
    /// Two-letter postal code, or "??" for a FIPS code outside the 50 states + DC.
    std::string_view code() const noexcept;

    static std::optional<StateId> from_code(std::string_view code);
    static bool is_known(int fips) noexcept;
    /// All 50 states + DC in FIPS order.
    static const std::vector<StateId>& all();

    constexpr auto operator<=>(const StateId&) const = default;

private:
    int fips_ = 0;
};

struct StateYear {
    StateId state;
    int year = 0;
    constexpr auto operator<=>(const StateYear&) const = default;
};

struct YearRange {
    int first = 1976;
    int last = 2019;

    constexpr bool contains(int year) const noexcept { return year >= first && year <= last; }
    constexpr int size() const noexcept { return last - first + 1; }
};

/// Parses "1976:2019" (or a single year).
YearRange parse_year_range(std::string_view text);

enum class Sex : std::uint8_t { male, female };
enum class EduBand : std::uint8_t { up_to_12, above_12 };

constexpr EduBand edu_band(int edu_years) noexcept {
    return edu_years <= 12 ? EduBand::up_to_12 : EduBand::above_12;
}

/// One surveyed household. `year` is the income year (survey year - 1).
struct HouseholdRecord {
    int year = 0;
    StateId state;
    double income = 0.0;
    double weight = 0.0;
    int members = 1;
    int age = 0;
    Sex sex = Sex::male;
    bool black = false;
    bool hispanic = false;
    int edu_years = 0;
};

/// Returns the first violated record invariant, or nullopt when the record is valid.
std::optional<std::string> validate(const HouseholdRecord& record, YearRange years = {});

enum class Variant : std::uint8_t { RHH, ERHH, RHHRPP, ERHHRPP };

inline constexpr Variant all_variants[] = {Variant::RHH, Variant::ERHH, Variant::RHHRPP,
                                           Variant::ERHHRPP};

/// Which of the price (C), regional parity (R) and size (S) normalizers divide income.
struct NormalizerSet {
    bool cpi = false;
    bool rpp = false;
    bool size = false;
    constexpr bool operator==(const NormalizerSet&) const = default;
};

constexpr NormalizerSet normalizers(Variant v) noexcept {
    switch (v) {
    case Variant::RHH: return {true, false, false};
    case Variant::ERHH: return {true, false, true};
    case Variant::RHHRPP: return {true, true, false};
    case Variant::ERHHRPP: return {true, true, true};
    }
    return {};
}

std::string_view to_string(Variant v) noexcept;
std::optional<Variant> parse_variant(std::string_view name);

/// Demographic subset. Unset fields match everything; an empty filter is "all".
struct SubpopulationFilter {
    std::optional<Sex> sex;
    std::optional<bool> black;
    std::optional<bool> hispanic;
    std::optional<EduBand> edu;

    /// Works for any household-like type exposing sex, black, hispanic and edu_years.
    template <class Household>
    bool matches(const Household& h) const noexcept {
        return (!sex || h.sex == *sex) && (!black || h.black == *black) &&
               (!hispanic || h.hispanic == *hispanic) && (!edu || edu_band(h.edu_years) == *edu);
    }

    /// Canonical name, e.g. "all", "female", "non-black", "edu-le12".
    /// Compound filters join parts with '+'.
    std::string name() const;
    static std::optional<SubpopulationFilter> parse(std::string_view name);

    bool operator==(const SubpopulationFilter&) const = default;
};

/// The nine filters of the explorer: all, male, female, black, non-black,
/// hispanic, non-hispanic, edu-le12, edu-gt12.
std::vector<SubpopulationFilter> standard_filters();

/// Price-side inputs. CPI is keyed by income year with base 1999.
struct PriceTables {
    std::map<int, double> cpi;
    std::map<StateYear, double> rpp;
    std::map<StateYear, double> rent;
    int rpp_observed_from = 2008;
};

} // namespace distviz
