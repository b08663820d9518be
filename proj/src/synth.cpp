#include "distviz/synth.hpp"

#include "distviz/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace distviz::synth {

namespace {

constexpr std::uint64_t tag_rent = 0x72656e74;

double lerp_year(double first, double last, int year, YearRange r) {
    if (r.size() == 1)
        return last;
    double t = static_cast<double>(year - r.first) / (r.last - r.first);
    return first + t * (last - first);
}

StateParams demo_state(StateId s, int index) {
    StateParams p;
    p.state = s;
    switch (s.fips()) {
    case 6: // CA: large, ageing
        p = {s, 3.0, std::log(50000.0), std::log(72000.0), 0.75, 0.88,
             {28.0, 52.0, 9.0, 0.30, 0.70}, 0.07, 1600.0, 0.035, 3.0, 114.0};
        break;
    case 11: // DC: small, young, unequal
        p = {s, 0.5, std::log(52000.0), std::log(92000.0), 0.85, 1.05,
             {27.0, 50.0, 8.0, 0.25, 0.25}, 0.50, 1500.0, 0.04, 4.0, 118.0};
        break;
    case 36:
        p = {s, 2.0, std::log(53000.0), std::log(70000.0), 0.78, 0.9,
             {29.0, 53.0, 9.0, 0.35, 0.60}, 0.16, 1300.0, 0.03, 3.0, 116.0};
        break;
    case 48:
        p = {s, 2.2, std::log(47000.0), std::log(64000.0), 0.74, 0.84,
             {28.0, 50.0, 9.0, 0.30, 0.50}, 0.12, 1000.0, 0.03, -1.0, 97.0};
        break;
    case 1:
        p = {s, 1.0, std::log(42000.0), std::log(52000.0), 0.72, 0.82,
             {30.0, 54.0, 9.0, 0.40, 0.60}, 0.26, 800.0, 0.028, -3.0, 87.0};
        break;
    default:
        p.size_factor = 0.6 + 0.2 * (index % 5);
        p.log_loc_first = std::log(44000.0 + 1000.0 * (index % 7));
        p.log_loc_last = std::log(56000.0 + 1500.0 * (index % 9));
        p.rent_last = 800.0 + 60.0 * (index % 9);
        p.rpp_fe = -2.0 + 0.5 * (index % 9);
        p.rpp_last = 90.0 + 3.0 * (index % 9);
        p.black_share = 0.05 + 0.03 * (index % 6);
        p.age.old_share_last = 0.45 + 0.05 * (index % 4);
        break;
    }
    return p;
}

// Per-state knot values of gross rent.
std::map<int, double> rent_knots(const SynthConfig& c, const StateParams& s) {
    std::set<int> years;
    for (int y : c.rent_knot_years)
        if (c.years.contains(y))
            years.insert(y);
    for (int y = std::max(c.rent_annual_from, c.years.first); y <= c.years.last; ++y)
        years.insert(y);

    auto rng = make_rng(c.seed, {static_cast<std::uint64_t>(s.state.fips()), tag_rent});
    std::normal_distribution<double> noise(0.0, 1.0);
    std::map<int, double> knots;
    for (int y : years) {
        double trend = s.rent_last * std::pow(1.0 + s.rent_growth, y - c.years.last);
        knots[y] = std::max(50.0, trend + c.rent_noise * noise(rng));
    }
    return knots;
}

// Dense truth: linear between knots, flat beyond the ends.
double rent_at(const std::map<int, double>& knots, int year) {
    auto hi = knots.lower_bound(year);
    if (hi == knots.end())
        return std::prev(hi)->second;
    if (hi->first == year || hi == knots.begin())
        return hi->second;
    auto lo = std::prev(hi);
    double t = static_cast<double>(year - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + p.string());
    out << content;
}

} // namespace

SynthConfig SynthConfig::demo(int n_states, std::uint64_t seed, YearRange years) {
    SynthConfig c;
    c.seed = seed;
    c.years = years;
    std::vector<StateId> order;
    for (int fips : {6, 11, 36, 48, 1})
        order.emplace_back(fips);
    for (auto s : StateId::all())
        if (std::ranges::find(order, s) == order.end())
            order.push_back(s);
    n_states = std::clamp(n_states, 1, static_cast<int>(order.size()));
    for (int i = 0; i < n_states; ++i)
        c.states.push_back(demo_state(order[i], i));
    return c;
}

void SynthConfig::check() const {
    if (households_per_state_year < 1)
        throw DataError("households per state-year must be >= 1");
    if (states.empty())
        throw DataError("synthetic config needs at least one state");
    std::set<StateId> seen;
    for (const auto& s : states) {
        if (!StateId::is_known(s.state.fips()))
            throw DataError("unknown state FIPS " + std::to_string(s.state.fips()));
        if (!seen.insert(s.state).second)
            throw DataError("duplicate state " + std::string(s.state.code()));
        if (!(s.size_factor > 0) || s.log_scale_first < 0 || s.log_scale_last < 0 || !(s.rent_last > 0) ||
            !(s.rpp_last > 0) || !(s.age.sd >= 0))
            throw DataError("invalid parameters for state " + std::string(s.state.code()));
    }
    if (negative_share < 0 || negative_share > 1 || rpp_noise < 0 || rent_noise < 0)
        throw DataError("shares and noise levels must be nonnegative (shares <= 1)");
    if (years.size() < 2)
        throw DataError("synthetic year range needs at least two years");
}

SynthData generate(const SynthConfig& c) {
    c.check();
    SynthData out;
    auto& prices = out.prices;

    for (int y = c.years.first; y <= c.years.last; ++y)
        prices.cpi[y] = std::pow(1.0 + c.cpi_growth, y - 1999);

    const int observed_from = std::clamp(c.rpp_observed_from, c.years.first, c.years.last - 1);
    prices.rpp_observed_from = observed_from;
    out.truth.model = c.rpp_model;
    const auto& m = c.rpp_model;

    for (const auto& s : c.states) {
        auto knots = rent_knots(c, s);
        for (const auto& [y, v] : knots)
            prices.rent[{s.state, y}] = v;
        for (int y = c.years.first; y <= c.years.last; ++y)
            out.truth.rent_dense[{s.state, y}] = rent_at(knots, y);

        out.truth.fe[s.state] = s.rpp_fe;
        auto rng = make_rng(c.seed, {static_cast<std::uint64_t>(s.state.fips()), 0x727070});
        std::normal_distribution<double> noise(0.0, 1.0);
        out.truth.rpp[{s.state, c.years.last}] = s.rpp_last;
        for (int y = c.years.last - 1; y >= c.years.first; --y) {
            double r = out.truth.rent_dense[{s.state, y}];
            double r_lead = out.truth.rent_dense[{s.state, y + 1}];
            double rpp_lead = out.truth.rpp[{s.state, y + 1}];
            double eps = c.rpp_noise > 0 ? c.rpp_noise * noise(rng) : 0.0;
            out.truth.rpp[{s.state, y}] = m.alpha + m.beta_rent * r + m.beta_lead_rent * r_lead +
                                          m.beta_lead_rpp * rpp_lead + s.rpp_fe + eps;
        }
        for (int y = observed_from; y <= c.years.last; ++y)
            prices.rpp[{s.state, y}] = out.truth.rpp[{s.state, y}];
    }

    const double cpi_last = prices.cpi.at(c.years.last);
    for (int y = c.years.first; y <= c.years.last; ++y) {
        const double female = lerp_year(c.female_share_first, c.female_share_last, y, c.years);
        const double hispanic = lerp_year(c.hispanic_share_first, c.hispanic_share_last, y, c.years);
        const double college = lerp_year(c.college_share_first, c.college_share_last, y, c.years);
        const double price = c.nominal_incomes ? prices.cpi.at(y) / cpi_last : 1.0;

        for (const auto& s : c.states) {
            auto rng = make_rng(c.seed, {static_cast<std::uint64_t>(s.state.fips()), static_cast<std::uint64_t>(y)});
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::normal_distribution<double> gauss(0.0, 1.0);
            std::poisson_distribution<int> extra_members(1.4);
            std::uniform_real_distribution<double> weight_dist(500.0, 2500.0);

            const double loc = lerp_year(s.log_loc_first, s.log_loc_last, y, c.years);
            const double scale = lerp_year(s.log_scale_first, s.log_scale_last, y, c.years);
            const double old_share = lerp_year(s.age.old_share_first, s.age.old_share_last, y, c.years);
            const int n = std::max(1, static_cast<int>(std::lround(c.households_per_state_year * s.size_factor)));

            for (int i = 0; i < n; ++i) {
                HouseholdRecord h;
                h.year = y;
                h.state = s.state;
                double u_age = unit(rng);
                double g_age = gauss(rng);
                if (u_age < s.age.elderly_share) {
                    h.age = 62 + static_cast<int>(34.0 * u_age / s.age.elderly_share);
                } else {
                    double mean_age = unit(rng) < old_share ? s.age.old_mean : s.age.young_mean;
                    h.age = static_cast<int>(std::clamp(std::lround(mean_age + s.age.sd * g_age), 15L, 95L));
                }
                h.members = std::min(12, 1 + extra_members(rng));
                h.sex = unit(rng) < female ? Sex::female : Sex::male;
                h.black = unit(rng) < s.black_share;
                h.hispanic = unit(rng) < hispanic;
                bool college_grad = unit(rng) < college;
                int edu_draw = static_cast<int>(unit(rng) * 5.0);
                h.edu_years = college_grad ? 13 + edu_draw : 8 + edu_draw;
                h.weight = std::round(weight_dist(rng) * 100.0) / 100.0;

                double z = gauss(rng);
                double u_neg = unit(rng);
                double log_income = loc + scale * z;
                if (c.demographic_effects) {
                    log_income += (h.sex == Sex::female ? -0.2 : 0.0) + (h.black ? -0.25 : 0.0) +
                                  (h.hispanic ? -0.15 : 0.0) + (college_grad ? 0.35 : 0.0) +
                                  0.15 * std::log(static_cast<double>(h.members)) -
                                  0.0004 * (h.age - 48.0) * (h.age - 48.0);
                }
                double real = u_neg < c.negative_share ? -20000.0 * unit(rng) : std::exp(log_income);
                h.income = std::round(real * price);
                out.households.push_back(h);
            }
        }
    }
    return out;
}

std::string households_csv(const std::vector<HouseholdRecord>& hs) {
    std::string out = "YEAR,STATEFIP,HHINCOME,ASECWTH,NUMPREC,AGE,SEX,BLACK,HISPANIC,EDUC_YEARS\n";
    out.reserve(hs.size() * 48);
    for (const auto& h : hs)
        fmt::format_to(std::back_inserter(out), "{},{},{:.0f},{:.2f},{},{},{},{},{},{}\n", h.year + 1,
                       h.state.fips(), h.income, h.weight, h.members, h.age, h.sex == Sex::male ? 1 : 2,
                       h.black ? 1 : 0, h.hispanic ? 1 : 0, h.edu_years);
    return out;
}

void write(const SynthData& data, const SynthConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_file(dir / "households.csv", households_csv(data.households));

    std::string cpi = "year,cpi\n";
    for (const auto& [y, v] : data.prices.cpi)
        fmt::format_to(std::back_inserter(cpi), "{},{:.17g}\n", y, v);
    write_file(dir / "cpi.csv", cpi);

    auto panel = [](const std::map<StateYear, double>& p, std::string_view name) {
        std::string s = fmt::format("state,year,{}\n", name);
        for (const auto& [k, v] : p)
            fmt::format_to(std::back_inserter(s), "{},{},{:.17g}\n", k.state.fips(), k.year, v);
        return s;
    };
    write_file(dir / "rpp.csv", panel(data.prices.rpp, "rpp"));
    write_file(dir / "rent.csv", panel(data.prices.rent, "rent"));
    write_file(dir / "truth.json", data.truth.to_json().dump(2) + "\n");
    write_file(dir / "synth_config.json", config.to_json().dump(2) + "\n");
}

nlohmann::json SynthConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["years"] = fmt::format("{}:{}", years.first, years.last);
    j["households_per_state_year"] = households_per_state_year;
    j["negative_share"] = negative_share;
    j["demographic_effects"] = demographic_effects;
    j["female_share"] = {female_share_first, female_share_last};
    j["hispanic_share"] = {hispanic_share_first, hispanic_share_last};
    j["college_share"] = {college_share_first, college_share_last};
    j["cpi_growth"] = cpi_growth;
    j["nominal_incomes"] = nominal_incomes;
    j["rpp_model"] = {{"alpha", rpp_model.alpha},
                      {"beta_rent", rpp_model.beta_rent},
                      {"beta_lead_rent", rpp_model.beta_lead_rent},
                      {"beta_lead_rpp", rpp_model.beta_lead_rpp}};
    j["rpp_noise"] = rpp_noise;
    j["rpp_observed_from"] = rpp_observed_from;
    j["rent_noise"] = rent_noise;
    j["rent_knot_years"] = rent_knot_years;
    j["rent_annual_from"] = rent_annual_from;
    j["states"] = nlohmann::json::array();
    for (const auto& s : states) {
        j["states"].push_back({
            {"state", std::string(s.state.code())},
            {"size_factor", s.size_factor},
            {"log_loc", {s.log_loc_first, s.log_loc_last}},
            {"log_scale", {s.log_scale_first, s.log_scale_last}},
            {"age", {{"young_mean", s.age.young_mean}, {"old_mean", s.age.old_mean}, {"sd", s.age.sd},
                     {"old_share", {s.age.old_share_first, s.age.old_share_last}},
                     {"elderly_share", s.age.elderly_share}}},
            {"black_share", s.black_share},
            {"rent_last", s.rent_last},
            {"rent_growth", s.rent_growth},
            {"rpp_fe", s.rpp_fe},
            {"rpp_last", s.rpp_last},
        });
    }
    return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig c;
    try {
        auto pair = [&](const char* key, double& a, double& b) {
            if (j.contains(key))
                a = j[key].at(0).get<double>(), b = j[key].at(1).get<double>();
        };
        c.seed = j.value("seed", c.seed);
        if (j.contains("years"))
            c.years = parse_year_range(j["years"].get<std::string>());
        c.households_per_state_year = j.value("households_per_state_year", c.households_per_state_year);
        c.negative_share = j.value("negative_share", c.negative_share);
        c.demographic_effects = j.value("demographic_effects", c.demographic_effects);
        pair("female_share", c.female_share_first, c.female_share_last);
        pair("hispanic_share", c.hispanic_share_first, c.hispanic_share_last);
        pair("college_share", c.college_share_first, c.college_share_last);
        c.cpi_growth = j.value("cpi_growth", c.cpi_growth);
        c.nominal_incomes = j.value("nominal_incomes", c.nominal_incomes);
        if (j.contains("rpp_model")) {
            const auto& m = j["rpp_model"];
            c.rpp_model = {m.at("alpha").get<double>(), m.at("beta_rent").get<double>(),
                           m.at("beta_lead_rent").get<double>(), m.at("beta_lead_rpp").get<double>()};
        }
        c.rpp_noise = j.value("rpp_noise", c.rpp_noise);
        c.rpp_observed_from = j.value("rpp_observed_from", c.rpp_observed_from);
        c.rent_noise = j.value("rent_noise", c.rent_noise);
        if (j.contains("rent_knot_years"))
            c.rent_knot_years = j["rent_knot_years"].get<std::vector<int>>();
        c.rent_annual_from = j.value("rent_annual_from", c.rent_annual_from);
        for (const auto& js : j.at("states")) {
            auto code = js.at("state").get<std::string>();
            auto id = StateId::from_code(code);
            if (!id)
                throw DataError("unknown state code '" + code + "'");
            StateParams s;
            s.state = *id;
            s.size_factor = js.value("size_factor", s.size_factor);
            if (js.contains("log_loc"))
                s.log_loc_first = js["log_loc"].at(0), s.log_loc_last = js["log_loc"].at(1);
            if (js.contains("log_scale"))
                s.log_scale_first = js["log_scale"].at(0), s.log_scale_last = js["log_scale"].at(1);
            if (js.contains("age")) {
                const auto& a = js["age"];
                s.age.young_mean = a.value("young_mean", s.age.young_mean);
                s.age.old_mean = a.value("old_mean", s.age.old_mean);
                s.age.sd = a.value("sd", s.age.sd);
                s.age.elderly_share = a.value("elderly_share", s.age.elderly_share);
                if (a.contains("old_share"))
                    s.age.old_share_first = a["old_share"].at(0), s.age.old_share_last = a["old_share"].at(1);
            }
            s.black_share = js.value("black_share", s.black_share);
            s.rent_last = js.value("rent_last", s.rent_last);
            s.rent_growth = js.value("rent_growth", s.rent_growth);
            s.rpp_fe = js.value("rpp_fe", s.rpp_fe);
            s.rpp_last = js.value("rpp_last", s.rpp_last);
            c.states.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("synthetic config: ") + e.what());
    }
    c.check();
    return c;
}

nlohmann::json SynthTruth::to_json() const {
    nlohmann::json j;
    j["model"] = {{"alpha", model.alpha},
                  {"beta_rent", model.beta_rent},
                  {"beta_lead_rent", model.beta_lead_rent},
                  {"beta_lead_rpp", model.beta_lead_rpp}};
    for (const auto& [s, v] : fe)
        j["fe"][std::string(s.code())] = v;
    auto panel = [](const std::map<StateYear, double>& p) {
        auto arr = nlohmann::json::array();
        for (const auto& [k, v] : p)
            arr.push_back({std::string(k.state.code()), k.year, v});
        return arr;
    };
    j["rpp"] = panel(rpp);
    j["rent_dense"] = panel(rent_dense);
    return j;
}

SynthTruth SynthTruth::from_json(const nlohmann::json& j) {
    SynthTruth t;
    try {
        const auto& m = j.at("model");
        t.model = {m.at("alpha").get<double>(), m.at("beta_rent").get<double>(),
                   m.at("beta_lead_rent").get<double>(), m.at("beta_lead_rpp").get<double>()};
        for (const auto& [code, v] : j.at("fe").items())
            t.fe[*StateId::from_code(code)] = v.get<double>();
        auto panel = [](const nlohmann::json& arr, std::map<StateYear, double>& out) {
            for (const auto& row : arr)
                out[{*StateId::from_code(row.at(0).get<std::string>()), row.at(1).get<int>()}] =
                    row.at(2).get<double>();
        };
        panel(j.at("rpp"), t.rpp);
        panel(j.at("rent_dense"), t.rent_dense);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("truth file: ") + e.what());
    }
    return t;
}

} // namespace distviz::synth
