#include <doctest.h>

#include "distviz/deflate.hpp"
#include "distviz/synth.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace distviz;
using namespace distviz::deflate;

namespace {

const StateId CA{6}, DC{11}, NY{36}, TX{48}, AL{1};

synth::SynthConfig zero_noise_config() {
    auto c = synth::SynthConfig::demo(5, 3, YearRange{1976, 2019});
    c.households_per_state_year = 1;
    c.rpp_noise = 0;
    return c;
}

std::map<StateYear, double> observed_rpp(const synth::SynthData& d) {
    return d.prices.rpp;
}

} // namespace

TEST_CASE("CPI rebasing reproduces the 0.652 divisor arithmetic exactly") {
    std::map<int, double> cpi{{2000, 0.652}, {2010, 1.304}, {2019, 0.652}};
    auto r = rebase_cpi(cpi);
    CHECK(r.at(2019) == 1.0);
    CHECK(r.at(2000) == 1.0);
    CHECK(r.at(2010) == 2.0);
}

TEST_CASE("CPI rebasing is exact at the reference and scale invariant") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<int, double> cpi;
        for (int y = 1976; y <= 2019; ++y)
            cpi[y] = u(rng);
        auto base = rebase_cpi(cpi);
        CHECK(base.at(2019) == 1.0);
        std::map<int, double> scaled;
        for (auto [y, v] : cpi)
            scaled[y] = v * 4.0; // power of two keeps the ratios bit-exact
        CHECK(rebase_cpi(scaled) == base);
        double c = u(rng);
        std::map<int, double> scaled2;
        for (auto [y, v] : cpi)
            scaled2[y] = v * c;
        auto r2 = rebase_cpi(scaled2);
        for (auto [y, v] : base)
            CHECK(r2.at(y) == doctest::Approx(v).epsilon(1e-14));
    }
}

TEST_CASE("CPI rebasing without the reference year is an error") {
    CHECK_THROWS_AS(rebase_cpi({{2018, 1.0}}), DataError);
}

TEST_CASE("rent interpolation: midpoint, flat ends, pass-through") {
    std::map<StateYear, double> sparse{{{CA, 1990}, 500.0}, {{CA, 2000}, 700.0}};
    auto dense = interpolate_rent(sparse, {1976, 2019});
    CHECK(dense.size() == 44);
    CHECK(dense.at({CA, 1995}) == 600.0);
    CHECK(dense.at({CA, 1976}) == 500.0);
    CHECK(dense.at({CA, 2019}) == 700.0);

    std::map<StateYear, double> full;
    for (int y = 2000; y <= 2010; ++y)
        full[{NY, y}] = 800.0 + 7.3 * y;
    CHECK(interpolate_rent(full, {2000, 2010}) == full);
}

TEST_CASE("rent with one observation names the state") {
    std::map<StateYear, double> sparse{{{CA, 1990}, 500.0}, {{CA, 2000}, 700.0}, {{DC, 1990}, 900.0}};
    try {
        interpolate_rent(sparse, {1976, 2019});
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("DC") != std::string::npos);
    }
}

TEST_CASE("zero-noise synthetic panel: coefficients recovered to 1e-8") {
    auto c = zero_noise_config();
    auto data = synth::generate(c);
    auto rent = interpolate_rent(data.prices.rent, c.years);
    auto panel = build_panel(rent, observed_rpp(data));
    CHECK(panel.size() == 5 * 11);
    auto m = fit_backcast(panel);

    CHECK(m.reference == AL); // alphabetically first of AL, CA, DC, NY, TX
    CHECK(m.fe.at(AL) == 0.0);
    const double ref_fe = data.truth.fe.at(AL);
    CHECK(std::abs(m.alpha - (c.rpp_model.alpha + ref_fe)) < 1e-8);
    CHECK(std::abs(m.beta_rent - c.rpp_model.beta_rent) < 1e-8);
    CHECK(std::abs(m.beta_lead_rent - c.rpp_model.beta_lead_rent) < 1e-8);
    CHECK(std::abs(m.beta_lead_rpp - c.rpp_model.beta_lead_rpp) < 1e-8);
    for (auto s : {CA, DC, NY, TX})
        CHECK(std::abs(m.fe.at(s) - (data.truth.fe.at(s) - ref_fe)) < 1e-8);
    CHECK(m.diagnostics.r_squared == doctest::Approx(1.0));
    CHECK(m.diagnostics.n == 55);
    CHECK(m.diagnostics.parameters == 8);

    auto full = backcast_rpp(m, rent, observed_rpp(data), c.years);
    CHECK(full.size() == 5 * 44);
    double worst = 0;
    for (const auto& [cell, v] : full) {
        CHECK((v.source == RppSource::observed) == (cell.year >= 2008));
        worst = std::max(worst, std::abs(v.value - data.truth.rpp.at(cell)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("generator with zero lead coefficients fits them as zero") {
    auto c = zero_noise_config();
    c.rpp_model.beta_lead_rent = 0;
    c.rpp_model.beta_lead_rpp = 0;
    auto data = synth::generate(c);
    auto rent = interpolate_rent(data.prices.rent, c.years);
    auto m = fit_backcast(build_panel(rent, observed_rpp(data)));
    CHECK(std::abs(m.beta_lead_rent) < 1e-8);
    CHECK(std::abs(m.beta_lead_rpp) < 1e-8);
    CHECK(std::abs(m.beta_rent - c.rpp_model.beta_rent) < 1e-8);
}

TEST_CASE("pure carry-back model copies the lead value") {
    BackcastModel m;
    m.beta_lead_rpp = 1.0;
    m.reference = CA;
    m.fe = {{CA, 0.0}, {DC, 0.0}};
    std::map<StateYear, double> rent, observed;
    for (int y = 1976; y <= 2019; ++y) {
        rent[{CA, y}] = 1000.0 + y;
        rent[{DC, y}] = 1500.0 - y;
    }
    for (int y = 2008; y <= 2019; ++y) {
        observed[{CA, y}] = 100.0 + 0.5 * (y - 2008);
        observed[{DC, y}] = 118.0 - 0.25 * (y - 2008);
    }
    auto full = backcast_rpp(m, rent, observed, {1976, 2019});
    CHECK(full.size() == 88);
    for (int y = 1976; y < 2008; ++y)
        for (auto s : {CA, DC})
            CHECK(full.at({s, y}).value == full.at({s, y + 1}).value);
    CHECK(full.at({CA, 1976}).value == 100.0);
    CHECK(full.at({DC, 1976}).source == RppSource::backcast);
}

TEST_CASE("OLS residuals are orthogonal to every regressor column") {
    auto c = zero_noise_config();
    c.rpp_noise = 1.5;
    auto data = synth::generate(c);
    auto rent = interpolate_rent(data.prices.rent, c.years);
    auto panel = build_panel(rent, observed_rpp(data));
    auto m = fit_backcast(panel);
    CHECK(m.diagnostics.residual_sd > 0);

    std::vector<StateId> states{AL, CA, DC, NY, TX};
    Eigen::VectorXd dot = Eigen::VectorXd::Zero(4 + 5);
    for (const auto& r : panel) {
        double e = r.rpp - m.predict(r.state, r.rent, r.rent_lead, r.rpp_lead);
        dot(0) += e;
        dot(1) += e * r.rent;
        dot(2) += e * r.rent_lead;
        dot(3) += e * r.rpp_lead;
        auto idx = std::ranges::find(states, r.state) - states.begin();
        dot(4 + idx) += e;
    }
    const double n = static_cast<double>(panel.size());
    for (Eigen::Index i = 0; i < dot.size(); ++i)
        CHECK(std::abs(dot(i)) < 1e-6 * n);
}

TEST_CASE("rank deficiency is reported with the collinear columns") {
    std::vector<PanelRow> panel;
    for (int y = 2008; y < 2019; ++y) {
        panel.push_back({CA, y, 1000.0 + y, 2000.0 + 2.0 * y, 100.0 + 0.1 * y, 101.0});
        panel.push_back({DC, y, 1300.0 + y, 2600.0 + 2.0 * y, 110.0 + 0.1 * y, 111.0});
    }
    try {
        fit_backcast(panel);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("collinear") != std::string::npos);
    }
    std::vector<PanelRow> tiny{{CA, 2010, 1, 2, 3, 4}};
    CHECK_THROWS_AS(fit_backcast(tiny), NumericError);
}

TEST_CASE("square-root equivalence scale") {
    CHECK(effective_size(1) == 1.0);
    CHECK(effective_size(4) == 2.0);
    CHECK(effective_size(26) == doctest::Approx(5.0990).epsilon(1e-4));
}

namespace {

DeflatorSet manual_deflators(double cpi, double rpp) {
    DeflatorSet d;
    d.years = {2019, 2019};
    d.cpi[2019] = cpi;
    d.rpp[{CA, 2019}] = {rpp, RppSource::observed};
    return d;
}

HouseholdRecord household(double income, int members) {
    HouseholdRecord h;
    h.year = 2019;
    h.state = CA;
    h.income = income;
    h.members = members;
    h.weight = 1;
    return h;
}

} // namespace

TEST_CASE("adjusted income examples") {
    CHECK(adjust_income(household(100000, 1), manual_deflators(1, 100), Variant::ERHHRPP) == 100000);

    auto d = manual_deflators(1.18, 97.53);
    auto h = household(52343.81, 1);
    // S = 1.58 is not a square root of an integer, so the divisor is applied by hand.
    double expected = 52343.81 / (1.18 * 0.9753 * 1.58);
    double got = adjust_income(h, d, Variant::RHHRPP) / 1.58;
    CHECK(got == doctest::Approx(expected).epsilon(1e-14));
    CHECK(got == doctest::Approx(28790).epsilon(1e-3));

    CHECK(adjust_income(household(1000, 4), manual_deflators(2, 97.53), Variant::RHH) == 500);
    CHECK(adjust_income(household(1000, 4), manual_deflators(2, 97.53), Variant::ERHH) == 250);
}

TEST_CASE("adjusted income times the normalizer product is within one ulp of income") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> inc(-50000, 500000), cpi(0.5, 3.0), rpp(80, 130);
    std::uniform_int_distribution<int> members(1, 12);
    for (int i = 0; i < 2000; ++i) {
        auto d = manual_deflators(cpi(rng), rpp(rng));
        auto h = household(std::round(inc(rng)), members(rng));
        for (auto v : all_variants) {
            auto set = normalizers(v);
            double product = 1.0;
            if (set.cpi)
                product *= d.cpi_factor(2019);
            if (set.rpp)
                product *= d.rpp_factor({CA, 2019});
            if (set.size)
                product *= effective_size(h.members);
            double back = adjust_income(h, d, v) * product;
            double ulp = std::abs(std::nextafter(h.income, INFINITY) - h.income);
            REQUIRE(std::abs(back - h.income) <= ulp);
        }
    }
}

TEST_CASE("missing deflator cell is a hard error") {
    auto d = manual_deflators(1, 100);
    auto h = household(1000, 1);
    h.state = DC;
    CHECK_THROWS_AS(adjust_income(h, d, Variant::RHHRPP), DataError);
    CHECK_NOTHROW(adjust_income(h, d, Variant::RHH));
}

TEST_CASE("build_deflators backcasts to the first year, or stops at the observed start") {
    auto c = zero_noise_config();
    auto data = synth::generate(c);
    auto full = build_deflators(data.prices, c.years);
    CHECK(full.rpp.size() == 5 * 44);
    CHECK(full.rpp_first_year == 1976);
    CHECK(full.model.has_value());
    CHECK(full.cpi.at(2019) == 1.0);

    auto observed = build_deflators(data.prices, c.years, 2019, false);
    CHECK(observed.rpp.size() == 5 * 12);
    CHECK(observed.rpp_first_year == 2008);
    CHECK_FALSE(observed.model.has_value());
    for (const auto& [cell, v] : observed.rpp)
        CHECK(v.source == RppSource::observed);
}

TEST_CASE("deflator document round-trips at full precision") {
    auto c = zero_noise_config();
    auto d = build_deflators(synth::generate(c).prices, c.years);
    auto back = DeflatorSet::from_json(nlohmann::json::parse(d.to_json().dump()));
    CHECK(back.cpi == d.cpi);
    CHECK(back.rpp == d.rpp);
    CHECK(back.rent == d.rent);
    REQUIRE(back.model.has_value());
    CHECK(back.model->alpha == d.model->alpha);
    CHECK(back.model->fe == d.model->fe);
    CHECK(back.to_json() == d.to_json());

    auto bad = d.to_json();
    bad["schema_version"] = "2.0.0";
    CHECK_THROWS_AS(DeflatorSet::from_json(bad), DataError);
}
