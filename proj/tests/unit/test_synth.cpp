#include <doctest.h>

#include "distviz/ingest.hpp"
#include "distviz/synth.hpp"
#include "test_support.hpp"

#include <set>

using namespace distviz;
using distviz::testing::TempDir;

namespace {

synth::SynthConfig small(std::uint64_t seed = 1) {
    auto c = synth::SynthConfig::demo(3, seed, YearRange{1976, 2019});
    c.households_per_state_year = 60;
    return c;
}

} // namespace

TEST_CASE("same seed gives byte-identical files") {
    TempDir a("distviz-synth"), b("distviz-synth");
    auto c = small();
    synth::write(synth::generate(c), c, a.path());
    synth::write(synth::generate(c), c, b.path());
    std::string diff;
    CHECK_MESSAGE(testing::same_tree(a.path(), b.path(), &diff), diff);
}

TEST_CASE("different seeds give different data") {
    auto x = synth::generate(small(1));
    auto y = synth::generate(small(2));
    CHECK(synth::households_csv(x.households) != synth::households_csv(y.households));
}

TEST_CASE("zero log-scale makes incomes equal within a state-year") {
    auto c = small();
    c.negative_share = 0;
    c.demographic_effects = false;
    for (auto& s : c.states)
        s.log_scale_first = s.log_scale_last = 0;
    auto data = synth::generate(c);
    std::map<StateYear, std::set<double>> incomes;
    for (const auto& h : data.households)
        incomes[{h.state, h.year}].insert(h.income);
    CHECK(incomes.size() == 3 * 44);
    for (const auto& [cell, set] : incomes)
        CHECK(set.size() == 1);
}

TEST_CASE("generated records satisfy the record invariants") {
    auto data = synth::generate(small());
    for (const auto& h : data.households)
        REQUIRE_FALSE(validate(h).has_value());
    std::size_t expected = 0;
    for (const auto& s : small().states)
        expected += 44 * static_cast<std::size_t>(std::lround(60 * s.size_factor));
    CHECK(data.households.size() == expected);
}

TEST_CASE("observed RPP starts at the configured year and matches the truth") {
    auto data = synth::generate(small());
    CHECK(data.prices.rpp_observed_from == 2008);
    CHECK(data.prices.rpp.size() == 3 * 12);
    for (const auto& [cell, v] : data.prices.rpp)
        CHECK(v == data.truth.rpp.at(cell));
    CHECK(data.truth.rpp.size() == 3 * 44);
}

TEST_CASE("written files read back through the default extract layout") {
    TempDir dir("distviz-synth");
    auto c = small();
    auto data = synth::generate(c);
    synth::write(data, c, dir.path());
    auto spec = ingest::ExtractSpec::defaults(dir.path());
    auto load = ingest::load_microdata(spec);
    CHECK(load.report.total_rejected() == 0);
    REQUIRE(load.records.size() == data.households.size());
    CHECK(load.records.front().year == data.households.front().year);
    CHECK(load.records.back().income == data.households.back().income);
    auto prices = ingest::load_price_tables(spec);
    CHECK(prices.cpi == data.prices.cpi);
    CHECK(prices.rpp == data.prices.rpp);
    CHECK(prices.rent == data.prices.rent);
    CHECK(prices.rpp_observed_from == 2008);
}

TEST_CASE("config and truth round-trip through JSON") {
    auto c = small(9);
    c.rpp_noise = 0.5;
    auto back = synth::SynthConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());

    auto data = synth::generate(c);
    auto truth = synth::SynthTruth::from_json(data.truth.to_json());
    CHECK(truth.rpp == data.truth.rpp);
    CHECK(truth.fe == data.truth.fe);
}

TEST_CASE("unusable configs are rejected") {
    auto c = small();
    c.households_per_state_year = 0;
    CHECK_THROWS_AS(synth::generate(c), DataError);
    c = small();
    c.states.push_back(c.states.front());
    CHECK_THROWS_AS(synth::generate(c), DataError);
}
