#include <doctest.h>

#include "distviz/layout.hpp"
#include "test_support.hpp"

#include <cstdlib>

using namespace distviz;
using namespace distviz::layout;

namespace {

const StateId CA{6}, DC{11}, NY{36};

segment::Bucket bucket(int k, std::optional<double> h, std::size_t n, bool carried = false) {
    return {k, h, n, carried, std::nullopt};
}

/// Three states over two years with hand-picked values.
AssembleInputs golden_inputs() {
    AssembleInputs in;
    const std::map<StateId, std::array<double, 2>> medians{{CA, {41000.5, 61000.25}},
                                                            {DC, {38000.123456789, 72000.0}},
                                                            {NY, {43000.0, 59000.0}}};
    const std::map<StateId, std::array<double, 2>> totals{{CA, {3000, 3300}}, {DC, {500, 550}}, {NY, {2000, 2100}}};
    const int years[] = {1976, 2019};
    MedianTable med;
    for (const auto& [s, m] : medians)
        for (int i = 0; i < 2; ++i)
            med[{s, years[i]}] = m[static_cast<std::size_t>(i)];
    auto pos = benchmark_positions(med, {{2019, 64000.0}});
    for (int i = 0; i < 2; ++i) {
        int y = years[i];
        auto ranks = rank_states(med, y);
        std::map<StateId, double> tot;
        for (const auto& [s, t] : totals)
            tot[s] = t[static_cast<std::size_t>(i)];
        auto thick = thickness(tot);
        for (const auto& [s, m] : medians) {
            StateYear cell{s, y};
            double base = m[static_cast<std::size_t>(i)];
            in.buckets[cell] = {bucket(5, std::nullopt, 0, true), bucket(15, base * 0.3, 3),
                                bucket(25, base * 0.45, 2),         bucket(35, base * 0.45, 0, true),
                                bucket(45, base * 0.9, 4),          bucket(50, base, 2),
                                bucket(55, base * 1.1, 2),          bucket(65, base * 1.4, 3),
                                bucket(75, base * 1.8, 1),          bucket(85, base * 2.3, 2),
                                bucket(95, base * 3.3333333333, 1)};
            in.positions[cell] = pos.at(cell);
            in.ranks[cell] = ranks.at(s);
            in.thickness[cell] = thick.at(s);
            in.cells[cell] = {100 + static_cast<std::size_t>(s.fips()), s != DC, y >= 2008 ? "observed" : "backcast"};
        }
    }
    return in;
}

BundleMetadata golden_metadata() {
    BundleMetadata m;
    m.variant = Variant::ERHHRPP;
    m.filter = "all";
    m.generation_seed = 1;
    m.reference_median = {{1976, 40000.0}, {2019, 64000.0}};
    return m;
}

} // namespace

TEST_CASE("benchmark positions") {
    MedianTable med{{{CA, 2019}, 50000.0}, {{DC, 2019}, 30000.0}, {{DC, 1976}, 50000.0}};
    auto pos = benchmark_positions(med, {{2019, 50000.0}});
    CHECK(pos.at({CA, 2019}) == 0.0);
    CHECK(pos.at({DC, 2019}) == -20000.0);
    CHECK(pos.at({DC, 1976}) == 0.0);
    CHECK_THROWS_AS(benchmark_positions(med, {{2018, 1.0}}), DataError);
}

TEST_CASE("position differences are translation invariant") {
    MedianTable med{{{CA, 2000}, 41000.0}, {{DC, 2000}, 52000.0}, {{NY, 2000}, 47000.0}};
    MedianTable shifted;
    for (auto [c, m] : med)
        shifted[c] = m + 1234.0;
    auto a = benchmark_positions(med, {{2019, 60000.0}});
    auto b = benchmark_positions(shifted, {{2019, 60000.0 + 1234.0}});
    for (auto [c, v] : a)
        CHECK(b.at(c) == doctest::Approx(v));
    CHECK(a.at({DC, 2000}) - a.at({CA, 2000}) == doctest::Approx(b.at({DC, 2000}) - b.at({CA, 2000})));
}

TEST_CASE("ranking with ties") {
    MedianTable med{{{CA, 2000}, 10.0}, {{DC, 2000}, 20.0}, {{NY, 2000}, 30.0}};
    auto r = rank_states(med, 2000);
    CHECK(r.at(CA) == 1);
    CHECK(r.at(DC) == 2);
    CHECK(r.at(NY) == 3);
    med[{DC, 2000}] = 10.0;
    r = rank_states(med, 2000);
    CHECK(r.at(CA) == 1);
    CHECK(r.at(DC) == 1);
    CHECK(r.at(NY) == 3);
}

TEST_CASE("thickness") {
    auto t = thickness({{CA, 100.0}, {DC, 300.0}});
    CHECK(t.at(CA) == 1.0);
    CHECK(t.at(DC) == 3.0);
    CHECK(thickness({{NY, 123.4}}).at(NY) == 1.0);
    CHECK_THROWS_AS(thickness({{CA, 100.0}, {DC, 0.0}}), DataError);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(1, 1e7);
    for (int trial = 0; trial < 50; ++trial) {
        std::map<StateId, double> totals;
        for (auto s : StateId::all())
            totals[s] = u(rng);
        auto th = thickness(totals);
        double mn = 1e300;
        int ones = 0;
        for (auto [s, v] : th) {
            mn = std::min(mn, v);
            ones += v == 1.0;
        }
        CHECK(mn == 1.0);
        CHECK(ones == 1);
    }
}

TEST_CASE("sig-6 rounding") {
    CHECK(round_sig6(123456789.0) == 123457000.0);
    CHECK(round_sig6(-0.000012345678) == -0.0000123457);
    CHECK(round_sig6(52343.81) == 52343.8);
    CHECK(std::signbit(round_sig6(-0.0)) == false);
}

TEST_CASE("assembled keyframes are ordered and valid") {
    auto b = assemble(golden_inputs(), golden_metadata());
    REQUIRE(b.years.size() == 2);
    const auto& s1976 = b.years.at(1976).slices;
    REQUIRE(s1976.size() == 3);
    CHECK(s1976[0].state == DC);
    CHECK(s1976[2].state == NY);
    auto doc = to_json(b);
    CHECK(validate_bundle(doc).empty());
    CHECK(doc["schema_version"] == bundle_schema_version);
    CHECK(doc["years"]["1976"]["slices"][0]["benchmark"] == -25999.9);
    CHECK_FALSE(doc["years"]["1976"]["slices"][0]["buckets"][0].contains("se"));

    auto ranked = golden_metadata();
    ranked.benchmark_mode = BenchmarkMode::ranking;
    auto rb = to_json(assemble(golden_inputs(), ranked));
    CHECK(validate_bundle(rb).empty());
    CHECK(rb["years"]["2019"]["slices"][0]["rank"] == 1);
}

TEST_CASE("assembly is byte deterministic and matches the golden file") {
    auto a = serialize(assemble(golden_inputs(), golden_metadata()));
    auto b = serialize(assemble(golden_inputs(), golden_metadata()));
    CHECK(a == b);
    const std::filesystem::path golden = std::filesystem::path(DISTVIZ_TEST_DATA) / "golden_bundle.json";
    if (std::getenv("DISTVIZ_UPDATE_GOLDEN"))
        testing::spit(golden, a);
    REQUIRE(std::filesystem::exists(golden));
    CHECK(a == testing::slurp(golden));
}

TEST_CASE("bootstrap standard errors are attached when present") {
    auto in = golden_inputs();
    metrics::BootstrapReport report;
    metrics::CellBootstrap cb;
    cb.replicates = 10;
    for (const auto& bk : in.buckets.at({DC, 2019}))
        cb.buckets.push_back({bk.k, bk.height, bk.height ? std::optional<double>(bk.k * 10.0) : std::nullopt, 10});
    report[{DC, 2019}] = cb;
    in.bootstrap = &report;
    auto doc = to_json(assemble(in, golden_metadata()));
    CHECK(validate_bundle(doc).empty());
    for (const auto& s : doc["years"]["2019"]["slices"])
        if (s["state"] == "DC")
            CHECK(s["buckets"][10]["se"] == 950.0);
        else
            CHECK_FALSE(s["buckets"][10].contains("se"));
}

TEST_CASE("grid mismatch lists the missing cells") {
    auto in = golden_inputs();
    in.buckets.erase({NY, 2019});
    in.positions.erase({CA, 1976});
    try {
        assemble(in, golden_metadata());
        FAIL("expected DataError");
    } catch (const DataError& e) {
        std::string msg = e.what();
        CHECK(msg.find("NY 2019") != std::string::npos);
        CHECK(msg.find("position CA 1976") != std::string::npos);
    }
}

TEST_CASE("validator catches contract violations") {
    auto good = to_json(assemble(golden_inputs(), golden_metadata()));
    REQUIRE(validate_bundle(good).empty());

    auto unsorted = good;
    std::swap(unsorted["years"]["1976"]["slices"][0], unsorted["years"]["1976"]["slices"][1]);
    CHECK_FALSE(validate_bundle(unsorted).empty());

    auto thick = good;
    for (auto& s : thick["years"]["2019"]["slices"])
        s["thickness"] = s["thickness"].get<double>() * 2;
    CHECK_FALSE(validate_bundle(thick).empty());

    auto decreasing = good;
    decreasing["years"]["2019"]["slices"][0]["buckets"][10]["height"] = 1.0;
    CHECK_FALSE(validate_bundle(decreasing).empty());

    auto missing_state = good;
    missing_state["years"]["2019"]["slices"].erase(0);
    CHECK_FALSE(validate_bundle(missing_state).empty());

    auto no_version = good;
    no_version.erase("schema_version");
    CHECK_FALSE(validate_bundle(no_version).empty());

    auto bad_se = good;
    bad_se["years"]["2019"]["slices"][0]["buckets"][3]["se"] = -1.0;
    CHECK_FALSE(validate_bundle(bad_se).empty());
}
