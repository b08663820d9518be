#include <doctest.h>

#include "distviz/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace distviz;
using namespace distviz::metrics;

namespace {

std::vector<double> random_incomes(std::mt19937_64& rng, std::size_t n) {
    std::lognormal_distribution<double> d(10.5, 0.9);
    std::vector<double> x(n);
    for (auto& v : x)
        v = std::round(d(rng));
    return x;
}

std::vector<segment::WeightedValue> lognormal_population(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> inc(10.8, 0.8);
    std::uniform_real_distribution<double> w(500, 2500);
    std::vector<segment::WeightedValue> v(n);
    for (auto& e : v)
        e = {std::round(inc(rng)), std::round(w(rng) * 100) / 100};
    return v;
}

std::optional<double> se_at(const CellBootstrap& b, int k) {
    for (const auto& x : b.buckets)
        if (x.k == k)
            return x.se;
    return std::nullopt;
}

} // namespace

TEST_CASE("Gini examples") {
    std::vector<double> eq{5, 5, 5, 5}, abc{1, 2, 3}, conc{0, 0, 0, 7};
    for (auto m : {GiniMethod::naive, GiniMethod::sorted}) {
        CHECK(gini(m, eq).g == 0.0);
        CHECK(gini(m, abc).g == doctest::Approx(2.0 / 9.0).epsilon(1e-15));
        CHECK(gini(m, conc).g == doctest::Approx(0.75).epsilon(1e-15));
        CHECK(gini(m, abc).n == 3);
    }
}

TEST_CASE("zero-mean input is undefined") {
    std::vector<double> z{0, 0, 0};
    try {
        gini_naive(z);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()) == "Gini undefined for zero-mean input");
    }
    CHECK_THROWS_AS(gini_sorted(z), NumericError);
}

TEST_CASE("negative incomes need an explicit opt-in") {
    std::vector<double> x{-10, 20, 30};
    CHECK_THROWS_AS(gini_sorted(x), DataError);
    auto naive = gini_naive(x, {}, {.allow_negative = true}).g;
    auto sorted = gini_sorted(x, {}, {.allow_negative = true}).g;
    CHECK(sorted == doctest::Approx(naive).epsilon(1e-12));
    std::vector<double> y{-100, 1, 200};
    CHECK(gini_sorted(y, {}, {.allow_negative = true}).g > 1.0);
}

TEST_CASE("sorted Gini equals the pairwise sum, weighted and unweighted") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> w(0.5, 20);
    std::uniform_int_distribution<std::size_t> len(1, 400);
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_incomes(rng, len(rng));
        std::vector<double> wt(x.size());
        for (auto& v : wt)
            v = w(rng);
        double a = gini_naive(x).g, b = gini_sorted(x).g;
        REQUIRE(std::abs(a - b) <= 1e-12 * std::max(std::abs(a), 1e-300));
        double aw = gini_naive(x, wt).g, bw = gini_sorted(x, wt).g;
        REQUIRE(std::abs(aw - bw) <= 1e-12 * std::max(std::abs(aw), 1e-300));
    }
}

TEST_CASE("Gini bounds, permutation and scale invariance") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 50; ++trial) {
        auto x = random_incomes(rng, 2 + trial * 5);
        double n = static_cast<double>(x.size());
        double g = gini_sorted(x).g;
        CHECK(g >= 0);
        CHECK(g <= (n - 1) / n + 1e-15);
        auto p = x;
        std::shuffle(p.begin(), p.end(), rng);
        CHECK(gini_sorted(p).g == doctest::Approx(g).epsilon(1e-13));
        auto s = x;
        for (auto& v : s)
            v *= 3;
        CHECK(gini_sorted(s).g == doctest::Approx(g).epsilon(1e-13));
    }
}

TEST_CASE("Lorenz points") {
    std::vector<double> eq{4, 4, 4, 4};
    for (const auto& p : lorenz_points(eq))
        CHECK(p.income == doctest::Approx(p.population).epsilon(1e-15));

    std::vector<double> conc{0, 0, 0, 9};
    auto pts = lorenz_points(conc);
    REQUIRE(pts.size() == 5);
    CHECK(pts[3].population == 0.75);
    CHECK(pts[3].income == 0.0);
    CHECK(pts[4].population == 1.0);
    CHECK(pts[4].income == 1.0);
    CHECK(lorenz_gini(pts) == doctest::Approx(0.75).epsilon(1e-15));

    std::vector<double> bad{-5, 1};
    CHECK_THROWS_AS(lorenz_points(bad), DataError);
}

TEST_CASE("twice the Lorenz area gap equals the Gini") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> w(0.5, 20);
    for (int trial = 0; trial < 30; ++trial) {
        auto x = random_incomes(rng, 3 + trial * 11);
        std::vector<double> wt(x.size());
        for (auto& v : wt)
            v = w(rng);
        CHECK(std::abs(lorenz_gini(lorenz_points(x)) - gini_naive(x).g) < 1e-9);
        CHECK(std::abs(lorenz_gini(lorenz_points(x, wt)) - gini_naive(x, wt).g) < 1e-9);
    }
}

TEST_CASE("bootstrap of a constant frame has zero se") {
    std::vector<segment::WeightedValue> v(200, {5000.0, 1.0});
    for (int i = 0; i < 200; ++i)
        v[static_cast<std::size_t>(i)].weight = 1.0 + i % 7;
    auto b = bootstrap_se(v, segment::BucketScheme::decile, 50, 3);
    CHECK(b.replicates == 50);
    CHECK(b.seed == 3);
    for (const auto& x : b.buckets) {
        REQUIRE(x.se.has_value());
        CHECK(*x.se == 0.0);
        CHECK(x.point == 5000.0);
    }
}

TEST_CASE("bootstrap is reproducible and seed dependent") {
    auto pop = lognormal_population(1, 400);
    auto a = bootstrap_se(pop, segment::BucketScheme::decile, 60, 9, {StateId{11}, 1976});
    auto b = bootstrap_se(pop, segment::BucketScheme::decile, 60, 9, {StateId{11}, 1976});
    auto c = bootstrap_se(pop, segment::BucketScheme::decile, 60, 10, {StateId{11}, 1976});
    CHECK(se_at(a, 95) == se_at(b, 95));
    CHECK(se_at(a, 95) != se_at(c, 95));
    for (const auto& x : a.buckets)
        if (x.se)
            CHECK(*x.se >= 0);
}

TEST_CASE("bootstrap se rises with k and falls with n") {
    auto small = lognormal_population(2, 320);
    auto large = lognormal_population(3, 5412);
    auto bs = bootstrap_se(small, segment::BucketScheme::decile, 200, 1);
    auto bl = bootstrap_se(large, segment::BucketScheme::decile, 200, 1);
    CHECK(*se_at(bs, 95) > *se_at(bs, 50));
    CHECK(*se_at(bl, 95) > *se_at(bl, 50));
    CHECK(*se_at(bs, 95) > *se_at(bl, 95));
}

TEST_CASE("bootstrap argument checks") {
    std::vector<segment::WeightedValue> empty;
    CHECK_THROWS_AS(bootstrap_se(empty, segment::BucketScheme::decile, 10, 1), DataError);
    auto pop = lognormal_population(4, 10);
    CHECK_THROWS_AS(bootstrap_se(pop, segment::BucketScheme::decile, 1, 1), std::invalid_argument);
}
