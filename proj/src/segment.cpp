#include "distviz/segment.hpp"

#include <algorithm>
#include <numeric>

namespace distviz::segment {

const std::vector<int>& bucket_points(BucketScheme scheme) {
    static const std::vector<int> decile{5, 15, 25, 35, 45, 50, 55, 65, 75, 85, 95};
    static const std::vector<int> percentile = [] {
        std::vector<int> v(91);
        std::iota(v.begin(), v.end(), 5);
        return v;
    }();
    return scheme == BucketScheme::decile ? decile : percentile;
}

std::string_view to_string(BucketScheme scheme) noexcept {
    return scheme == BucketScheme::decile ? "decile" : "percentile";
}

std::optional<BucketScheme> parse_scheme(std::string_view name) {
    if (name == "decile")
        return BucketScheme::decile;
    if (name == "percentile")
        return BucketScheme::percentile;
    return std::nullopt;
}

std::vector<WeightedValue> sorted_by_value(std::span<const WeightedValue> entries) {
    std::vector<WeightedValue> out(entries.begin(), entries.end());
    std::ranges::stable_sort(out, {}, &WeightedValue::value);
    return out;
}

std::vector<double> percentile_ranks(std::span<const WeightedValue> sorted) {
    double total = 0.0;
    for (const auto& e : sorted)
        total += e.weight;
    if (!(total > 0))
        throw NumericError("percentile ranks undefined: total weight is zero");
    std::vector<double> ranks;
    ranks.reserve(sorted.size());
    double cum = 0.0;
    for (const auto& e : sorted) {
        cum += e.weight;
        ranks.push_back(cum / total);
    }
    return ranks;
}

Trimmed trim(const Ranked& ranked) {
    Trimmed t;
    for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
        double p = ranked.ranks[i];
        if (p < trim_low)
            ++t.removed_low;
        else if (p > trim_high)
            ++t.removed_high;
        else {
            t.kept.entries.push_back(ranked.entries[i]);
            t.kept.ranks.push_back(p);
        }
    }
    return t;
}

std::vector<Bucket> build_buckets(const Ranked& ranked, BucketScheme scheme) {
    const auto& ranks = ranked.ranks;
    const auto& points = bucket_points(scheme);
    // Lowest band edge of either scheme; nothing below it is ever summarized.
    const double floor = static_cast<double>(points.front() - 1) / 100.0;
    std::vector<Bucket> out;
    for (int k : points) {
        const double lo = static_cast<double>(k - 1) / 100.0;
        const double hi = static_cast<double>(k) / 100.0;
        auto first = std::ranges::lower_bound(ranks, lo);
        auto last = std::ranges::upper_bound(ranks, hi);
        Bucket b;
        b.k = k;
        if (first < last) {
            b.n = static_cast<std::size_t>(last - first);
            // Entries are sorted by value, so the band maximum is its last entry.
            b.height = ranked.entries[static_cast<std::size_t>(last - ranks.begin()) - 1].value;
        } else {
            // Carry the nearest household below the band. This is what chaining
            // through every 1-percent band would carry, so decile and percentile
            // heights agree at shared k.
            b.carried = true;
            if (first != ranks.begin() && *std::prev(first) >= floor)
                b.height = ranked.entries[static_cast<std::size_t>(first - ranks.begin()) - 1].value;
        }
        out.push_back(b);
    }
    return out;
}

std::vector<Bucket> summarize(std::span<const WeightedValue> entries, BucketScheme scheme) {
    Ranked ranked;
    ranked.entries = sorted_by_value(entries);
    ranked.ranks = percentile_ranks(ranked.entries);
    return build_buckets(ranked, scheme);
}

double weighted_median(std::span<const WeightedValue> entries) {
    auto sorted = sorted_by_value(entries);
    auto ranks = percentile_ranks(sorted);
    auto it = std::ranges::lower_bound(ranks, 0.5);
    if (it == ranks.end())
        --it;
    return sorted[static_cast<std::size_t>(it - ranks.begin())].value;
}

} // namespace distviz::segment
