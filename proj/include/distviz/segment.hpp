#pragma once

#include "distviz/core.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace distviz::segment {

struct WeightedValue {
    double value = 0.0;
    double weight = 0.0;
};

enum class BucketScheme : std::uint8_t { decile, percentile };

/// Bucket points in percent: decile {5,15,25,35,45,50,55,65,75,85,95},
/// percentile {5,6,...,95}.
const std::vector<int>& bucket_points(BucketScheme scheme);

std::string_view to_string(BucketScheme scheme) noexcept;
std::optional<BucketScheme> parse_scheme(std::string_view name);

/// Stable ascending sort by value (ties keep input order).
std::vector<WeightedValue> sorted_by_value(std::span<const WeightedValue> entries);

/// P_h = cumulative weight through h / total weight, for entries already sorted
/// ascending. Throws NumericError when the total weight is not positive.
std::vector<double> percentile_ranks(std::span<const WeightedValue> sorted);

struct Ranked {
    std::vector<WeightedValue> entries;
    std::vector<double> ranks;
};

struct Trimmed {
    Ranked kept;
    std::size_t removed_low = 0;
    std::size_t removed_high = 0;
    bool empty() const noexcept { return kept.entries.empty(); }
};

inline constexpr double trim_low = 0.05;
inline constexpr double trim_high = 0.95;

/// Keeps entries with trim_low <= P <= trim_high; ranks are carried, not recomputed.
Trimmed trim(const Ranked& ranked);

struct Bucket {
    int k = 0;
    /// Maximum value of the band; carried from the previous k when the band is empty.
    std::optional<double> height;
    std::size_t n = 0;
    bool carried = false;
    std::optional<double> se;
};

/// Band for k is (k-1)/100 <= P <= k/100, evaluated on the ranked frame. With
/// k in 5..95 no band reaches below P = 0.04 or above P = 0.95, so the trimmed
/// tails never contribute (the k = 5 band keeps its 0.04 <= P < 0.05 part,
/// otherwise it would be empty for almost any weighted sample).
/// An empty band carries the height of the nearest household below it
/// (flagged), the same value chaining through the 1-percent bands would carry;
/// with nothing at or above P = 0.04 below it the height stays missing.
std::vector<Bucket> build_buckets(const Ranked& ranked, BucketScheme scheme);

/// sort -> ranks -> buckets. The one code path used by the pipeline and every
/// bootstrap replicate.
std::vector<Bucket> summarize(std::span<const WeightedValue> entries, BucketScheme scheme);

/// Smallest value whose rank reaches 0.5. Throws NumericError on zero total weight.
double weighted_median(std::span<const WeightedValue> entries);

} // namespace distviz::segment
