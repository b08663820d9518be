#pragma once

#include "distviz/core.hpp"
#include "distviz/segment.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace distviz::metrics {

enum class GiniMethod : std::uint8_t { naive, sorted };

struct GiniResult {
    double g = 0.0;
    std::size_t n = 0;
    GiniMethod method = GiniMethod::sorted;
};

struct GiniOptions {
    /// Negative incomes are rejected unless set (the result may then exceed 1).
    bool allow_negative = false;
};

/// Pairwise double sum: sum_ij w_i w_j |x_i - x_j| / (2 W^2 mean). O(n^2).
/// Empty `weights` means unit weights.
GiniResult gini_naive(std::span<const double> x, std::span<const double> weights = {}, GiniOptions opts = {});

/// Same quantity from one pass over the ascending sort. O(n log n).
GiniResult gini_sorted(std::span<const double> x, std::span<const double> weights = {}, GiniOptions opts = {});

GiniResult gini(GiniMethod method, std::span<const double> x, std::span<const double> weights = {},
                GiniOptions opts = {});

struct LorenzPoint {
    double population = 0.0;
    double income = 0.0;
};

/// (0,0), then one point per household after the ascending sort, ending at (1,1).
std::vector<LorenzPoint> lorenz_points(std::span<const double> x, std::span<const double> weights = {});

/// Twice the area between the diagonal and the Lorenz polyline (trapezoids).
double lorenz_gini(std::span<const LorenzPoint> points);

struct BucketSe {
    int k = 0;
    std::optional<double> point;
    std::optional<double> se;
    /// Replicates in which the bucket had a value.
    int valid = 0;
};

struct CellBootstrap {
    int replicates = 0;
    std::uint64_t seed = 0;
    std::vector<BucketSe> buckets;
};

using BootstrapReport = std::map<StateYear, CellBootstrap>;

/// B household resamples (n out of n, with replacement, weights carried) of one
/// state-year frame; each replicate runs segment::summarize. se is the sample
/// standard deviation over replicates. Replicate r of cell c draws from the
/// stream (seed, fips, year, r), so the result is independent of threading.
CellBootstrap bootstrap_se(std::span<const segment::WeightedValue> frame, segment::BucketScheme scheme,
                           int replicates, std::uint64_t seed, StateYear cell = {});

} // namespace distviz::metrics
