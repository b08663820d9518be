#pragma once

#include "distviz/core.hpp"
#include "distviz/metrics.hpp"
#include "distviz/segment.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace distviz::layout {

inline constexpr const char* bundle_schema_version = "1.0.0";

using MedianTable = std::map<StateYear, double>;

/// position[s,y] = median[s,y] - national[reference_year]. Throws DataError
/// when the reference year has no national median.
std::map<StateYear, double> benchmark_positions(const MedianTable& medians,
                                                const std::map<int, double>& national_median,
                                                int reference_year = 2019);

/// Rank 1 = lowest median; tied states share the lowest rank of the tie and the
/// next rank skips (10, 10, 30 -> 1, 1, 3).
std::map<StateId, int> rank_states(const MedianTable& medians, int year);

/// Population weight of each state divided by the smallest state's weight.
/// Throws DataError for a state with zero total weight.
std::map<StateId, double> thickness(const std::map<StateId, double>& totals);

enum class BenchmarkMode : std::uint8_t { position, ranking };
std::string_view to_string(BenchmarkMode m) noexcept;
std::optional<BenchmarkMode> parse_benchmark_mode(std::string_view name);

struct KeyframeBucket {
    int k = 0;
    std::optional<double> height;
    std::optional<double> se;
    std::size_t n = 0;
    bool carried = false;
};

struct Slice {
    StateId state;
    double benchmark = 0.0;
    int rank = 0;
    double thickness = 1.0;
    std::size_t n_households = 0;
    bool age_standardized = true;
    /// "observed" / "backcast" for variants divided by RPP, empty otherwise.
    std::string rpp_source;
    std::vector<KeyframeBucket> buckets;
};

struct Keyframe {
    int year = 0;
    std::vector<Slice> slices;
};

struct BundleMetadata {
    Variant variant = Variant::ERHHRPP;
    std::string filter = "all";
    segment::BucketScheme scheme = segment::BucketScheme::decile;
    BenchmarkMode benchmark_mode = BenchmarkMode::position;
    int reference_year = 2019;
    std::optional<std::uint64_t> generation_seed;
    std::string age_mode = "reweight";
    std::optional<std::uint64_t> age_seed;
    std::optional<int> bootstrap_replicates;
    std::optional<std::uint64_t> bootstrap_seed;
    bool rpp_backcast = true;
    int rpp_observed_from = 2008;
    std::map<int, double> reference_median;
};

struct KeyframeBundle {
    std::string schema_version = bundle_schema_version;
    BundleMetadata metadata;
    std::map<int, Keyframe> years;
};

/// Per state-year extras carried into a slice.
struct CellInfo {
    std::size_t n_households = 0;
    bool age_standardized = true;
    std::string rpp_source;
};

struct AssembleInputs {
    std::map<StateYear, std::vector<segment::Bucket>> buckets;
    std::map<StateYear, double> positions;
    std::map<StateYear, int> ranks;
    std::map<StateYear, double> thickness;
    std::map<StateYear, CellInfo> cells;
    const metrics::BootstrapReport* bootstrap = nullptr;
};

/// Builds the ordered keyframes. Every input must cover the grid of `buckets`
/// and every year must have the same states; otherwise DataError lists the gaps.
KeyframeBundle assemble(const AssembleInputs& inputs, BundleMetadata metadata);

enum class Precision : std::uint8_t { export_digits, full };

/// Sorted keys, dollars at 6 significant digits (or full precision for the sidecar).
nlohmann::json to_json(const KeyframeBundle& bundle, Precision precision = Precision::export_digits);
/// Serialized bytes; identical inputs give identical bytes.
std::string serialize(const KeyframeBundle& bundle, Precision precision = Precision::export_digits);

/// Contract checks on a parsed bundle document. Empty result = valid.
std::vector<std::string> validate_bundle(const nlohmann::json& doc);

/// 6 significant digits, -0 normalized to 0.
double round_sig6(double value);

} // namespace distviz::layout
