#pragma once

#include "distviz/agestd.hpp"
#include "distviz/core.hpp"
#include "distviz/deflate.hpp"
#include "distviz/ingest.hpp"
#include "distviz/layout.hpp"
#include "distviz/metrics.hpp"
#include "distviz/segment.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace distviz::pipeline {

/// Everything that determines a pipeline run. Serialized next to the outputs.
struct RunConfig {
    /// Extract spec JSON; when empty the default layout under `data_dir` is used.
    std::filesystem::path extract;
    std::filesystem::path data_dir;
    /// Precomputed deflator document (from `backcast`); built on the fly when empty.
    std::filesystem::path deflators;
    std::filesystem::path out_dir;
    YearRange years;
    int reference_year = 2019;
    bool backcast = true;

    std::vector<Variant> variants{std::begin(all_variants), std::end(all_variants)};
    std::vector<SubpopulationFilter> filters = standard_filters();
    segment::BucketScheme scheme = segment::BucketScheme::decile;
    layout::BenchmarkMode benchmark_mode = layout::BenchmarkMode::position;

    agestd::AgeMode age_mode = agestd::AgeMode::reweight;
    std::optional<std::uint64_t> age_seed;

    int bootstrap_replicates = 500;
    std::optional<std::uint64_t> bootstrap_seed;
    std::vector<StateId> bootstrap_states;
    std::vector<int> bootstrap_years;

    int jobs = 0;
    bool full_precision_sidecar = false;

    nlohmann::json to_json() const;
    /// Throws std::invalid_argument for inconsistent settings (CLI usage errors).
    void check() const;
};

struct PipelineResult {
    std::vector<std::filesystem::path> bundles;
    ingest::RejectionReport rejections;
    std::size_t unstandardized_cells = 0;
};

/// Runs ingest -> deflate -> age standardization -> segmentation -> layout for
/// every requested (variant, filter) and writes bundles plus a manifest.
PipelineResult run_pipeline(const RunConfig& config);

std::string bundle_file_name(Variant variant, const SubpopulationFilter& filter);

struct BackcastConfig {
    std::filesystem::path extract;
    std::filesystem::path data_dir;
    std::filesystem::path out_dir;
    YearRange years;
    int reference_year = 2019;
    bool backcast = true;
    /// Optional generator truth (truth.json) to report recovery errors against.
    std::filesystem::path truth;

    nlohmann::json to_json() const;
};

struct RecoveryError {
    double coefficients = 0.0;
    double backcast_rpp = 0.0;
};

struct BackcastResult {
    deflate::DeflatorSet deflators;
    std::optional<RecoveryError> recovery;
};

/// Writes deflators.json and backcast_report.{json,csv} into out_dir.
BackcastResult run_backcast(const BackcastConfig& config);

/// Max abs deviation of fitted coefficients (reference-normalized) and of the
/// backcast RPP cells from the generator's truth.
RecoveryError recovery_error(const deflate::DeflatorSet& deflators, const nlohmann::json& truth);

struct GiniRow {
    std::vector<std::string> group;
    std::size_t n = 0;
    double g = 0.0;
};

struct GiniRequest {
    std::string value_column = "income";
    std::string weight_column;
    std::vector<std::string> group_by{"state", "year"};
    metrics::GiniMethod method = metrics::GiniMethod::sorted;
    bool allow_negative = false;
    char delimiter = ',';
};

/// Gini per group of a CSV table; groups appear in first-seen order.
std::vector<GiniRow> gini_table(std::string_view csv_text, const GiniRequest& request);
std::string format_gini_table(const std::vector<GiniRow>& rows, const GiniRequest& request);

} // namespace distviz::pipeline
