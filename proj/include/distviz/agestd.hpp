#pragma once

#include "distviz/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace distviz::agestd {

/// Householder age bins. Bin 0 is "under edges[0]", the last bin is "edges.back() and over".
struct AgeBins {
    std::vector<int> edges{20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85};

    std::size_t count() const noexcept { return edges.size() + 1; }
    std::size_t bin(int age) const noexcept;
    std::string label(std::size_t bin) const;
};

struct AgeTarget {
    AgeBins bins;
    std::vector<double> shares;

    nlohmann::json to_json() const;
    static AgeTarget from_json(const nlohmann::json& j);
};

/// One household in a state-year frame. `source` indexes the originating
/// record so per-variant incomes can be attached without restandardizing.
struct FrameEntry {
    double income = 0.0;
    double weight = 0.0;
    int age = 0;
    Sex sex = Sex::male;
    bool black = false;
    bool hispanic = false;
    int edu_years = 0;
    std::uint32_t source = 0;
};

enum class AgeMode : std::uint8_t { raw, reweight, resample };

struct Provenance {
    AgeMode mode = AgeMode::raw;
    std::optional<std::uint64_t> seed;
};

struct Frame {
    StateYear cell;
    std::vector<FrameEntry> entries;
    Provenance provenance;

    double total_weight() const;
};

/// Per state-year frames built from records (income = nominal income).
std::vector<Frame> frames_from_records(std::span<const HouseholdRecord> records);

/// Weighted bin shares of one frame.
std::vector<double> bin_shares(const Frame& frame, const AgeBins& bins);

/// Pooled weighted age-bin shares over all frames.
AgeTarget build_target(std::span<const Frame> frames, const AgeBins& bins = {});

/// Reweight: multiply each weight by target/observed share of its bin.
/// Resample: N draws with replacement (bins by target share, households within
/// a bin by weight), uniform output weights. Throws DataError when a bin with
/// positive target share has no weight, std::invalid_argument for resample
/// without a seed.
Frame standardize(const Frame& frame, const AgeTarget& target, AgeMode mode,
                  std::optional<std::uint64_t> seed = std::nullopt);

std::string_view to_string(AgeMode mode) noexcept;
std::optional<AgeMode> parse_age_mode(std::string_view name);

} // namespace distviz::agestd
