#include "distviz/agestd.hpp"

#include "distviz/rng.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace distviz::agestd {

std::size_t AgeBins::bin(int age) const noexcept {
    return static_cast<std::size_t>(std::ranges::upper_bound(edges, age) - edges.begin());
}

std::string AgeBins::label(std::size_t b) const {
    if (b == 0)
        return fmt::format("<{}", edges.front());
    if (b == edges.size())
        return fmt::format("{}+", edges.back());
    return fmt::format("{}-{}", edges[b - 1], edges[b] - 1);
}

double Frame::total_weight() const {
    double w = 0.0;
    for (const auto& e : entries)
        w += e.weight;
    return w;
}

std::vector<Frame> frames_from_records(std::span<const HouseholdRecord> records) {
    std::map<StateYear, Frame> by_cell;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        auto& f = by_cell[{r.state, r.year}];
        f.cell = {r.state, r.year};
        f.entries.push_back({r.income, r.weight, r.age, r.sex, r.black, r.hispanic, r.edu_years,
                             static_cast<std::uint32_t>(i)});
    }
    std::vector<Frame> out;
    out.reserve(by_cell.size());
    for (auto& [_, f] : by_cell)
        out.push_back(std::move(f));
    return out;
}

std::vector<double> bin_shares(const Frame& frame, const AgeBins& bins) {
    std::vector<double> w(bins.count(), 0.0);
    for (const auto& e : frame.entries)
        w[bins.bin(e.age)] += e.weight;
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    if (total > 0)
        for (auto& x : w)
            x /= total;
    return w;
}

AgeTarget build_target(std::span<const Frame> frames, const AgeBins& bins) {
    if (bins.count() == 0)
        throw DataError("age target needs at least one bin");
    AgeTarget t{bins, std::vector<double>(bins.count(), 0.0)};
    for (const auto& f : frames)
        for (const auto& e : f.entries)
            t.shares[bins.bin(e.age)] += e.weight;
    double total = std::accumulate(t.shares.begin(), t.shares.end(), 0.0);
    if (!(total > 0))
        throw DataError("age target: no household weight in the data");
    for (auto& s : t.shares)
        s /= total;
    return t;
}

namespace {

void require_bins(const Frame& frame, const AgeTarget& target, const std::vector<double>& bin_weight) {
    std::vector<std::string> empty;
    for (std::size_t b = 0; b < target.shares.size(); ++b)
        if (target.shares[b] > 0 && !(bin_weight[b] > 0))
            empty.push_back(target.bins.label(b));
    if (!empty.empty())
        throw DataError(fmt::format("{} {}: age bin(s) with target share > 0 are empty: {}",
                                    frame.cell.state.code(), frame.cell.year, fmt::join(empty, ", ")));
}

} // namespace

Frame standardize(const Frame& frame, const AgeTarget& target, AgeMode mode, std::optional<std::uint64_t> seed) {
    if (mode == AgeMode::resample && !seed)
        throw std::invalid_argument("age resampling requires a seed");
    if (target.shares.size() != target.bins.count())
        throw DataError("age target shares do not match its bins");

    Frame out;
    out.cell = frame.cell;
    out.provenance = {mode, mode == AgeMode::resample ? seed : std::nullopt};
    if (mode == AgeMode::raw) {
        out.entries = frame.entries;
        return out;
    }

    std::vector<double> bin_weight(target.bins.count(), 0.0);
    for (const auto& e : frame.entries)
        bin_weight[target.bins.bin(e.age)] += e.weight;
    require_bins(frame, target, bin_weight);
    const double total = std::accumulate(bin_weight.begin(), bin_weight.end(), 0.0);

    if (mode == AgeMode::reweight) {
        std::vector<double> multiplier(bin_weight.size(), 0.0);
        for (std::size_t b = 0; b < bin_weight.size(); ++b)
            if (bin_weight[b] > 0)
                multiplier[b] = target.shares[b] * total / bin_weight[b];
        out.entries = frame.entries;
        for (auto& e : out.entries)
            e.weight *= multiplier[target.bins.bin(e.age)];
        return out;
    }

    // resample
    std::vector<std::vector<std::size_t>> members(bin_weight.size());
    for (std::size_t i = 0; i < frame.entries.size(); ++i)
        members[target.bins.bin(frame.entries[i].age)].push_back(i);

    std::vector<std::discrete_distribution<std::size_t>> within(members.size());
    for (std::size_t b = 0; b < members.size(); ++b) {
        if (members[b].empty())
            continue;
        std::vector<double> w;
        w.reserve(members[b].size());
        for (auto i : members[b])
            w.push_back(frame.entries[i].weight);
        within[b] = std::discrete_distribution<std::size_t>(w.begin(), w.end());
    }

    auto rng = make_rng(*seed, {static_cast<std::uint64_t>(frame.cell.state.fips()),
                                static_cast<std::uint64_t>(frame.cell.year)});
    std::discrete_distribution<std::size_t> pick_bin(target.shares.begin(), target.shares.end());
    const std::size_t n = frame.entries.size();
    const double uniform_weight = n ? total / static_cast<double>(n) : 0.0;
    out.entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto b = pick_bin(rng);
        auto e = frame.entries[members[b][within[b](rng)]];
        e.weight = uniform_weight;
        out.entries.push_back(e);
    }
    return out;
}

std::string_view to_string(AgeMode mode) noexcept {
    switch (mode) {
    case AgeMode::raw: return "none";
    case AgeMode::reweight: return "reweight";
    case AgeMode::resample: return "resample";
    }
    return "?";
}

std::optional<AgeMode> parse_age_mode(std::string_view name) {
    for (auto m : {AgeMode::raw, AgeMode::reweight, AgeMode::resample})
        if (to_string(m) == name)
            return m;
    return std::nullopt;
}

nlohmann::json AgeTarget::to_json() const {
    nlohmann::json j;
    j["edges"] = bins.edges;
    j["bins"] = nlohmann::json::array();
    for (std::size_t b = 0; b < shares.size(); ++b)
        j["bins"].push_back({{"label", bins.label(b)}, {"share", shares[b]}});
    return j;
}

AgeTarget AgeTarget::from_json(const nlohmann::json& j) {
    AgeTarget t;
    try {
        t.bins.edges = j.at("edges").get<std::vector<int>>();
        for (const auto& b : j.at("bins"))
            t.shares.push_back(b.at("share").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("age target: ") + e.what());
    }
    if (t.shares.size() != t.bins.count())
        throw DataError("age target: share count does not match bins");
    return t;
}

} // namespace distviz::agestd
