#include "distviz/layout.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace distviz::layout {

std::map<StateYear, double> benchmark_positions(const MedianTable& medians,
                                                const std::map<int, double>& national_median,
                                                int reference_year) {
    auto ref = national_median.find(reference_year);
    if (ref == national_median.end())
        throw DataError(fmt::format("no data for benchmark reference year {}", reference_year));
    std::map<StateYear, double> out;
    for (const auto& [cell, m] : medians)
        out[cell] = m - ref->second;
    return out;
}

std::map<StateId, int> rank_states(const MedianTable& medians, int year) {
    std::vector<std::pair<double, StateId>> v;
    for (const auto& [cell, m] : medians)
        if (cell.year == year)
            v.emplace_back(m, cell.state);
    std::ranges::sort(v);
    std::map<StateId, int> ranks;
    for (std::size_t i = 0; i < v.size(); ++i) {
        int r = static_cast<int>(i) + 1;
        if (i > 0 && v[i].first == v[i - 1].first)
            r = ranks[v[i - 1].second];
        ranks[v[i].second] = r;
    }
    return ranks;
}

std::map<StateId, double> thickness(const std::map<StateId, double>& totals) {
    double smallest = std::numeric_limits<double>::infinity();
    for (const auto& [s, w] : totals) {
        if (!(w > 0))
            throw DataError(fmt::format("state {} has zero population weight", s.code()));
        smallest = std::min(smallest, w);
    }
    std::map<StateId, double> out;
    for (const auto& [s, w] : totals)
        out[s] = w / smallest;
    return out;
}

std::string_view to_string(BenchmarkMode m) noexcept { return m == BenchmarkMode::position ? "position" : "ranking"; }

std::optional<BenchmarkMode> parse_benchmark_mode(std::string_view name) {
    if (name == "position")
        return BenchmarkMode::position;
    if (name == "ranking")
        return BenchmarkMode::ranking;
    return std::nullopt;
}

double round_sig6(double value) {
    if (!std::isfinite(value) || value == 0.0)
        return value == 0.0 ? 0.0 : value;
    double r = std::stod(fmt::format("{:.6g}", value));
    return r == 0.0 ? 0.0 : r;
}

KeyframeBundle assemble(const AssembleInputs& in, BundleMetadata metadata) {
    std::vector<std::string> missing;
    auto check = [&](const auto& table, std::string_view what, StateYear cell) {
        if (!table.contains(cell))
            missing.push_back(fmt::format("{} {} {}", what, cell.state.code(), cell.year));
    };
    std::map<int, std::set<StateId>> states_by_year;
    for (const auto& [cell, _] : in.buckets) {
        check(in.positions, "position", cell);
        check(in.ranks, "rank", cell);
        check(in.thickness, "thickness", cell);
        check(in.cells, "cell", cell);
        states_by_year[cell.year].insert(cell.state);
    }
    if (!states_by_year.empty()) {
        const auto& first = states_by_year.begin()->second;
        for (const auto& [year, states] : states_by_year)
            for (StateId s : first)
                if (!states.contains(s))
                    missing.push_back(fmt::format("bucket {} {}", s.code(), year));
        for (const auto& [year, states] : states_by_year)
            for (StateId s : states)
                if (!first.contains(s))
                    missing.push_back(fmt::format("bucket {} {}", s.code(), states_by_year.begin()->first));
    }
    if (!missing.empty())
        throw DataError(fmt::format("keyframe grid mismatch, missing: {}", fmt::join(missing, "; ")));

    KeyframeBundle bundle;
    bundle.metadata = std::move(metadata);
    for (const auto& [cell, buckets] : in.buckets) {
        Slice s;
        s.state = cell.state;
        s.benchmark = in.positions.at(cell);
        s.rank = in.ranks.at(cell);
        s.thickness = in.thickness.at(cell);
        const auto& info = in.cells.at(cell);
        s.n_households = info.n_households;
        s.age_standardized = info.age_standardized;
        s.rpp_source = info.rpp_source;

        const metrics::CellBootstrap* boot = nullptr;
        if (in.bootstrap)
            if (auto it = in.bootstrap->find(cell); it != in.bootstrap->end())
                boot = &it->second;
        for (std::size_t i = 0; i < buckets.size(); ++i) {
            const auto& b = buckets[i];
            KeyframeBucket kb{b.k, b.height, b.se, b.n, b.carried};
            if (boot && i < boot->buckets.size() && boot->buckets[i].k == b.k)
                kb.se = boot->buckets[i].se;
            s.buckets.push_back(kb);
        }
        auto& frame = bundle.years[cell.year];
        frame.year = cell.year;
        frame.slices.push_back(std::move(s));
    }

    const bool by_rank = bundle.metadata.benchmark_mode == BenchmarkMode::ranking;
    for (auto& [_, frame] : bundle.years)
        std::ranges::sort(frame.slices, [by_rank](const Slice& a, const Slice& b) {
            if (by_rank) {
                if (a.rank != b.rank)
                    return a.rank < b.rank;
            } else if (a.benchmark != b.benchmark) {
                return a.benchmark < b.benchmark;
            }
            return a.state < b.state;
        });
    return bundle;
}

nlohmann::json to_json(const KeyframeBundle& bundle, Precision precision) {
    const bool full = precision == Precision::full;
    auto dollars = [full](double v) { return full ? v : round_sig6(v); };
    const auto& m = bundle.metadata;

    nlohmann::json meta;
    meta["variant"] = std::string(to_string(m.variant));
    meta["filter"] = m.filter;
    meta["scheme"] = std::string(segment::to_string(m.scheme));
    meta["bucket_points"] = segment::bucket_points(m.scheme);
    meta["benchmark_mode"] = std::string(to_string(m.benchmark_mode));
    meta["reference_year"] = m.reference_year;
    meta["generation_seed"] = m.generation_seed ? nlohmann::json(*m.generation_seed) : nlohmann::json(nullptr);
    meta["age_mode"] = m.age_mode;
    meta["age_seed"] = m.age_seed ? nlohmann::json(*m.age_seed) : nlohmann::json(nullptr);
    meta["bootstrap"] = m.bootstrap_replicates
                            ? nlohmann::json{{"replicates", *m.bootstrap_replicates},
                                             {"seed", m.bootstrap_seed.value_or(0)}}
                            : nlohmann::json(nullptr);
    meta["deflators"] = {{"rpp_backcast", m.rpp_backcast}, {"rpp_observed_from", m.rpp_observed_from}};
    meta["reference_median"] = nlohmann::json::object();
    for (const auto& [y, v] : m.reference_median)
        meta["reference_median"][std::to_string(y)] = dollars(v);

    nlohmann::json years = nlohmann::json::object();
    for (const auto& [year, frame] : bundle.years) {
        nlohmann::json slices = nlohmann::json::array();
        for (const auto& s : frame.slices) {
            nlohmann::json buckets = nlohmann::json::array();
            for (const auto& b : s.buckets) {
                nlohmann::json jb{{"k", b.k}, {"n", b.n}, {"carried", b.carried}};
                jb["height"] = b.height ? nlohmann::json(dollars(*b.height)) : nlohmann::json(nullptr);
                if (b.se)
                    jb["se"] = dollars(*b.se);
                buckets.push_back(std::move(jb));
            }
            nlohmann::json js{{"state", std::string(s.state.code())},
                              {"fips", s.state.fips()},
                              {"benchmark", dollars(s.benchmark)},
                              {"rank", s.rank},
                              {"thickness", s.thickness},
                              {"n_households", s.n_households},
                              {"age_standardized", s.age_standardized},
                              {"buckets", std::move(buckets)}};
            if (!s.rpp_source.empty())
                js["rpp_source"] = s.rpp_source;
            slices.push_back(std::move(js));
        }
        years[std::to_string(year)] = {{"year", year}, {"slices", std::move(slices)}};
    }
    return {{"schema_version", bundle.schema_version}, {"metadata", std::move(meta)}, {"years", std::move(years)}};
}

std::string serialize(const KeyframeBundle& bundle, Precision precision) {
    return to_json(bundle, precision).dump(1) + "\n";
}

std::vector<std::string> validate_bundle(const nlohmann::json& doc) {
    std::vector<std::string> errs;
    auto err = [&](std::string msg) { errs.push_back(std::move(msg)); };

    if (!doc.is_object())
        return {"document is not an object"};
    if (!doc.contains("schema_version") || !doc["schema_version"].is_string())
        err("schema_version missing");
    else if (auto v = doc["schema_version"].get<std::string>(); v.substr(0, v.find('.')) != "1")
        err("unsupported schema_version " + v);

    std::optional<segment::BucketScheme> scheme;
    BenchmarkMode mode = BenchmarkMode::position;
    if (!doc.contains("metadata") || !doc["metadata"].is_object()) {
        err("metadata missing");
    } else {
        const auto& m = doc["metadata"];
        if (!m.contains("variant") || !m["variant"].is_string() || !parse_variant(m["variant"].get<std::string>()))
            err("metadata.variant invalid");
        if (!m.contains("filter") || !m["filter"].is_string() ||
            !SubpopulationFilter::parse(m["filter"].get<std::string>()))
            err("metadata.filter invalid");
        if (m.contains("scheme") && m["scheme"].is_string())
            scheme = segment::parse_scheme(m["scheme"].get<std::string>());
        if (!scheme)
            err("metadata.scheme invalid");
        auto bm = m.contains("benchmark_mode") && m["benchmark_mode"].is_string()
                      ? parse_benchmark_mode(m["benchmark_mode"].get<std::string>())
                      : std::nullopt;
        if (!bm)
            err("metadata.benchmark_mode invalid");
        else
            mode = *bm;
        if (!m.contains("reference_year") || !m["reference_year"].is_number_integer())
            err("metadata.reference_year invalid");
    }

    if (!doc.contains("years") || !doc["years"].is_object() || doc["years"].empty()) {
        err("years missing or empty");
        return errs;
    }
    std::optional<std::set<std::string>> state_set;
    for (const auto& [key, frame] : doc["years"].items()) {
        const std::string where = "year " + key;
        if (!frame.is_object() || !frame.contains("year") || !frame["year"].is_number_integer() ||
            std::to_string(frame["year"].get<int>()) != key) {
            err(where + ": year field missing or inconsistent");
            continue;
        }
        if (!frame.contains("slices") || !frame["slices"].is_array() || frame["slices"].empty()) {
            err(where + ": slices missing");
            continue;
        }
        std::set<std::string> states;
        double min_thickness = std::numeric_limits<double>::infinity();
        std::optional<std::pair<double, int>> prev_order;
        for (const auto& s : frame["slices"]) {
            bool ok = s.is_object() && s.contains("state") && s["state"].is_string() && s.contains("fips") &&
                      s["fips"].is_number_integer() && s.contains("benchmark") && s["benchmark"].is_number() &&
                      s.contains("rank") && s["rank"].is_number_integer() && s.contains("thickness") &&
                      s["thickness"].is_number() && s.contains("n_households") &&
                      s["n_households"].is_number_unsigned() && s.contains("age_standardized") &&
                      s["age_standardized"].is_boolean() && s.contains("buckets") && s["buckets"].is_array();
            if (!ok) {
                err(where + ": slice missing required fields");
                continue;
            }
            auto code = s["state"].get<std::string>();
            auto id = StateId::from_code(code);
            if (!id || id->fips() != s["fips"].get<int>())
                err(where + ": unknown or inconsistent state " + code);
            if (!states.insert(code).second)
                err(where + ": duplicate state " + code);
            if (s["rank"].get<int>() < 1)
                err(where + ": rank < 1 for " + code);
            double t = s["thickness"].get<double>();
            if (!(t >= 1.0))
                err(where + ": thickness < 1 for " + code);
            min_thickness = std::min(min_thickness, t);
            if (s.contains("rpp_source") && s["rpp_source"] != "observed" && s["rpp_source"] != "backcast")
                err(where + ": bad rpp_source for " + code);

            double order_key = mode == BenchmarkMode::position ? s["benchmark"].get<double>()
                                                               : static_cast<double>(s["rank"].get<int>());
            std::pair<double, int> order{order_key, s["fips"].get<int>()};
            if (prev_order && order_key < prev_order->first)
                err(where + ": slices not sorted by " + std::string(to_string(mode)));
            prev_order = order;

            std::optional<int> prev_k;
            std::optional<double> prev_h;
            std::vector<int> ks;
            for (const auto& b : s["buckets"]) {
                if (!b.is_object() || !b.contains("k") || !b["k"].is_number_integer() || !b.contains("height") ||
                    !(b["height"].is_number() || b["height"].is_null()) || !b.contains("carried") ||
                    !b["carried"].is_boolean() || !b.contains("n") || !b["n"].is_number_unsigned()) {
                    err(where + ": malformed bucket for " + code);
                    continue;
                }
                int k = b["k"].get<int>();
                ks.push_back(k);
                if (prev_k && k <= *prev_k)
                    err(where + ": bucket k not increasing for " + code);
                prev_k = k;
                if (b["height"].is_number()) {
                    double h = b["height"].get<double>();
                    if (prev_h && h < *prev_h)
                        err(where + ": heights decrease for " + code);
                    prev_h = h;
                }
                if (b.contains("se") && !(b["se"].is_number() && b["se"].get<double>() >= 0))
                    err(where + ": negative or non-numeric se for " + code);
            }
            if (scheme && ks != segment::bucket_points(*scheme))
                err(where + ": bucket points do not match scheme for " + code);
        }
        if (min_thickness != 1.0)
            err(where + ": minimum thickness is not 1");
        if (!state_set)
            state_set = states;
        else if (*state_set != states)
            err(where + ": state set differs from other years");
    }
    return errs;
}

} // namespace distviz::layout
