#include "distviz/pipeline.hpp"

#include "distviz/csv.hpp"
#include "distviz/kernels.hpp"
#include "distviz/synth.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace distviz::pipeline {

namespace {

namespace fs = std::filesystem;
using segment::WeightedValue;

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + p.string());
    out << text;
    if (!out)
        throw DataError("write failed for " + p.string());
}

ingest::ExtractSpec resolve_spec(const fs::path& extract, const fs::path& data_dir, YearRange years) {
    auto spec = extract.empty() ? ingest::ExtractSpec::defaults(data_dir) : ingest::ExtractSpec::from_file(extract);
    spec.years = years;
    return spec;
}

std::string years_text(YearRange y) { return fmt::format("{}:{}", y.first, y.last); }

// State-year frame after age standardization, shared by all variants/filters.
struct StdFrame {
    agestd::Frame frame;
    bool standardized = true;
};

} // namespace

std::string bundle_file_name(Variant variant, const SubpopulationFilter& filter) {
    return fmt::format("{}__{}.json", to_string(variant), filter.name());
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["extract"] = extract.string();
    j["data_dir"] = data_dir.string();
    j["deflators"] = deflators.string();
    j["out_dir"] = out_dir.string();
    j["years"] = years_text(years);
    j["reference_year"] = reference_year;
    j["backcast"] = backcast;
    j["variants"] = nlohmann::json::array();
    for (auto v : variants)
        j["variants"].push_back(std::string(to_string(v)));
    j["filters"] = nlohmann::json::array();
    for (const auto& f : filters)
        j["filters"].push_back(f.name());
    j["scheme"] = std::string(segment::to_string(scheme));
    j["benchmark_mode"] = std::string(layout::to_string(benchmark_mode));
    j["age_mode"] = std::string(agestd::to_string(age_mode));
    j["age_seed"] = age_seed ? nlohmann::json(*age_seed) : nlohmann::json(nullptr);
    j["bootstrap"] = {{"replicates", bootstrap_replicates},
                      {"seed", bootstrap_seed ? nlohmann::json(*bootstrap_seed) : nlohmann::json(nullptr)}};
    j["bootstrap"]["states"] = nlohmann::json::array();
    for (auto s : bootstrap_states)
        j["bootstrap"]["states"].push_back(std::string(s.code()));
    j["bootstrap"]["years"] = bootstrap_years;
    j["jobs"] = jobs;
    j["full_precision_sidecar"] = full_precision_sidecar;
    return j;
}

void RunConfig::check() const {
    if (out_dir.empty())
        throw std::invalid_argument("an output directory is required");
    if (extract.empty() && data_dir.empty())
        throw std::invalid_argument("either an extract spec or a data directory is required");
    if (variants.empty() || filters.empty())
        throw std::invalid_argument("at least one variant and one filter are required");
    if (age_mode == agestd::AgeMode::resample && !age_seed)
        throw std::invalid_argument("--age-mode resample requires --age-seed");
    if (bootstrap_seed && bootstrap_replicates < 2)
        throw std::invalid_argument("bootstrap needs at least 2 replicates");
    if (!years.contains(reference_year))
        throw std::invalid_argument(fmt::format("reference year {} outside {}", reference_year, years_text(years)));
}

PipelineResult run_pipeline(const RunConfig& config) {
    config.check();
    kernels::set_threads(config.jobs);
    const auto& out = config.out_dir;
    fs::create_directories(out / "bundles");
    write_text(out / "run_config.json", config.to_json().dump(2) + "\n");

    auto spec = resolve_spec(config.extract, config.data_dir, config.years);
    auto load = ingest::load_microdata(spec);
    PipelineResult result;
    result.rejections = load.report;
    write_text(out / "rejection_report.json", load.report.to_json().dump(2) + "\n");
    const auto& records = load.records;
    if (records.empty())
        throw DataError("no valid household records");

    deflate::DeflatorSet deflators;
    if (!config.deflators.empty()) {
        std::ifstream in(config.deflators);
        if (!in)
            throw DataError("cannot open " + config.deflators.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(config.deflators.string() + ": " + e.what());
        }
        deflators = deflate::DeflatorSet::from_json(j);
    } else {
        auto prices = ingest::load_price_tables(spec);
        // The RPP model is only fitted when some requested variant divides by RPP.
        const bool any_rpp = std::any_of(config.variants.begin(), config.variants.end(),
                                         [](Variant v) { return normalizers(v).rpp; });
        deflators = deflate::build_deflators(prices, config.years, config.reference_year,
                                             config.backcast && any_rpp);
        write_text(out / "deflators.json", deflators.to_json().dump(1) + "\n");
    }

    // Grid: every state present must have households in every year.
    std::set<StateId> states;
    std::set<StateYear> present;
    for (const auto& r : records) {
        states.insert(r.state);
        present.insert({r.state, r.year});
    }
    std::vector<std::string> holes;
    for (StateId s : states)
        for (int y = config.years.first; y <= config.years.last; ++y)
            if (!present.contains({s, y}))
                holes.push_back(fmt::format("{} {}", s.code(), y));
    if (!holes.empty())
        throw DataError(fmt::format("no households for: {}", fmt::join(holes, ", ")));

    // Age standardization of each full state-year population.
    auto raw_frames = agestd::frames_from_records(records);
    auto target = agestd::build_target(raw_frames);
    write_text(out / "age_target.json", target.to_json().dump(2) + "\n");

    std::vector<StdFrame> frames(raw_frames.size());
    {
        const auto n = static_cast<std::ptrdiff_t>(raw_frames.size());
        std::vector<std::exception_ptr> errors(raw_frames.size());
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            try {
                frames[i].frame = agestd::standardize(raw_frames[i], target, config.age_mode, config.age_seed);
            } catch (const DataError&) {
                frames[i].frame = raw_frames[i];
                frames[i].standardized = false;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (const auto& e : errors)
            if (e)
                std::rethrow_exception(e);
    }
    std::vector<std::string> unstandardized;
    for (const auto& f : frames)
        if (!f.standardized)
            unstandardized.push_back(fmt::format("{} {}", f.frame.cell.state.code(), f.frame.cell.year));
    result.unstandardized_cells = unstandardized.size();

    nlohmann::json manifest{{"schema_version", layout::bundle_schema_version},
                            {"bundles", nlohmann::json::array()}};
    nlohmann::json log{{"records", records.size()},
                       {"unstandardized_cells", unstandardized},
                       {"bundles", nlohmann::json::array()}};

    const std::set<StateId> boot_states(config.bootstrap_states.begin(), config.bootstrap_states.end());
    const std::set<int> boot_years(config.bootstrap_years.begin(), config.bootstrap_years.end());

    for (Variant variant : config.variants) {
        const bool uses_rpp = normalizers(variant).rpp;
        YearRange vyears = config.years;
        if (uses_rpp)
            vyears.first = std::max(vyears.first, deflators.rpp_first_year);
        if (vyears.first > vyears.last || !vyears.contains(config.reference_year))
            throw DataError(fmt::format("{}: deflators do not cover the reference year {}", to_string(variant),
                                        config.reference_year));
        if (uses_rpp) {
            std::vector<std::string> gaps;
            for (StateId s : states)
                for (int y = vyears.first; y <= vyears.last; ++y)
                    if (!deflators.has_rpp({s, y}))
                        gaps.push_back(fmt::format("{} {}", s.code(), y));
            if (!gaps.empty())
                throw DataError(fmt::format("RPP missing for: {}", fmt::join(gaps, ", ")));
        }

        // Adjusted income per record (NaN outside the variant's years).
        std::vector<double> adjusted(records.size(), std::numeric_limits<double>::quiet_NaN());
        {
            std::vector<HouseholdRecord> eligible;
            std::vector<std::size_t> index;
            for (std::size_t i = 0; i < records.size(); ++i)
                if (vyears.contains(records[i].year)) {
                    eligible.push_back(records[i]);
                    index.push_back(i);
                }
            auto values = kernels::adjust_incomes_omp(eligible, deflators, variant);
            for (std::size_t i = 0; i < index.size(); ++i)
                adjusted[index[i]] = values[i];
        }

        std::vector<const StdFrame*> vframes;
        for (const auto& f : frames)
            if (vyears.contains(f.frame.cell.year))
                vframes.push_back(&f);

        // Pooled national median per year over the unfiltered population.
        std::map<int, double> national;
        {
            std::map<int, std::vector<WeightedValue>> pooled;
            for (const auto* f : vframes)
                for (const auto& e : f->frame.entries)
                    pooled[f->frame.cell.year].push_back({adjusted[e.source], e.weight});
            for (const auto& [y, entries] : pooled)
                national[y] = segment::weighted_median(entries);
        }

        for (const auto& filter : config.filters) {
            std::vector<kernels::CellEntries> cells(vframes.size());
            std::vector<double> totals(vframes.size(), 0.0);
            for (std::size_t c = 0; c < vframes.size(); ++c) {
                for (const auto& e : vframes[c]->frame.entries) {
                    if (!filter.matches(e))
                        continue;
                    cells[c].push_back({adjusted[e.source], e.weight});
                    totals[c] += e.weight;
                }
            }

            // States lacking households (or weight) in any year are left out of this bundle.
            std::set<StateId> excluded;
            for (std::size_t c = 0; c < vframes.size(); ++c)
                if (!(totals[c] > 0))
                    excluded.insert(vframes[c]->frame.cell.state);
            std::vector<std::size_t> keep;
            for (std::size_t c = 0; c < vframes.size(); ++c)
                if (!excluded.contains(vframes[c]->frame.cell.state))
                    keep.push_back(c);
            if (keep.empty())
                throw DataError(fmt::format("{} / {}: no households match the filter", to_string(variant),
                                            filter.name()));

            std::vector<kernels::CellEntries> kept_cells;
            kept_cells.reserve(keep.size());
            for (auto c : keep)
                kept_cells.push_back(std::move(cells[c]));
            auto summaries = kernels::summarize_cells_omp(kept_cells, config.scheme);

            layout::AssembleInputs in;
            layout::MedianTable medians;
            std::map<int, std::map<StateId, double>> year_totals;
            std::vector<double> cell_medians(keep.size());
            {
                const auto n = static_cast<std::ptrdiff_t>(keep.size());
#pragma omp parallel for schedule(dynamic)
                for (std::ptrdiff_t i = 0; i < n; ++i)
                    cell_medians[i] = segment::weighted_median(kept_cells[i]);
            }
            for (std::size_t i = 0; i < keep.size(); ++i) {
                const auto& sf = *vframes[keep[i]];
                const auto cell = sf.frame.cell;
                in.buckets[cell] = std::move(summaries[i]);
                medians[cell] = cell_medians[i];
                year_totals[cell.year][cell.state] = totals[keep[i]];
                layout::CellInfo info;
                info.n_households = kept_cells[i].size();
                info.age_standardized = sf.standardized;
                if (uses_rpp) {
                    auto src = deflators.rpp.at(cell).source;
                    info.rpp_source = src == deflate::RppSource::observed ? "observed" : "backcast";
                }
                in.cells[cell] = info;
            }
            in.positions = layout::benchmark_positions(medians, national, config.reference_year);
            for (const auto& [year, tot] : year_totals) {
                for (const auto& [s, t] : layout::thickness(tot))
                    in.thickness[{s, year}] = t;
                for (const auto& [s, r] : layout::rank_states(medians, year))
                    in.ranks[{s, year}] = r;
            }

            metrics::BootstrapReport boot;
            if (config.bootstrap_seed) {
                for (std::size_t i = 0; i < keep.size(); ++i) {
                    const auto cell = vframes[keep[i]]->frame.cell;
                    if ((!boot_states.empty() && !boot_states.contains(cell.state)) ||
                        (!boot_years.empty() && !boot_years.contains(cell.year)))
                        continue;
                    boot[cell] = metrics::bootstrap_se(kept_cells[i], config.scheme, config.bootstrap_replicates,
                                                       *config.bootstrap_seed, cell);
                }
                in.bootstrap = &boot;
            }

            layout::BundleMetadata meta;
            meta.variant = variant;
            meta.filter = filter.name();
            meta.scheme = config.scheme;
            meta.benchmark_mode = config.benchmark_mode;
            meta.reference_year = config.reference_year;
            meta.age_mode = std::string(agestd::to_string(config.age_mode));
            meta.age_seed = config.age_mode == agestd::AgeMode::resample ? config.age_seed : std::nullopt;
            if (config.bootstrap_seed) {
                meta.bootstrap_replicates = config.bootstrap_replicates;
                meta.bootstrap_seed = config.bootstrap_seed;
            }
            meta.rpp_backcast = deflators.model.has_value();
            meta.rpp_observed_from = deflators.rpp_observed_from;
            for (const auto& [y, v] : national)
                meta.reference_median[y] = v;

            auto bundle = layout::assemble(in, std::move(meta));
            auto text = layout::serialize(bundle);
            auto errors = layout::validate_bundle(nlohmann::json::parse(text));
            if (!errors.empty())
                throw DataError(fmt::format("bundle {} / {} failed validation: {}", to_string(variant),
                                            filter.name(), fmt::join(errors, "; ")));

            auto name = bundle_file_name(variant, filter);
            auto path = out / "bundles" / name;
            write_text(path, text);
            if (config.full_precision_sidecar) {
                auto sidecar = name.substr(0, name.size() - 5) + ".full.json";
                write_text(out / "bundles" / sidecar, layout::serialize(bundle, layout::Precision::full));
            }
            result.bundles.push_back(path);

            std::vector<std::string> excluded_codes;
            for (auto s : excluded)
                excluded_codes.emplace_back(s.code());
            manifest["bundles"].push_back({{"variant", std::string(to_string(variant))},
                                           {"filter", filter.name()},
                                           {"file", "bundles/" + name},
                                           {"years", {vyears.first, vyears.last}},
                                           {"excluded_states", excluded_codes}});
            log["bundles"].push_back({{"file", "bundles/" + name}, {"excluded_states", excluded_codes}});
        }
    }
    write_text(out / "manifest.json", manifest.dump(2) + "\n");
    write_text(out / "pipeline_log.json", log.dump(2) + "\n");
    return result;
}

nlohmann::json BackcastConfig::to_json() const {
    return {{"extract", extract.string()},     {"data_dir", data_dir.string()},
            {"out_dir", out_dir.string()},     {"years", years_text(years)},
            {"reference_year", reference_year}, {"backcast", backcast},
            {"truth", truth.string()}};
}

RecoveryError recovery_error(const deflate::DeflatorSet& d, const nlohmann::json& truth_json) {
    if (!d.model)
        throw DataError("deflators carry no backcast model");
    auto truth = synth::SynthTruth::from_json(truth_json);
    const auto& m = *d.model;
    auto ref_fe = truth.fe.find(m.reference);
    if (ref_fe == truth.fe.end())
        throw DataError("truth has no fixed effect for the reference state");

    RecoveryError err;
    auto track = [](double& acc, double a, double b) { acc = std::max(acc, std::fabs(a - b)); };
    track(err.coefficients, m.alpha, truth.model.alpha + ref_fe->second);
    track(err.coefficients, m.beta_rent, truth.model.beta_rent);
    track(err.coefficients, m.beta_lead_rent, truth.model.beta_lead_rent);
    track(err.coefficients, m.beta_lead_rpp, truth.model.beta_lead_rpp);
    for (const auto& [s, fe] : m.fe) {
        auto t = truth.fe.find(s);
        if (t == truth.fe.end())
            throw DataError(fmt::format("truth has no fixed effect for {}", s.code()));
        track(err.coefficients, fe, t->second - ref_fe->second);
    }
    for (const auto& [cell, c] : d.rpp) {
        if (c.source != deflate::RppSource::backcast)
            continue;
        auto t = truth.rpp.find(cell);
        if (t == truth.rpp.end())
            throw DataError(fmt::format("truth has no RPP for {} {}", cell.state.code(), cell.year));
        track(err.backcast_rpp, c.value, t->second);
    }
    return err;
}

BackcastResult run_backcast(const BackcastConfig& config) {
    if (config.out_dir.empty())
        throw std::invalid_argument("an output directory is required");
    fs::create_directories(config.out_dir);
    write_text(config.out_dir / "backcast_config.json", config.to_json().dump(2) + "\n");

    auto spec = resolve_spec(config.extract, config.data_dir, config.years);
    for (const auto& p : {spec.cpi, spec.rpp, spec.rent})
        if (!fs::exists(p))
            throw DataError("missing input file " + p.string());
    auto prices = ingest::load_price_tables(spec);

    BackcastResult result;
    result.deflators = deflate::build_deflators(prices, config.years, config.reference_year, config.backcast);
    const auto& d = result.deflators;
    write_text(config.out_dir / "deflators.json", d.to_json().dump(1) + "\n");

    nlohmann::json report{{"rpp_observed_from", d.rpp_observed_from},
                          {"rpp_first_year", d.rpp_first_year},
                          {"backcast", d.model.has_value()}};
    std::string csv = "state,fixed_effect\n";
    if (d.model) {
        report["model"] = d.model->to_json();
        std::vector<std::pair<double, StateId>> fe;
        for (const auto& [s, v] : d.model->fe)
            fe.emplace_back(v, s);
        std::ranges::sort(fe, std::greater<>{});
        for (const auto& [v, s] : fe)
            csv += fmt::format("{},{:.17g}\n", s.code(), v);
    }
    if (!config.truth.empty()) {
        std::ifstream in(config.truth);
        if (!in)
            throw DataError("cannot open " + config.truth.string());
        nlohmann::json truth;
        try {
            in >> truth;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(config.truth.string() + ": " + e.what());
        }
        result.recovery = recovery_error(d, truth);
        report["recovery_error"] = {{"coefficients", result.recovery->coefficients},
                                    {"backcast_rpp", result.recovery->backcast_rpp}};
    }
    write_text(config.out_dir / "backcast_report.json", report.dump(2) + "\n");
    write_text(config.out_dir / "backcast_report.csv", csv);
    return result;
}

std::vector<GiniRow> gini_table(std::string_view csv_text, const GiniRequest& req) {
    auto table = csv::parse(csv_text, req.delimiter, true);
    auto need = [&](const std::string& name) {
        auto idx = table.column(name);
        if (!idx)
            throw DataError("gini input has no column '" + name + "'");
        return *idx;
    };
    const auto value_idx = need(req.value_column);
    std::optional<std::size_t> weight_idx;
    if (!req.weight_column.empty())
        weight_idx = need(req.weight_column);
    std::vector<std::size_t> group_idx;
    for (const auto& g : req.group_by)
        group_idx.push_back(need(g));

    std::vector<std::vector<std::string>> order;
    std::map<std::vector<std::string>, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        auto field = [&](std::size_t idx) -> const std::string& {
            if (idx >= row.size())
                throw DataError(fmt::format("gini input line {}: short row", table.lines[i]));
            return row[idx];
        };
        std::vector<std::string> key;
        for (auto gi : group_idx)
            key.push_back(field(gi));
        const auto& vtext = field(value_idx);
        if (vtext.empty())
            continue; // e.g. a missing bucket height
        double v = 0, w = 1;
        try {
            std::size_t used = 0;
            v = std::stod(vtext, &used);
            if (used != vtext.size())
                throw std::invalid_argument("trailing");
            if (weight_idx) {
                w = std::stod(field(*weight_idx), &used);
                if (used != field(*weight_idx).size())
                    throw std::invalid_argument("trailing");
            }
        } catch (const std::logic_error&) {
            throw DataError(fmt::format("gini input line {}: unparseable number", table.lines[i]));
        }
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted)
            order.push_back(key);
        it->second.first.push_back(v);
        it->second.second.push_back(w);
    }

    std::vector<GiniRow> rows;
    for (const auto& key : order) {
        const auto& [x, w] = groups.at(key);
        auto r = metrics::gini(req.method, x, weight_idx ? std::span<const double>(w) : std::span<const double>{},
                               {.allow_negative = req.allow_negative});
        rows.push_back({key, r.n, r.g});
    }
    return rows;
}

std::string format_gini_table(const std::vector<GiniRow>& rows, const GiniRequest& req) {
    std::ostringstream out;
    csv::Row header(req.group_by.begin(), req.group_by.end());
    header.push_back("n");
    header.push_back("gini");
    csv::write_row(out, header);
    for (const auto& r : rows) {
        csv::Row row = r.group;
        row.push_back(std::to_string(r.n));
        row.push_back(fmt::format("{:.12g}", r.g));
        csv::write_row(out, row);
    }
    return out.str();
}

} // namespace distviz::pipeline
