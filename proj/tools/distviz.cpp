// distviz: household income distribution keyframes from survey microdata.
//
//   distviz synth      --out DIR [--seed N] [--states N] [--years A:B] [--households N]
//   distviz backcast   --data DIR --out DIR [--no-backcast] [--truth truth.json]
//   distviz pipeline   --data DIR --out DIR [--variant V]... [--filter F]... [--jobs N]
//   distviz gini       --input FILE [--value-column C] [--group-by a,b] [--method naive|sorted]
//   distviz serve-data --dir DIR [--port 8000]
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric failure.

#include "distviz/pipeline.hpp"
#include "distviz/serve.hpp"
#include "distviz/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

namespace fs = std::filesystem;
using namespace distviz;

constexpr int exit_usage = 2;
constexpr int exit_data = 3;
constexpr int exit_numeric = 4;

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

void echo(std::string_view command, const nlohmann::json& config, std::ostream& out = std::cout) {
    out << nlohmann::json{{"command", command}, {"config", config}}.dump(2) << '\n';
}

int report(std::string_view command, std::string_view kind, const std::exception& e, int code) {
    std::cerr << nlohmann::json{{"command", command}, {"error", kind}, {"message", e.what()}, {"exit_code", code}}.dump()
              << '\n';
    return code;
}

std::string default_data_dir() {
    const char* env = std::getenv("DISTVIZ_DATA_DIR");
    return env ? env : "";
}

YearRange years_or_throw(const std::string& text) {
    try {
        return parse_year_range(text);
    } catch (const DataError& e) {
        throw UsageError(std::string("--years: ") + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adjusted household income distribution keyframes"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic dataset");
    std::uint64_t synth_seed = 1;
    int synth_states = 5;
    std::string synth_years = "1976:2019";
    int synth_households = 600;
    double synth_rpp_noise = 0.0;
    std::string synth_config_path;
    std::string synth_out;
    synth->add_option("--seed", synth_seed, "Random seed");
    synth->add_option("--states", synth_states, "Number of states (CA, DC, NY, TX, AL first)");
    synth->add_option("--years", synth_years, "Year range A:B");
    synth->add_option("--households", synth_households, "Households per state-year (scaled per state)");
    synth->add_option("--rpp-noise", synth_rpp_noise, "SD of the RPP model noise");
    synth->add_option("--config", synth_config_path, "Synthetic config JSON (overrides the other options)");
    synth->add_option("--out", synth_out, "Output directory")->required();

    // backcast
    auto* backcast = app.add_subcommand("backcast", "Fit the RPP backcast model and write deflators");
    pipeline::BackcastConfig bc;
    std::string bc_data = default_data_dir(), bc_extract, bc_out, bc_years = "1976:2019", bc_truth;
    bool bc_no_backcast = false;
    backcast->add_option("--data", bc_data, "Data directory in the default extract layout (env DISTVIZ_DATA_DIR)");
    backcast->add_option("--extract", bc_extract, "Extract spec JSON");
    backcast->add_option("--out", bc_out, "Output directory")->required();
    backcast->add_option("--years", bc_years, "Year range A:B");
    backcast->add_option("--reference-year", bc.reference_year, "CPI / benchmark reference year");
    backcast->add_flag("--no-backcast", bc_no_backcast, "Keep only observed RPP years");
    backcast->add_option("--truth", bc_truth, "Generator truth.json to report recovery errors");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Build keyframe bundles");
    pipeline::RunConfig rc;
    std::string p_data = default_data_dir(), p_extract, p_deflators, p_out, p_years = "1976:2019";
    std::vector<std::string> p_variants, p_filters, p_boot_states;
    std::vector<int> p_boot_years;
    std::string p_scheme = "decile", p_mode = "position", p_age_mode = "reweight";
    std::optional<std::uint64_t> p_age_seed, p_boot_seed;
    bool p_no_backcast = false;
    pipe->add_option("--data", p_data, "Data directory in the default extract layout (env DISTVIZ_DATA_DIR)");
    pipe->add_option("--extract", p_extract, "Extract spec JSON");
    pipe->add_option("--deflators", p_deflators, "Deflator document from `backcast`");
    pipe->add_option("--out", p_out, "Output directory")->required();
    pipe->add_option("--years", p_years, "Year range A:B");
    pipe->add_option("--reference-year", rc.reference_year, "Benchmark reference year");
    pipe->add_option("--variant", p_variants, "RHH, ERHH, RHHRPP, ERHHRPP (repeatable; default all)");
    pipe->add_option("--filter", p_filters, "all, male, female, black, non-black, hispanic, non-hispanic, "
                                            "edu-le12, edu-gt12, or a '+'-joined combination (default: the nine)");
    pipe->add_option("--scheme", p_scheme, "decile or percentile");
    pipe->add_option("--benchmark-mode", p_mode, "position or ranking");
    pipe->add_option("--age-mode", p_age_mode, "reweight, resample or none");
    pipe->add_option("--age-seed", p_age_seed, "Seed for --age-mode resample");
    pipe->add_option("--bootstrap-seed", p_boot_seed, "Enables bootstrap standard errors");
    pipe->add_option("--bootstrap-replicates", rc.bootstrap_replicates, "Bootstrap replicates B");
    pipe->add_option("--bootstrap-states", p_boot_states, "Restrict bootstrap to these states (codes)");
    pipe->add_option("--bootstrap-years", p_boot_years, "Restrict bootstrap to these years");
    pipe->add_option("--jobs", rc.jobs, "Thread cap (results do not depend on it)");
    pipe->add_flag("--no-backcast", p_no_backcast, "RPP variants use observed years only");
    pipe->add_flag("--full-precision", rc.full_precision_sidecar, "Also write full-precision sidecar bundles");

    // gini
    auto* gini = app.add_subcommand("gini", "Gini coefficient per group of a CSV table");
    pipeline::GiniRequest gr;
    std::string g_input, g_output, g_method = "sorted", g_group = "state,year";
    gini->add_option("--input", g_input, "CSV file")->required();
    gini->add_option("--value-column", gr.value_column, "Income column");
    gini->add_option("--weight-column", gr.weight_column, "Weight column (optional)");
    gini->add_option("--group-by", g_group, "Comma-separated grouping columns (empty for one group)");
    gini->add_option("--method", g_method, "naive or sorted");
    gini->add_flag("--allow-negative", gr.allow_negative, "Accept negative incomes");
    gini->add_option("--output", g_output, "Write the table here instead of stdout");

    // serve-data
    auto* serve = app.add_subcommand("serve-data", "Serve bundle files over HTTP for the explorer (development)");
    std::string s_dir, s_host = "127.0.0.1";
    int s_port = 8000;
    serve->add_option("--dir", s_dir, "Directory to serve")->required();
    serve->add_option("--host", s_host, "Bind address");
    serve->add_option("--port", s_port, "Port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    std::string command = app.get_subcommands().front()->get_name();
    try {
        if (synth->parsed()) {
            synth::SynthConfig cfg;
            if (!synth_config_path.empty()) {
                std::ifstream in(synth_config_path);
                if (!in)
                    throw DataError("cannot open " + synth_config_path);
                nlohmann::json j;
                in >> j;
                cfg = synth::SynthConfig::from_json(j);
            } else {
                if (synth_households < 1)
                    throw UsageError("--households must be >= 1");
                if (synth_states < 1 || synth_states > 51)
                    throw UsageError("--states must be in 1..51");
                cfg = synth::SynthConfig::demo(synth_states, synth_seed, years_or_throw(synth_years));
                cfg.households_per_state_year = synth_households;
                cfg.rpp_noise = synth_rpp_noise;
            }
            echo(command, cfg.to_json());
            auto data = synth::generate(cfg);
            synth::write(data, cfg, synth_out);
            return 0;
        }
        if (backcast->parsed()) {
            bc.data_dir = bc_data;
            bc.extract = bc_extract;
            bc.out_dir = bc_out;
            bc.years = years_or_throw(bc_years);
            bc.backcast = !bc_no_backcast;
            bc.truth = bc_truth;
            if (bc.extract.empty() && bc.data_dir.empty())
                throw UsageError("--data or --extract is required");
            echo(command, bc.to_json());
            auto result = pipeline::run_backcast(bc);
            if (result.deflators.model) {
                const auto& d = result.deflators.model->diagnostics;
                fmt::print("R^2 {:.6f}  residual SD {:.6g}  n {}\n", d.r_squared, d.residual_sd, d.n);
            }
            if (result.recovery)
                fmt::print("recovery error: coefficients {:.3g}  backcast RPP {:.3g}\n",
                           result.recovery->coefficients, result.recovery->backcast_rpp);
            return 0;
        }
        if (pipe->parsed()) {
            rc.data_dir = p_data;
            rc.extract = p_extract;
            rc.deflators = p_deflators;
            rc.out_dir = p_out;
            rc.years = years_or_throw(p_years);
            rc.backcast = !p_no_backcast;
            if (!p_variants.empty()) {
                rc.variants.clear();
                for (const auto& v : p_variants) {
                    auto parsed = parse_variant(v);
                    if (!parsed)
                        throw UsageError("unknown variant '" + v + "'");
                    rc.variants.push_back(*parsed);
                }
            }
            if (!p_filters.empty()) {
                rc.filters.clear();
                for (const auto& f : p_filters) {
                    auto parsed = SubpopulationFilter::parse(f);
                    if (!parsed)
                        throw UsageError("unknown filter '" + f + "'");
                    rc.filters.push_back(*parsed);
                }
            }
            auto scheme = segment::parse_scheme(p_scheme);
            auto mode = layout::parse_benchmark_mode(p_mode);
            auto age_mode = agestd::parse_age_mode(p_age_mode);
            if (!scheme || !mode || !age_mode)
                throw UsageError("bad --scheme, --benchmark-mode or --age-mode");
            rc.scheme = *scheme;
            rc.benchmark_mode = *mode;
            rc.age_mode = *age_mode;
            rc.age_seed = p_age_seed;
            rc.bootstrap_seed = p_boot_seed;
            for (const auto& code : p_boot_states) {
                auto s = StateId::from_code(code);
                if (!s)
                    throw UsageError("unknown state '" + code + "'");
                rc.bootstrap_states.push_back(*s);
            }
            rc.bootstrap_years = p_boot_years;
            rc.check();
            echo(command, rc.to_json());
            auto result = pipeline::run_pipeline(rc);
            fmt::print("{} bundle(s), {} record(s) accepted, {} rejected, {} state-year(s) not age-standardized\n",
                       result.bundles.size(), result.rejections.accepted, result.rejections.total_rejected(),
                       result.unstandardized_cells);
            return 0;
        }
        if (gini->parsed()) {
            auto method = g_method == "naive" ? metrics::GiniMethod::naive : metrics::GiniMethod::sorted;
            if (g_method != "naive" && g_method != "sorted")
                throw UsageError("--method must be naive or sorted");
            gr.method = method;
            gr.group_by.clear();
            std::stringstream ss(g_group);
            for (std::string col; std::getline(ss, col, ',');)
                if (!col.empty())
                    gr.group_by.push_back(col);
            // stdout carries the table, so the config echo goes to stderr.
            echo(command,
                 {{"input", g_input},
                  {"output", g_output},
                  {"value_column", gr.value_column},
                  {"weight_column", gr.weight_column},
                  {"group_by", gr.group_by},
                  {"method", g_method},
                  {"allow_negative", gr.allow_negative},
                  {"delimiter", std::string(1, gr.delimiter)}},
                 std::cerr);
            std::ifstream in(g_input, std::ios::binary);
            if (!in)
                throw DataError("cannot open " + g_input);
            std::ostringstream buf;
            buf << in.rdbuf();
            auto table = pipeline::format_gini_table(pipeline::gini_table(buf.str(), gr), gr);
            if (g_output.empty()) {
                std::cout << table;
            } else {
                std::ofstream out(g_output, std::ios::binary);
                if (!out)
                    throw DataError("cannot write " + g_output);
                out << table;
            }
            return 0;
        }
        if (serve->parsed()) {
            echo(command, {{"dir", s_dir}, {"host", s_host}, {"port", s_port}});
            fmt::print("serving {} at http://{}:{}/\n", s_dir, s_host, s_port);
            std::fflush(stdout);
            if (!serve::serve_directory(s_dir, s_host, s_port))
                throw DataError(fmt::format("cannot bind {}:{}", s_host, s_port));
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        return report(command, "usage", e, exit_usage);
    } catch (const NumericError& e) {
        return report(command, "numeric", e, exit_numeric);
    } catch (const DataError& e) {
        return report(command, "data", e, exit_data);
    } catch (const nlohmann::json::exception& e) {
        return report(command, "data", e, exit_data);
    } catch (const std::exception& e) {
        return report(command, "data", e, exit_data);
    }
    return exit_usage;
}
