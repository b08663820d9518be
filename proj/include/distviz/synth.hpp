#pragma once

#include "distviz/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

namespace distviz::synth {

/// Two-component normal mixture over householder age (young/old peak), plus a
/// uniform 62-95 component for retirees so every age bin is populated. The
/// weight of the old component moves linearly from `old_share_first` to
/// `old_share_last` across the year range.
struct AgeMixture {
    double young_mean = 28.0;
    double old_mean = 52.0;
    double sd = 9.0;
    double old_share_first = 0.35;
    double old_share_last = 0.55;
    double elderly_share = 0.12;
};

struct StateParams {
    StateId state;
    /// Multiplies households_per_state_year (relative population size).
    double size_factor = 1.0;
    /// Log real-income location, linear in year between the range endpoints.
    double log_loc_first = 10.8;
    double log_loc_last = 11.0;
    double log_scale_first = 0.75;
    double log_scale_last = 0.85;
    AgeMixture age;
    double black_share = 0.12;
    /// Gross monthly rent in the last year; knots grow geometrically backwards.
    double rent_last = 1000.0;
    double rent_growth = 0.03;
    /// Fixed effect in the RPP model and RPP in the last year.
    double rpp_fe = 0.0;
    double rpp_last = 100.0;
};

/// RPP_t = alpha + beta1 r_t + beta2 r_{t+1} + beta3 RPP_{t+1} + fe_s + noise
struct RppModel {
    double alpha = 14.0;
    double beta_rent = 0.004;
    double beta_lead_rent = 0.002;
    double beta_lead_rpp = 0.8;
};

struct SynthConfig {
    std::uint64_t seed = 1;
    YearRange years;
    int households_per_state_year = 600;
    std::vector<StateParams> states;

    /// Share of households drawn with negative income (business losses).
    double negative_share = 0.01;
    /// Log-income shifts by demographics and age; off makes incomes depend only on
    /// the state-year location/scale.
    bool demographic_effects = true;
    double female_share_first = 0.3;
    double female_share_last = 0.5;
    double hispanic_share_first = 0.05;
    double hispanic_share_last = 0.15;
    double college_share_first = 0.3;
    double college_share_last = 0.6;

    /// CPI (base 1999) grows at this annual rate.
    double cpi_growth = 0.035;
    /// Prices are nominal; multiplies incomes by the CPI ratio to the last year.
    bool nominal_incomes = true;

    RppModel rpp_model;
    double rpp_noise = 0.0;
    int rpp_observed_from = 2008;
    double rent_noise = 25.0;
    std::vector<int> rent_knot_years{1980, 1990};
    int rent_annual_from = 2000;

    /// Demo fixture with `n_states` states (CA, DC, NY, TX, AL first).
    static SynthConfig demo(int n_states = 5, std::uint64_t seed = 1, YearRange years = {});

    nlohmann::json to_json() const;
    static SynthConfig from_json(const nlohmann::json& j);
    /// Throws DataError on an unusable configuration.
    void check() const;
};

/// Ground truth the generator used, for closed-loop checks.
struct SynthTruth {
    RppModel model;
    std::map<StateId, double> fe;
    std::map<StateYear, double> rpp;
    std::map<StateYear, double> rent_dense;

    nlohmann::json to_json() const;
    static SynthTruth from_json(const nlohmann::json& j);
};

struct SynthData {
    std::vector<HouseholdRecord> households;
    PriceTables prices;
    SynthTruth truth;
};

/// Pure function of the config: identical configs give identical data.
SynthData generate(const SynthConfig& config);

/// Writes households.csv, cpi.csv, rpp.csv, rent.csv, truth.json and
/// synth_config.json into `dir` (created if needed). The CSVs use the
/// default extract layout so the pipeline reads them like any user extract.
void write(const SynthData& data, const SynthConfig& config, const std::filesystem::path& dir);

/// Same bytes as households.csv.
std::string households_csv(const std::vector<HouseholdRecord>& households);

} // namespace distviz::synth
