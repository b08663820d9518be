#pragma once

#include "distviz/core.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace distviz::deflate {

/// Rebases a CPI series to `reference_year` (output[reference_year] == 1 exactly).
/// Throws DataError when the reference year is absent.
std::map<int, double> rebase_cpi(const std::map<int, double>& cpi, int reference_year = 2019);

/// Dense rent panel over `years`: observed cells pass through, gaps are filled
/// linearly between neighbouring observations, and years outside a state's
/// observed span take the nearest observation. Every state needs >= 2 observations.
std::map<StateYear, double> interpolate_rent(const std::map<StateYear, double>& sparse, YearRange years);

/// One estimation row: regressors at t and t+1 plus the response RPP_t.
struct PanelRow {
    StateId state;
    int year = 0;
    double rent = 0.0;
    double rent_lead = 0.0;
    double rpp = 0.0;
    double rpp_lead = 0.0;
};

/// Rows for every (state, t) where RPP is observed at t and t+1.
std::vector<PanelRow> build_panel(const std::map<StateYear, double>& rent_dense,
                                  const std::map<StateYear, double>& rpp_observed);

struct FitDiagnostics {
    double r_squared = 0.0;
    double residual_sd = 0.0;
    std::size_t n = 0;
    std::size_t parameters = 0;
};

/// RPP_t = alpha + b_rent r_t + b_lead_rent r_{t+1} + b_lead_rpp RPP_{t+1} + fe_s.
/// The reference state's fixed effect is 0 and absorbed into alpha.
struct BackcastModel {
    double alpha = 0.0;
    double beta_rent = 0.0;
    double beta_lead_rent = 0.0;
    double beta_lead_rpp = 0.0;
    StateId reference;
    std::map<StateId, double> fe;
    FitDiagnostics diagnostics;

    double predict(StateId state, double rent, double rent_lead, double rpp_lead) const;

    nlohmann::json to_json() const;
    static BackcastModel from_json(const nlohmann::json& j);
};

/// Least squares fit via column-pivoted Householder QR. Throws NumericError on
/// rank deficiency (naming the dependent columns) or too few rows.
BackcastModel fit_backcast(std::span<const PanelRow> panel);

enum class RppSource : std::uint8_t { observed, backcast };

struct RppCell {
    double value = 0.0;
    RppSource source = RppSource::observed;
    bool operator==(const RppCell&) const = default;
};

/// Fills every (state, year) in `years` for states that have observations,
/// walking backwards from the last year. Observed cells are kept as-is; a
/// missing cell is predicted from rent at t, t+1 and the (observed or already
/// predicted) RPP at t+1.
std::map<StateYear, RppCell> backcast_rpp(const BackcastModel& model,
                                          const std::map<StateYear, double>& rent_dense,
                                          const std::map<StateYear, double>& rpp_observed, YearRange years);

/// Square-root equivalence scale.
double effective_size(int members);

/// Read-only normalizer tables for one run.
struct DeflatorSet {
    YearRange years;
    int reference_year = 2019;
    int rpp_observed_from = 2008;
    /// First year with an RPP cell for every state (== years.first after backcasting).
    int rpp_first_year = 1976;
    std::map<int, double> cpi;
    std::map<StateYear, RppCell> rpp;
    std::map<StateYear, double> rent;
    std::optional<BackcastModel> model;

    double cpi_factor(int year) const;
    /// RPP as a multiplicative factor (percent / 100).
    double rpp_factor(StateYear cell) const;
    bool has_rpp(StateYear cell) const { return rpp.contains(cell); }

    nlohmann::json to_json() const;
    static DeflatorSet from_json(const nlohmann::json& j);
};

inline constexpr const char* deflator_schema_version = "1.0.0";

/// Rebase, interpolate, fit and backcast. With `backcast == false` the RPP
/// panel keeps only observed cells from rpp_observed_from on.
DeflatorSet build_deflators(const PriceTables& prices, YearRange years, int reference_year = 2019,
                            bool backcast = true);

/// Income divided by the normalizers the variant selects. Throws DataError
/// if a needed deflator cell is missing.
double adjust_income(const HouseholdRecord& record, const DeflatorSet& deflators, Variant variant);

} // namespace distviz::deflate
