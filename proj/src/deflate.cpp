#include "distviz/deflate.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace distviz::deflate {

std::map<int, double> rebase_cpi(const std::map<int, double>& cpi, int reference_year) {
    auto ref = cpi.find(reference_year);
    if (ref == cpi.end())
        throw DataError(fmt::format("CPI has no value for reference year {}", reference_year));
    const double base = ref->second;
    if (!(base > 0))
        throw DataError("CPI reference value must be > 0");
    std::map<int, double> out;
    for (const auto& [year, value] : cpi)
        out[year] = value / base;
    return out;
}

std::map<StateYear, double> interpolate_rent(const std::map<StateYear, double>& sparse, YearRange years) {
    std::map<StateId, std::map<int, double>> by_state;
    for (const auto& [key, v] : sparse)
        by_state[key.state][key.year] = v;

    std::map<StateYear, double> dense;
    for (const auto& [state, knots] : by_state) {
        if (knots.size() < 2)
            throw DataError(fmt::format("rent for state {} has {} observation(s); need at least 2",
                                        state.code(), knots.size()));
        for (int y = years.first; y <= years.last; ++y) {
            auto hi = knots.lower_bound(y);
            double v;
            if (hi != knots.end() && hi->first == y)
                v = hi->second;
            else if (hi == knots.begin())
                v = hi->second;
            else if (hi == knots.end())
                v = std::prev(hi)->second;
            else {
                auto lo = std::prev(hi);
                double t = static_cast<double>(y - lo->first) / (hi->first - lo->first);
                v = lo->second + t * (hi->second - lo->second);
            }
            dense[{state, y}] = v;
        }
    }
    return dense;
}

std::vector<PanelRow> build_panel(const std::map<StateYear, double>& rent_dense,
                                  const std::map<StateYear, double>& rpp_observed) {
    std::vector<PanelRow> rows;
    for (const auto& [key, rpp] : rpp_observed) {
        StateYear lead{key.state, key.year + 1};
        auto rpp_lead = rpp_observed.find(lead);
        auto rent = rent_dense.find(key);
        auto rent_lead = rent_dense.find(lead);
        if (rpp_lead == rpp_observed.end() || rent == rent_dense.end() || rent_lead == rent_dense.end())
            continue;
        rows.push_back({key.state, key.year, rent->second, rent_lead->second, rpp, rpp_lead->second});
    }
    return rows;
}

double BackcastModel::predict(StateId state, double rent, double rent_lead, double rpp_lead) const {
    auto it = fe.find(state);
    if (it == fe.end())
        throw DataError(fmt::format("backcast model has no fixed effect for state {}", state.code()));
    return alpha + beta_rent * rent + beta_lead_rent * rent_lead + beta_lead_rpp * rpp_lead + it->second;
}

BackcastModel fit_backcast(std::span<const PanelRow> panel) {
    std::set<StateId> state_set;
    for (const auto& r : panel)
        state_set.insert(r.state);
    if (state_set.empty())
        throw NumericError("backcast panel is empty");

    // Reference state: alphabetically first two-letter code.
    std::vector<StateId> states(state_set.begin(), state_set.end());
    std::ranges::sort(states, {}, [](StateId s) { return s.code(); });
    const StateId reference = states.front();

    std::vector<std::string> names{"intercept", "rent", "lead_rent", "lead_rpp"};
    std::map<StateId, Eigen::Index> dummy_col;
    for (std::size_t i = 1; i < states.size(); ++i) {
        dummy_col[states[i]] = static_cast<Eigen::Index>(names.size());
        names.push_back(fmt::format("fe_{}", states[i].code()));
    }

    const auto n = static_cast<Eigen::Index>(panel.size());
    const auto p = static_cast<Eigen::Index>(names.size());
    if (n < p)
        throw NumericError(fmt::format("backcast panel has {} rows for {} coefficients", n, p));

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = panel[static_cast<std::size_t>(i)];
        x(i, 0) = 1.0;
        x(i, 1) = r.rent;
        x(i, 2) = r.rent_lead;
        x(i, 3) = r.rpp_lead;
        if (auto it = dummy_col.find(r.state); it != dummy_col.end())
            x(i, it->second) = 1.0;
        y(i) = r.rpp;
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) {
        std::string cols;
        for (Eigen::Index k = qr.rank(); k < p; ++k)
            cols += (cols.empty() ? "" : ", ") + names[static_cast<std::size_t>(qr.colsPermutation().indices()(k))];
        throw NumericError(fmt::format("backcast design matrix is rank deficient (rank {} of {}); collinear: {}",
                                       qr.rank(), p, cols));
    }
    Eigen::VectorXd beta = qr.solve(y);
    Eigen::VectorXd resid = y - x * beta;

    BackcastModel m;
    m.alpha = beta(0);
    m.beta_rent = beta(1);
    m.beta_lead_rent = beta(2);
    m.beta_lead_rpp = beta(3);
    m.reference = reference;
    m.fe[reference] = 0.0;
    for (const auto& [s, col] : dummy_col)
        m.fe[s] = beta(col);

    const double ssr = resid.squaredNorm();
    const double sst = (y.array() - y.mean()).square().sum();
    m.diagnostics.n = static_cast<std::size_t>(n);
    m.diagnostics.parameters = static_cast<std::size_t>(p);
    m.diagnostics.r_squared = sst > 0 ? 1.0 - ssr / sst : 1.0;
    m.diagnostics.residual_sd = n > p ? std::sqrt(ssr / static_cast<double>(n - p)) : 0.0;
    return m;
}

std::map<StateYear, RppCell> backcast_rpp(const BackcastModel& model,
                                          const std::map<StateYear, double>& rent_dense,
                                          const std::map<StateYear, double>& rpp_observed, YearRange years) {
    std::set<StateId> states;
    for (const auto& [key, _] : rpp_observed)
        states.insert(key.state);

    std::map<StateYear, RppCell> full;
    for (StateId s : states) {
        for (int y = years.last; y >= years.first; --y) {
            if (auto obs = rpp_observed.find({s, y}); obs != rpp_observed.end()) {
                full[{s, y}] = {obs->second, RppSource::observed};
                continue;
            }
            auto lead = full.find({s, y + 1});
            if (lead == full.end())
                throw DataError(fmt::format("RPP for {} is not observed in {} and has no lead to backcast from",
                                            s.code(), y));
            auto rent = rent_dense.find({s, y});
            auto rent_lead = rent_dense.find({s, y + 1});
            if (rent == rent_dense.end() || rent_lead == rent_dense.end())
                throw DataError(fmt::format("rent panel does not cover {} {}-{}", s.code(), y, y + 1));
            double v = model.predict(s, rent->second, rent_lead->second, lead->second.value);
            full[{s, y}] = {v, RppSource::backcast};
        }
    }
    return full;
}

double effective_size(int members) { return std::sqrt(static_cast<double>(members)); }

double DeflatorSet::cpi_factor(int year) const {
    auto it = cpi.find(year);
    if (it == cpi.end())
        throw DataError(fmt::format("no CPI factor for {}", year));
    return it->second;
}

double DeflatorSet::rpp_factor(StateYear cell) const {
    auto it = rpp.find(cell);
    if (it == rpp.end())
        throw DataError(fmt::format("no RPP for {} {}", cell.state.code(), cell.year));
    return it->second.value / 100.0;
}

DeflatorSet build_deflators(const PriceTables& prices, YearRange years, int reference_year, bool backcast) {
    DeflatorSet d;
    d.years = years;
    d.reference_year = reference_year;
    d.rpp_observed_from = prices.rpp_observed_from;
    for (const auto& [y, v] : rebase_cpi(prices.cpi, reference_year))
        if (years.contains(y))
            d.cpi[y] = v;
    for (int y = years.first; y <= years.last; ++y)
        if (!d.cpi.contains(y))
            throw DataError(fmt::format("CPI missing for year {}", y));

    d.rent = interpolate_rent(prices.rent, years);

    std::map<StateYear, double> observed;
    for (const auto& [k, v] : prices.rpp)
        if (years.contains(k.year))
            observed[k] = v;

    if (backcast) {
        auto panel = build_panel(d.rent, observed);
        d.model = fit_backcast(panel);
        d.rpp = backcast_rpp(*d.model, d.rent, observed, years);
        d.rpp_first_year = years.first;
    } else {
        for (const auto& [k, v] : observed)
            if (k.year >= prices.rpp_observed_from)
                d.rpp[k] = {v, RppSource::observed};
        d.rpp_first_year = std::max(years.first, prices.rpp_observed_from);
    }
    return d;
}

double adjust_income(const HouseholdRecord& r, const DeflatorSet& d, Variant variant) {
    const auto set = normalizers(variant);
    double divisor = 1.0;
    if (set.cpi)
        divisor *= d.cpi_factor(r.year);
    if (set.rpp)
        divisor *= d.rpp_factor({r.state, r.year});
    if (set.size)
        divisor *= effective_size(r.members);
    return r.income / divisor;
}

nlohmann::json BackcastModel::to_json() const {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["beta_rent"] = beta_rent;
    j["beta_lead_rent"] = beta_lead_rent;
    j["beta_lead_rpp"] = beta_lead_rpp;
    j["reference_state"] = std::string(reference.code());
    j["fe"] = nlohmann::json::object();
    for (const auto& [s, v] : fe)
        j["fe"][std::string(s.code())] = v;
    j["diagnostics"] = {{"r_squared", diagnostics.r_squared},
                        {"residual_sd", diagnostics.residual_sd},
                        {"n", diagnostics.n},
                        {"parameters", diagnostics.parameters}};
    return j;
}

namespace {
StateId state_of(const std::string& code) {
    auto s = StateId::from_code(code);
    if (!s)
        throw DataError("unknown state code '" + code + "'");
    return *s;
}
} // namespace

BackcastModel BackcastModel::from_json(const nlohmann::json& j) {
    BackcastModel m;
    m.alpha = j.at("alpha").get<double>();
    m.beta_rent = j.at("beta_rent").get<double>();
    m.beta_lead_rent = j.at("beta_lead_rent").get<double>();
    m.beta_lead_rpp = j.at("beta_lead_rpp").get<double>();
    m.reference = state_of(j.at("reference_state").get<std::string>());
    for (const auto& [code, v] : j.at("fe").items())
        m.fe[state_of(code)] = v.get<double>();
    const auto& d = j.at("diagnostics");
    m.diagnostics = {d.at("r_squared").get<double>(), d.at("residual_sd").get<double>(),
                     d.at("n").get<std::size_t>(), d.at("parameters").get<std::size_t>()};
    return m;
}

nlohmann::json DeflatorSet::to_json() const {
    nlohmann::json j;
    j["schema"] = "distviz.deflators";
    j["schema_version"] = deflator_schema_version;
    j["years"] = fmt::format("{}:{}", years.first, years.last);
    j["reference_year"] = reference_year;
    j["rpp_observed_from"] = rpp_observed_from;
    j["rpp_first_year"] = rpp_first_year;
    j["cpi"] = nlohmann::json::object();
    for (const auto& [y, v] : cpi)
        j["cpi"][std::to_string(y)] = v;
    j["rpp"] = nlohmann::json::array();
    for (const auto& [k, c] : rpp)
        j["rpp"].push_back({std::string(k.state.code()), k.year, c.value,
                            c.source == RppSource::observed ? "observed" : "backcast"});
    j["rent"] = nlohmann::json::array();
    for (const auto& [k, v] : rent)
        j["rent"].push_back({std::string(k.state.code()), k.year, v});
    j["model"] = model ? model->to_json() : nlohmann::json(nullptr);
    return j;
}

DeflatorSet DeflatorSet::from_json(const nlohmann::json& j) {
    try {
        if (j.at("schema").get<std::string>() != "distviz.deflators")
            throw DataError("not a deflator document");
        auto version = j.at("schema_version").get<std::string>();
        if (version.substr(0, version.find('.')) != "1")
            throw DataError("unsupported deflator schema version " + version);
        DeflatorSet d;
        d.years = parse_year_range(j.at("years").get<std::string>());
        d.reference_year = j.at("reference_year").get<int>();
        d.rpp_observed_from = j.at("rpp_observed_from").get<int>();
        d.rpp_first_year = j.at("rpp_first_year").get<int>();
        for (const auto& [y, v] : j.at("cpi").items())
            d.cpi[std::stoi(y)] = v.get<double>();
        for (const auto& row : j.at("rpp")) {
            auto src = row.at(3).get<std::string>();
            if (src != "observed" && src != "backcast")
                throw DataError("bad RPP source flag '" + src + "'");
            d.rpp[{state_of(row.at(0).get<std::string>()), row.at(1).get<int>()}] = {
                row.at(2).get<double>(), src == "observed" ? RppSource::observed : RppSource::backcast};
        }
        for (const auto& row : j.at("rent"))
            d.rent[{state_of(row.at(0).get<std::string>()), row.at(1).get<int>()}] = row.at(2).get<double>();
        if (!j.at("model").is_null())
            d.model = BackcastModel::from_json(j.at("model"));
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("deflator document: ") + e.what());
    }
}

} // namespace distviz::deflate
