#pragma once

// Three-scenario DCF with an EV/EBITDA terminal multiple and CAPM discounting.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fundacast/error.hpp"
#include "fundacast/ingest.hpp"

namespace fundacast {

inline constexpr double kCorporateTaxRate = 0.21;
inline constexpr int kDefaultHorizonYears = 3;
inline constexpr std::size_t kScenarioCount = 3;
inline constexpr std::size_t kGrowthWindowYears = 5;

struct DcfInputs {
  /// Historical CAGR, sector average, analyst consensus. Empty = unavailable.
  std::array<std::optional<double>, kScenarioCount> growth_rates{};
  double base_revenue = 0.0;
  double base_ebitda = 0.0;
  double base_free_cash_flow = 0.0;
  double ev_ebitda_multiple = 0.0;
  double beta = 1.0;
  double risk_free_rate = 0.0;
  double market_return = 0.0;
  double tax_rate = kCorporateTaxRate;
  double net_debt = 0.0;
  double shares_outstanding = 1.0;
  int horizon_years = kDefaultHorizonYears;
};

struct ScenarioForecast {
  std::vector<double> revenues;
  std::vector<double> ebitdas;
};

struct DcfValuation {
  std::array<std::optional<double>, kScenarioCount> growth_rates{};
  std::array<ScenarioForecast, kScenarioCount> forecasts{};
  std::array<std::optional<double>, kScenarioCount> intrinsic_value{};
  double discount_rate = 0.0;
  double final_intrinsic_value = 0.0;
  double ev_ebitda_multiple = 0.0;
  double beta = 0.0;
  double risk_free_rate = 0.0;
  double market_return = 0.0;
  double tax_rate = kCorporateTaxRate;
  std::size_t scenarios_used = 0;
};

/// Compound annual growth of Total Revenue between the first and last
/// statements that report it. The exponent uses the fiscal-year gap.
inline double historical_growth_rate(std::span<const AnnualStatement> statements) {
  std::vector<const AnnualStatement*> usable;
  for (const auto& s : statements) {
    if (s.income[IncomeItem::TotalRevenue]) usable.push_back(&s);
  }
  if (usable.size() < 2) throw InsufficientDataError("growth rate needs at least two years of revenue");
  const double first = *usable.front()->income[IncomeItem::TotalRevenue];
  const double last = *usable.back()->income[IncomeItem::TotalRevenue];
  if (first <= 0.0 || last <= 0.0) throw NonPositiveRevenueError("growth rate needs positive revenue");
  const int years = usable.back()->fiscal_year - usable.front()->fiscal_year;
  return std::pow(last / first, 1.0 / years) - 1.0;
}

/// CAPM cost of equity.
inline double capm_discount_rate(const DcfInputs& in) {
  return in.risk_free_rate + in.beta * (in.market_return - in.risk_free_rate);
}

/// Compounds revenue at `growth` and holds the base EBITDA margin constant.
inline ScenarioForecast forecast_scenario(double base_revenue, double base_ebitda, double growth, int horizon) {
  if (horizon < 1) throw PreconditionError("forecast horizon must be at least one year");
  if (!(base_revenue > 0.0)) throw NonPositiveRevenueError("base revenue must be positive");
  const double margin = base_ebitda / base_revenue;
  ScenarioForecast f;
  f.revenues.reserve(horizon);
  f.ebitdas.reserve(horizon);
  double revenue = base_revenue;
  for (int t = 0; t < horizon; ++t) {
    revenue *= 1.0 + growth;
    f.revenues.push_back(revenue);
    f.ebitdas.push_back(revenue * margin);
  }
  return f;
}

/// Per-share equity value of one scenario. Free cash flow keeps the base
/// year's ratio to after-tax EBITDA; the terminal value is the EV/EBITDA
/// multiple applied to the final forecast EBITDA.
inline double dcf_intrinsic_value(const ScenarioForecast& forecast, const DcfInputs& in, double discount_rate) {
  if (in.base_ebitda == 0.0) throw DegenerateBaseError("base EBITDA is zero");
  if (!(discount_rate > -1.0)) throw PreconditionError("discount rate must exceed -1");
  if (!(in.shares_outstanding > 0.0)) throw PreconditionError("shares outstanding must be positive");
  if (forecast.ebitdas.empty()) throw PreconditionError("empty forecast");
  const double after_tax = 1.0 - in.tax_rate;
  const double conversion = in.base_free_cash_flow / (in.base_ebitda * after_tax);
  double present = 0.0;
  double factor = 1.0;
  for (double ebitda : forecast.ebitdas) {
    factor *= 1.0 + discount_rate;
    present += ebitda * after_tax * conversion / factor;
  }
  const double terminal = in.ev_ebitda_multiple * forecast.ebitdas.back();
  present += terminal / factor;
  return (present - in.net_debt) / in.shares_outstanding;
}

/// Runs every available scenario and averages them. One missing growth rate
/// is tolerated; the mean then covers the remaining two.
inline DcfValuation value_scenarios(const DcfInputs& in) {
  std::size_t available = 0;
  for (const auto& g : in.growth_rates) available += g.has_value();
  if (available + 1 < kScenarioCount) {
    throw InsufficientDataError("at most one growth scenario may be unavailable");
  }
  DcfValuation v;
  v.growth_rates = in.growth_rates;
  v.discount_rate = capm_discount_rate(in);
  v.ev_ebitda_multiple = in.ev_ebitda_multiple;
  v.beta = in.beta;
  v.risk_free_rate = in.risk_free_rate;
  v.market_return = in.market_return;
  v.tax_rate = in.tax_rate;
  double sum = 0.0;
  for (std::size_t k = 0; k < kScenarioCount; ++k) {
    if (!in.growth_rates[k]) continue;
    v.forecasts[k] = forecast_scenario(in.base_revenue, in.base_ebitda, *in.growth_rates[k], in.horizon_years);
    v.intrinsic_value[k] = dcf_intrinsic_value(v.forecasts[k], in, v.discount_rate);
    sum += *v.intrinsic_value[k];
  }
  v.scenarios_used = available;
  v.final_intrinsic_value = sum / static_cast<double>(available);
  if (!std::isfinite(v.final_intrinsic_value)) throw ValueError("intrinsic value is not finite");
  return v;
}

// ---------------------------------------------------------------------------
// Company-year valuation against a universe

/// Per company-year inputs that come from outside the company's own statements.
struct MarketInputs {
  double risk_free_rate = 0.0;
  double market_return = 0.0;
  double beta = 1.0;
  double ev_ebitda_multiple = 0.0;
  std::optional<double> sector_growth;
  std::optional<double> analyst_growth;
  int horizon_years = kDefaultHorizonYears;
};

/// The statements used for the historical growth rate of `year`: up to five
/// years ending at `year`, never later ones.
inline std::span<const AnnualStatement> growth_window(const CompanyRecord& company, int year) {
  const auto& st = company.statements;
  auto end = std::find_if(st.begin(), st.end(), [&](const AnnualStatement& s) { return s.fiscal_year > year; });
  auto begin = st.begin();
  if (static_cast<std::size_t>(end - begin) > kGrowthWindowYears) begin = end - kGrowthWindowYears;
  return {st.data() + (begin - st.begin()), static_cast<std::size_t>(end - begin)};
}

inline std::optional<double> try_historical_growth(const CompanyRecord& company, int year) {
  try {
    return historical_growth_rate(growth_window(company, year));
  } catch (const InsufficientDataError&) {
    return std::nullopt;
  } catch (const NonPositiveRevenueError&) {
    return std::nullopt;
  }
}

inline DcfInputs make_dcf_inputs(const CompanyRecord& company, int year, const MarketInputs& market) {
  const AnnualStatement* stmt = company.statement_for(year);
  if (!stmt) throw NoDataError(company.ticker + " has no statement for " + std::to_string(year));
  auto need = [&](const std::optional<double>& v, std::string_view name) {
    if (!v) {
      throw InsufficientDataError(company.ticker + " " + std::to_string(year) + ": missing " + std::string(name));
    }
    return *v;
  };
  DcfInputs in;
  in.growth_rates = {try_historical_growth(company, year), market.sector_growth, market.analyst_growth};
  in.base_revenue = need(stmt->income[IncomeItem::TotalRevenue], "Total Revenue");
  in.base_ebitda = need(stmt->income[IncomeItem::Ebitda], "EBITDA");
  in.base_free_cash_flow = need(stmt->cashflow[CashflowItem::FreeCashFlow], "Free Cash Flow");
  in.net_debt = need(stmt->balance[BalanceItem::TotalDebt], "Total Debt") -
                need(stmt->balance[BalanceItem::CashAndEquivalents], "Cash & Cash Equiv");
  in.shares_outstanding = need(stmt->income[IncomeItem::DilutedAverageShares], "Diluted Average Shares");
  in.ev_ebitda_multiple = market.ev_ebitda_multiple;
  in.beta = market.beta;
  in.risk_free_rate = market.risk_free_rate;
  in.market_return = market.market_return;
  in.horizon_years = market.horizon_years;
  return in;
}

inline DcfValuation final_intrinsic_value(const CompanyRecord& company, int year, const MarketInputs& market) {
  return value_scenarios(make_dcf_inputs(company, year, market));
}

/// Resolves MarketInputs for any company-year of a loaded universe: sector
/// growth is the mean historical CAGR of same-sector companies for that
/// year, and a missing EV/EBITDA multiple falls back to the sector median.
class ValuationContext {
 public:
  ValuationContext(std::span<const CompanyRecord> companies, UniverseManifest manifest,
                   int horizon_years = kDefaultHorizonYears)
      : companies_(companies), manifest_(std::move(manifest)), horizon_(horizon_years) {
    std::map<std::string, std::vector<double>> multiples;
    for (const auto& c : manifest_.companies) {
      if (c.ev_ebitda_multiple) multiples[c.sector].push_back(*c.ev_ebitda_multiple);
    }
    for (auto& [sector, values] : multiples) {
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      sector_multiple_[sector] = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }
  }

  const UniverseManifest& manifest() const { return manifest_; }

  std::optional<double> sector_growth(const std::string& sector, int year) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : companies_) {
      if (c.sector != sector || !c.statement_for(year)) continue;
      if (auto g = try_historical_growth(c, year)) {
        sum += *g;
        ++n;
      }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }

  MarketInputs market_inputs(const CompanyRecord& company, int year) const {
    const CompanyInputs* in = manifest_.find(company.ticker);
    if (!in) throw SchemaError("universe.json has no entry for " + company.ticker);
    MarketInputs m;
    m.risk_free_rate = manifest_.risk_free_rate;
    m.market_return = manifest_.market_return;
    m.beta = in->beta;
    m.horizon_years = horizon_;
    if (in->ev_ebitda_multiple) {
      m.ev_ebitda_multiple = *in->ev_ebitda_multiple;
    } else if (auto it = sector_multiple_.find(company.sector); it != sector_multiple_.end()) {
      m.ev_ebitda_multiple = it->second;
    } else {
      throw InsufficientDataError("no EV/EBITDA multiple for " + company.ticker + " or its sector");
    }
    m.sector_growth = sector_growth(company.sector, year);
    if (auto it = in->analyst_growth.find(year); it != in->analyst_growth.end()) m.analyst_growth = it->second;
    return m;
  }

  DcfValuation value(const CompanyRecord& company, int year) const {
    return final_intrinsic_value(company, year, market_inputs(company, year));
  }

 private:
  std::span<const CompanyRecord> companies_;
  UniverseManifest manifest_;
  int horizon_;
  std::map<std::string, double> sector_multiple_;
};

// ---------------------------------------------------------------------------
// Named attributes (feature columns and CLI output)

inline constexpr std::array<std::string_view, 18> kDcfAttributeNames = {
    "Growth Rate1",
    "Growth Rate2",
    "Growth Rate3",
    "Forecasted Revenue1",
    "Forecasted Revenue2",
    "Forecasted Revenue3",
    "Forecasted EBITDA1",
    "Forecasted EBITDA2",
    "Forecasted EBITDA3",
    "EV / EBITDA Multiple",
    "Beta",
    "Risk Free 10-Year Treasury Rate",
    "Market S&P 500 10-Year Return",
    "Corporate Tax Rate",
    "Intrinsic Value1",
    "Intrinsic Value2",
    "Intrinsic Value3",
    "Final Intrinsic Value",
};

/// Flattens a valuation into its 18 named attributes. Forecasted Revenue k
/// and Forecasted EBITDA k are scenario k's values at the end of the horizon.
inline std::array<std::optional<double>, 18> dcf_attributes(const DcfValuation& v) {
  std::array<std::optional<double>, 18> out{};
  for (std::size_t k = 0; k < kScenarioCount; ++k) {
    out[k] = v.growth_rates[k];
    if (!v.forecasts[k].revenues.empty()) {
      out[3 + k] = v.forecasts[k].revenues.back();
      out[6 + k] = v.forecasts[k].ebitdas.back();
    }
    out[14 + k] = v.intrinsic_value[k];
  }
  out[9] = v.ev_ebitda_multiple;
  out[10] = v.beta;
  out[11] = v.risk_free_rate;
  out[12] = v.market_return;
  out[13] = v.tax_rate;
  out[17] = v.final_intrinsic_value;
  return out;
}

inline nlohmann::ordered_json valuation_to_json(const DcfValuation& v) {
  auto opt = [](const std::optional<double>& x) {
    return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json out;
  const auto attrs = dcf_attributes(v);
  for (std::size_t i = 0; i < attrs.size(); ++i) out[std::string(kDcfAttributeNames[i])] = opt(attrs[i]);
  out["discount_rate"] = v.discount_rate;
  out["scenarios_used"] = v.scenarios_used;
  auto scenarios = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < kScenarioCount; ++k) {
    nlohmann::ordered_json s;
    s["growth_rate"] = opt(v.growth_rates[k]);
    s["forecasted_revenue"] = v.forecasts[k].revenues;
    s["forecasted_ebitda"] = v.forecasts[k].ebitdas;
    s["intrinsic_value"] = opt(v.intrinsic_value[k]);
    scenarios.push_back(std::move(s));
  }
  out["scenarios"] = std::move(scenarios);
  return out;
}

}  // namespace fundacast
