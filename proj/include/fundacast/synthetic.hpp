#pragma once

// Synthetic company universes in the canonical on-disk format. Used for the
// bundled fixtures and for signal-recovery tests.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fundacast/ingest.hpp"
#include "fundacast/io.hpp"
#include "fundacast/random.hpp"
#include "fundacast/valuation.hpp"

namespace fundacast::synthetic {

struct Options {
  std::size_t companies = 12;
  int first_year = 2019;
  int last_year = 2023;
  std::uint64_t seed = 7;
  /// Probability that an optional line item is written as null.
  double missing_rate = 0.03;
  /// When set, each year's price direction is 1 iff
  ///   (net_margin - 0.1)/0.2 - (debt_to_asset - 0.4)/0.3 + noise * N(0,1) >= 0.
  bool separable_signal = false;
  double noise = 0.1;
};

struct Universe {
  std::vector<CompanyRecord> companies;
  UniverseManifest manifest;
};

inline const std::vector<std::string>& sector_names() {
  static const std::vector<std::string> names = {"Industrials", "Utilities", "Consumer Staples",
                                                 "Consumer Discretionary"};
  return names;
}

inline std::string ticker_name(std::size_t i) {
  std::string t = "S";
  t += static_cast<char>('A' + (i / 26) % 26);
  t += static_cast<char>('A' + i % 26);
  return t;
}

/// Direction score of the separable universe; label = score >= 0.
inline double separable_score(double net_margin, double debt_to_asset) {
  return (net_margin - 0.1) / 0.2 - (debt_to_asset - 0.4) / 0.3;
}

namespace detail {

inline AnnualStatement make_statement(int year, double revenue, double net_margin, double debt_to_asset,
                                      double shares, Rng& rng, double missing_rate, bool allow_missing) {
  AnnualStatement s;
  s.fiscal_year = year;
  auto maybe = [&](double v) -> std::optional<double> {
    if (allow_missing && rng.uniform() < missing_rate) return std::nullopt;
    return v;
  };
  const double gross_margin = rng.uniform(0.25, 0.6);
  const double cost = revenue * (1.0 - gross_margin);
  const double sga = revenue * rng.uniform(0.06, 0.15);
  const double rnd = revenue * rng.uniform(0.0, 0.08);
  const double opex = sga + rnd;
  const double ebit = revenue - cost - opex;
  const double dna = revenue * rng.uniform(0.02, 0.06);
  const double ebitda = ebit + dna;
  const double assets = revenue * rng.uniform(0.8, 1.6);
  const double total_debt = assets * debt_to_asset;
  const double interest = -total_debt * rng.uniform(0.02, 0.06);
  const double net_income = revenue * net_margin;

  auto& in = s.income;
  in[IncomeItem::TotalRevenue] = revenue;
  in[IncomeItem::CostOfRevenue] = cost;
  in[IncomeItem::SellingGeneralAdministrative] = maybe(sga);
  in[IncomeItem::ResearchDevelopment] = maybe(rnd);
  in[IncomeItem::OperatingExpenses] = opex;
  in[IncomeItem::NetIncome] = net_income;
  in[IncomeItem::DilutedEps] = net_income / shares;
  in[IncomeItem::DilutedAverageShares] = shares;
  in[IncomeItem::NetInterestIncome] = maybe(interest);
  in[IncomeItem::Ebitda] = ebitda;
  in[IncomeItem::Ebit] = ebit;

  const double current_assets = assets * rng.uniform(0.25, 0.45);
  const double cash = current_assets * rng.uniform(0.1, 0.4);
  const double inventory = current_assets * rng.uniform(0.1, 0.4);
  const double current_liabilities = current_assets / rng.uniform(0.8, 2.5);
  const double total_liabilities = total_debt + current_liabilities * rng.uniform(0.3, 0.8);
  const double equity = assets - total_liabilities;
  auto& bs = s.balance;
  bs[BalanceItem::LongTermDebt] = total_debt * rng.uniform(0.6, 0.95);
  bs[BalanceItem::TotalDebt] = total_debt;
  bs[BalanceItem::InvestedCapital] = maybe(equity + total_debt);
  bs[BalanceItem::WorkingCapital] = current_assets - current_liabilities;
  bs[BalanceItem::StockholdersEquity] = equity;
  bs[BalanceItem::RetainedEarnings] = maybe(equity * rng.uniform(0.2, 0.9));
  bs[BalanceItem::TotalAssets] = assets;
  bs[BalanceItem::CashAndEquivalents] = cash;
  bs[BalanceItem::Inventory] = maybe(inventory);
  bs[BalanceItem::GrossPpe] = maybe(assets * rng.uniform(0.3, 0.7));
  bs[BalanceItem::CurrentAssets] = current_assets;
  bs[BalanceItem::CurrentLiabilities] = current_liabilities;
  bs[BalanceItem::TotalLiabilities] = total_liabilities;

  const double change_wc = revenue * rng.uniform(-0.02, 0.02);
  const double ocf = net_income + dna - change_wc;
  const double capex = -revenue * rng.uniform(0.03, 0.08);
  const double business = -revenue * rng.uniform(0.0, 0.02);
  const double investment = revenue * rng.uniform(-0.02, 0.02);
  const double investing = capex + business + investment;
  const double issuance = revenue * rng.uniform(0.0, 0.01);
  const double repurchase = -revenue * rng.uniform(0.0, 0.04);
  const double dividends = -std::max(net_income, 0.0) * rng.uniform(0.0, 0.5);
  const double debt_issued = total_debt * rng.uniform(0.0, 0.15);
  const double debt_repaid = -total_debt * rng.uniform(0.0, 0.15);
  const double financing = issuance + repurchase + dividends + debt_issued + debt_repaid;
  auto& cf = s.cashflow;
  cf[CashflowItem::NetIncome] = net_income;
  cf[CashflowItem::DepreciationAmortization] = dna;
  cf[CashflowItem::GainLossOnBusinessSale] = maybe(0.0);
  cf[CashflowItem::ImpairmentCharge] = maybe(revenue * rng.uniform(0.0, 0.01));
  cf[CashflowItem::ChangeInWorkingCapital] = change_wc;
  cf[CashflowItem::OperatingCashFlow] = ocf;
  cf[CashflowItem::NetPpePurchaseAndSale] = capex;
  cf[CashflowItem::NetTangiblePurchaseAndSale] = maybe(capex);
  cf[CashflowItem::NetBusinessPurchaseAndSale] = maybe(business);
  cf[CashflowItem::NetInvestmentPurchaseAndSale] = maybe(investment);
  cf[CashflowItem::InvestingCashFlow] = investing;
  cf[CashflowItem::NetCommonStockIssuance] = maybe(issuance);
  cf[CashflowItem::RepurchaseOfCapitalStock] = maybe(repurchase);
  cf[CashflowItem::CashDividendsPaid] = maybe(dividends);
  cf[CashflowItem::FinancingCashFlow] = financing;
  cf[CashflowItem::ChangeInCash] = ocf + investing + financing;
  cf[CashflowItem::CapitalExpenditures] = capex;
  cf[CashflowItem::IssuanceOfDebt] = maybe(debt_issued);
  cf[CashflowItem::RepaymentOfDebt] = maybe(debt_repaid);
  cf[CashflowItem::FreeCashFlow] = ocf + capex;
  return s;
}

/// Weekday closes for `year` moving log-linearly from `start` to `end` with
/// bridge noise that vanishes at both ends.
inline void append_year_prices(PriceSeries& series, int year, double start, double end, Rng& rng) {
  namespace chr = std::chrono;
  std::vector<Date> trading;
  const chr::sys_days last{chr::year{year} / chr::December / 31};
  for (chr::sys_days d{chr::year{year} / chr::January / 1}; d <= last; d += chr::days{1}) {
    const chr::weekday wd{d};
    if (wd != chr::Saturday && wd != chr::Sunday) trading.emplace_back(d);
  }
  const double n = static_cast<double>(trading.size() - 1);
  const double log_start = std::log(start), log_end = std::log(end);
  double walk = 0.0;
  std::vector<double> walks(trading.size());
  for (std::size_t i = 0; i < trading.size(); ++i) {
    walks[i] = walk;
    walk += 0.012 * rng.normal();
  }
  const double walk_end = walks.back();
  for (std::size_t i = 0; i < trading.size(); ++i) {
    const double u = static_cast<double>(i) / n;
    const double bridge = walks[i] - u * walk_end;
    double price = std::exp(log_start + u * (log_end - log_start) + bridge);
    if (i == 0) price = start;
    if (i + 1 == trading.size()) price = end;
    series.observations.push_back({trading[i], std::round(price * 100.0) / 100.0});
  }
}

}  // namespace detail

inline Universe generate(const Options& opt) {
  Rng rng(opt.seed);
  Universe u;
  u.manifest.risk_free_rate = 0.04;
  u.manifest.market_return = 0.10;
  const auto& sectors = sector_names();
  const int years = opt.last_year - opt.first_year + 1;

  for (std::size_t c = 0; c < opt.companies; ++c) {
    CompanyRecord rec;
    rec.ticker = ticker_name(c);
    rec.sector = sectors[c % sectors.size()];
    CompanyInputs inputs;
    inputs.ticker = rec.ticker;
    inputs.sector = rec.sector;
    inputs.beta = std::round(rng.uniform(0.5, 1.6) * 100.0) / 100.0;
    if (c % 5 != 4) inputs.ev_ebitda_multiple = std::round(rng.uniform(6.0, 16.0) * 10.0) / 10.0;

    double revenue = std::exp(rng.uniform(std::log(2e9), std::log(5e10)));
    const double trend = rng.uniform(-0.04, 0.12);
    const double shares = std::round(revenue / rng.uniform(20.0, 80.0));
    double base_margin = rng.uniform(0.02, 0.18);
    double base_leverage = rng.uniform(0.15, 0.6);
    // Companies whose index is 3 mod 7 lack their first year, as real
    // listings sometimes do.
    const int first = opt.first_year + (c % 7 == 3 ? 1 : 0);
    for (int y = first; y <= opt.first_year + years - 1; ++y) {
      double margin = base_margin + rng.uniform(-0.04, 0.04);
      double leverage = base_leverage + rng.uniform(-0.08, 0.08);
      if (opt.separable_signal) {
        margin = rng.uniform(-0.1, 0.3);
        leverage = rng.uniform(0.1, 0.7);
      }
      rec.statements.push_back(detail::make_statement(y, revenue, margin, leverage, shares, rng, opt.missing_rate,
                                                      !opt.separable_signal));
      inputs.analyst_growth[y] = std::round((trend + rng.uniform(-0.03, 0.03)) * 1e4) / 1e4;
      revenue *= 1.0 + trend + rng.uniform(-0.05, 0.05);
    }

    double price = revenue / shares * rng.uniform(0.5, 2.0);
    for (const auto& s : rec.statements) {
      int direction;
      if (opt.separable_signal) {
        const double nm = *s.income[IncomeItem::NetIncome] / *s.income[IncomeItem::TotalRevenue];
        const double da = *s.balance[BalanceItem::TotalDebt] / *s.balance[BalanceItem::TotalAssets];
        direction = separable_score(nm, da) + opt.noise * rng.normal() >= 0.0 ? 1 : 0;
      } else {
        direction = rng.uniform() < 0.55 ? 1 : 0;
      }
      const double move = rng.uniform(0.03, 0.35);
      const double start = std::round(price * 100.0) / 100.0;
      double end = std::round(start * (direction ? 1.0 + move : 1.0 / (1.0 + move)) * 100.0) / 100.0;
      if (!direction && end >= start) end = start - 0.01;
      detail::append_year_prices(rec.prices, s.fiscal_year, start, end, rng);
      price = end * std::exp(0.02 * rng.normal());
    }
    u.companies.push_back(std::move(rec));
    u.manifest.companies.push_back(std::move(inputs));
  }
  return u;
}

inline nlohmann::ordered_json manifest_to_json(const UniverseManifest& m) {
  nlohmann::ordered_json j;
  j["market"] = {{"risk_free_rate", m.risk_free_rate}, {"market_return", m.market_return}};
  auto companies = nlohmann::ordered_json::array();
  for (const auto& c : m.companies) {
    nlohmann::ordered_json e;
    e["ticker"] = c.ticker;
    e["sector"] = c.sector;
    e["beta"] = c.beta;
    e["ev_ebitda_multiple"] = c.ev_ebitda_multiple ? nlohmann::ordered_json(*c.ev_ebitda_multiple) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json growth = nlohmann::ordered_json::object();
    for (const auto& [y, g] : c.analyst_growth) growth[std::to_string(y)] = g;
    e["analyst_growth"] = std::move(growth);
    companies.push_back(std::move(e));
  }
  j["companies"] = std::move(companies);
  return j;
}

inline void write_universe(const Universe& u, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& c : u.companies) {
    write_file_atomic(dir / (c.ticker + ".statements.json"), statements_to_json(c).dump(2) + "\n");
    write_file_atomic(dir / (c.ticker + ".prices.csv"), prices_to_csv(c.prices));
  }
  write_file_atomic(dir / "universe.json", manifest_to_json(u.manifest).dump(2) + "\n");
}

}  // namespace fundacast::synthetic
