#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string_view>

#include "fundacast/ingest.hpp"

namespace fundacast {

/// The eleven liquidity, leverage and margin ratios of one company-year.
/// An empty optional is the UNDEFINED marker.
struct RatioSet {
  std::optional<double> current_ratio;
  std::optional<double> cash_ratio;
  std::optional<double> quick_ratio;
  std::optional<double> debt_to_asset;
  std::optional<double> debt_to_equity;
  std::optional<double> gross_margin;
  std::optional<double> operating_margin;
  std::optional<double> ebitda_margin;
  std::optional<double> net_margin;
  std::optional<double> interest_coverage;
  std::optional<double> fcf_margin;

  static constexpr std::size_t size() { return 11; }

  std::array<std::optional<double>, 11> values() const {
    return {current_ratio, cash_ratio,       quick_ratio,   debt_to_asset,
            debt_to_equity, gross_margin,    operating_margin, ebitda_margin,
            net_margin,    interest_coverage, fcf_margin};
  }

  friend bool operator==(const RatioSet&, const RatioSet&) = default;
};

inline constexpr std::array<std::string_view, 11> kRatioNames = {
    "current_ratio", "cash_ratio",      "quick_ratio",     "debt_to_asset",
    "debt_to_equity", "gross_margin",   "operating_margin", "ebitda_margin",
    "net_margin",    "interest_coverage", "fcf_margin",
};

namespace detail {

inline std::optional<double> safe_ratio(std::optional<double> num, std::optional<double> den) {
  if (!num || !den || *den == 0.0) return std::nullopt;
  double r = *num / *den;
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

inline std::optional<double> difference(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

}  // namespace detail

/// Interest coverage divides EBIT by Net Interest Income as reported, so a
/// company with net interest expense (negative income) gets a negative ratio.
inline RatioSet compute_ratio_set(const AnnualStatement& stmt) {
  using detail::difference;
  using detail::safe_ratio;
  const auto& in = stmt.income;
  const auto& bs = stmt.balance;
  const auto& cf = stmt.cashflow;

  const auto revenue = in[IncomeItem::TotalRevenue];
  const auto gross_profit = difference(revenue, in[IncomeItem::CostOfRevenue]);
  const auto operating_income = difference(gross_profit, in[IncomeItem::OperatingExpenses]);
  const auto current_liabilities = bs[BalanceItem::CurrentLiabilities];

  RatioSet r;
  r.current_ratio = safe_ratio(bs[BalanceItem::CurrentAssets], current_liabilities);
  r.cash_ratio = safe_ratio(bs[BalanceItem::CashAndEquivalents], current_liabilities);
  r.quick_ratio = safe_ratio(difference(bs[BalanceItem::CurrentAssets], bs[BalanceItem::Inventory]),
                             current_liabilities);
  r.debt_to_asset = safe_ratio(bs[BalanceItem::TotalDebt], bs[BalanceItem::TotalAssets]);
  r.debt_to_equity = safe_ratio(bs[BalanceItem::TotalDebt], bs[BalanceItem::StockholdersEquity]);
  r.gross_margin = safe_ratio(gross_profit, revenue);
  r.operating_margin = safe_ratio(operating_income, revenue);
  r.ebitda_margin = safe_ratio(in[IncomeItem::Ebitda], revenue);
  r.net_margin = safe_ratio(in[IncomeItem::NetIncome], revenue);
  r.interest_coverage = safe_ratio(in[IncomeItem::Ebit], in[IncomeItem::NetInterestIncome]);
  r.fcf_margin = safe_ratio(cf[CashflowItem::FreeCashFlow], revenue);
  return r;
}

inline nlohmann::ordered_json ratio_set_to_json(const RatioSet& r) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  const auto values = r.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[std::string(kRatioNames[i])] =
        values[i] ? nlohmann::ordered_json(*values[i]) : nlohmann::ordered_json(nullptr);
  }
  return out;
}

}  // namespace fundacast
