#pragma once

// Raw statement line items used as model features. Key strings are the
// canonical JSON keys of `<ticker>.statements.json`.

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace fundacast {

enum class IncomeItem : std::size_t {
  TotalRevenue,
  CostOfRevenue,
  SellingGeneralAdministrative,
  ResearchDevelopment,
  OperatingExpenses,
  NetIncome,
  DilutedEps,
  DilutedAverageShares,
  NetInterestIncome,
  Ebitda,
  Ebit,
};

enum class BalanceItem : std::size_t {
  LongTermDebt,
  TotalDebt,
  InvestedCapital,
  WorkingCapital,
  StockholdersEquity,
  RetainedEarnings,
  TotalAssets,
  CashAndEquivalents,
  Inventory,
  GrossPpe,
  CurrentAssets,
  CurrentLiabilities,
  TotalLiabilities,
};

enum class CashflowItem : std::size_t {
  NetIncome,
  DepreciationAmortization,
  GainLossOnBusinessSale,
  ImpairmentCharge,
  ChangeInWorkingCapital,
  OperatingCashFlow,
  NetPpePurchaseAndSale,
  NetTangiblePurchaseAndSale,
  NetBusinessPurchaseAndSale,
  NetInvestmentPurchaseAndSale,
  InvestingCashFlow,
  NetCommonStockIssuance,
  RepurchaseOfCapitalStock,
  CashDividendsPaid,
  FinancingCashFlow,
  ChangeInCash,
  CapitalExpenditures,
  IssuanceOfDebt,
  RepaymentOfDebt,
  FreeCashFlow,
};

inline constexpr std::array<std::string_view, 11> kIncomeKeys = {
    "Total Revenue",        "Cost of Revenue",     "SG&A",
    "R&D",                  "Operating Expenses",  "Net Income",
    "Diluted EPS",          "Diluted Average Shares",
    "Net Interest Income",  "EBITDA",              "EBIT",
};

inline constexpr std::array<std::string_view, 13> kBalanceKeys = {
    "Long Term Debt",      "Total Debt",          "Invested Capital",
    "Working Capital",     "Stockholders Equity", "Retained Earnings",
    "Total Asset",         "Cash & Cash Equiv",   "Inventory",
    "Gross PPE",           "Current Assets",      "Current Liabilities",
    "Total Liabilities",
};

inline constexpr std::array<std::string_view, 20> kCashflowKeys = {
    "Net Income",
    "Depreciation & Amortization",
    "Gain/Loss on Business Sale",
    "Impairment Charge",
    "Change in Working Cap",
    "Operating Cash Flow",
    "Net PPE and Sale",
    "Net Tangible Purchase and Sale",
    "Net Business Purchase and Sale",
    "Net Investment Purchase and Sale",
    "Investing Cash Flow",
    "Net Common Stock Issuance",
    "Repurchase of Capital Stock",
    "Cash Dividends Paid",
    "Financing Cash Flow",
    "Change in Cash",
    "Capital Expenditures",
    "Issuance of Debt",
    "Repayment of Debt",
    "Free Cash Flow",
};

inline constexpr std::size_t kRawFeatureCount =
    kIncomeKeys.size() + kBalanceKeys.size() + kCashflowKeys.size();
static_assert(kRawFeatureCount == 44);

/// Fixed set of line items indexed by a strongly typed enum. An empty
/// optional is the MISSING marker.
template <typename Item, std::size_t N>
class LineItems {
 public:
  using value_type = std::optional<double>;
  static constexpr std::size_t size() { return N; }

  value_type& operator[](Item item) { return values_[static_cast<std::size_t>(item)]; }
  const value_type& operator[](Item item) const { return values_[static_cast<std::size_t>(item)]; }

  value_type& at(std::size_t i) { return values_.at(i); }
  const value_type& at(std::size_t i) const { return values_.at(i); }

  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  friend bool operator==(const LineItems&, const LineItems&) = default;

 private:
  std::array<value_type, N> values_{};
};

using IncomeStatement = LineItems<IncomeItem, kIncomeKeys.size()>;
using BalanceSheet = LineItems<BalanceItem, kBalanceKeys.size()>;
using CashflowStatement = LineItems<CashflowItem, kCashflowKeys.size()>;

}  // namespace fundacast
