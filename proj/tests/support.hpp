#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <unistd.h>

#include "fundacast/ingest.hpp"
#include "fundacast/random.hpp"
#include "fundacast/valuation.hpp"

namespace testing {

inline const std::filesystem::path kSourceDir = FUNDACAST_SOURCE_DIR;
inline const std::filesystem::path kFixtureUniverse = kSourceDir / "fixtures" / "universe";

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("fundacast-test-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A statement with every line drawn at random; some lines are missing and
/// some are exactly zero so the UNDEFINED paths get exercised.
inline fundacast::AnnualStatement random_statement(fundacast::Rng& rng, int year = 2021, double missing = 0.05,
                                                   double zero = 0.05) {
  fundacast::AnnualStatement s;
  s.fiscal_year = year;
  auto draw = [&]() -> std::optional<double> {
    const double u = rng.uniform();
    if (u < missing) return std::nullopt;
    if (u < missing + zero) return 0.0;
    const double magnitude = std::exp(rng.uniform(std::log(1e3), std::log(1e11)));
    return rng.uniform() < 0.15 ? -magnitude : magnitude;
  };
  for (std::size_t i = 0; i < s.income.size(); ++i) s.income.at(i) = draw();
  for (std::size_t i = 0; i < s.balance.size(); ++i) s.balance.at(i) = draw();
  for (std::size_t i = 0; i < s.cashflow.size(); ++i) s.cashflow.at(i) = draw();
  return s;
}

/// Statement lines addressed by their published names, read back from the
/// canonical JSON form so the lookup is independent of the enum layout.
inline std::map<std::string, std::optional<double>> lines_by_name(const fundacast::AnnualStatement& s) {
  fundacast::CompanyRecord c;
  c.ticker = "X";
  c.sector = "X";
  c.statements = {s};
  const auto doc = fundacast::statements_to_json(c)["years"][0];
  std::map<std::string, std::optional<double>> out;
  for (const char* section : {"income", "balance", "cashflow"}) {
    for (const auto& [k, v] : doc[section].items()) {
      const std::string key = std::string(section) + "/" + k;
      out[key] = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    }
  }
  return out;
}

/// Positive-cash-flow DCF inputs spread over several orders of magnitude.
inline fundacast::DcfInputs random_dcf_inputs(fundacast::Rng& rng) {
  fundacast::DcfInputs in;
  in.base_revenue = std::exp(rng.uniform(std::log(1e6), std::log(1e11)));
  in.base_ebitda = in.base_revenue * rng.uniform(0.02, 0.5);
  in.base_free_cash_flow = in.base_ebitda * rng.uniform(0.1, 0.9);
  in.ev_ebitda_multiple = rng.uniform(0.0, 20.0);
  in.beta = rng.uniform(0.2, 2.0);
  in.risk_free_rate = rng.uniform(0.0, 0.06);
  in.market_return = rng.uniform(0.04, 0.14);
  in.net_debt = in.base_ebitda * rng.uniform(-2.0, 4.0);
  in.shares_outstanding = std::round(in.base_revenue / rng.uniform(5.0, 200.0));
  in.horizon_years = 1 + static_cast<int>(rng.below(6));
  for (auto& g : in.growth_rates) g = rng.uniform(-0.2, 0.4);
  return in;
}

inline double relative_error(double a, double b) {
  if (a == b) return 0.0;
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace testing
