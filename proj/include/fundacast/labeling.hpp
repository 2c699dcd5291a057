#pragma once

#include <cmath>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include "fundacast/error.hpp"
#include "fundacast/ingest.hpp"
#include "fundacast/valuation.hpp"

namespace fundacast {

/// 1 when the year closed at or above its opening price.
inline int aspd_label(double p_begin, double p_end) {
  if (!(p_begin > 0.0) || !(p_end > 0.0)) throw ValueError("prices must be positive");
  return p_end >= p_begin ? 1 : 0;
}

/// 1 when the intrinsic value is at or above the current price.
inline int dcspiv_label(double intrinsic, double p_current) {
  if (!(p_current > 0.0)) throw ValueError("current price must be positive");
  if (!std::isfinite(intrinsic)) throw ValueError("intrinsic value must be finite");
  return intrinsic >= p_current ? 1 : 0;
}

struct LabelRecord {
  std::string ticker;
  int year = 0;
  double p_ab = 0.0;
  double p_ae = 0.0;
  double p_cur = 0.0;
  std::optional<double> intrinsic;
  int aspd = 0;
  std::optional<int> dcspiv;
};

/// Labels one company-year. P_cur is the close on the last trading day of
/// the fiscal year unless `as_of` pins another date.
inline LabelRecord label_company_year(const CompanyRecord& company, int year,
                                      const std::optional<DcfValuation>& valuation,
                                      const std::optional<Date>& as_of = std::nullopt) {
  LabelRecord r;
  r.ticker = company.ticker;
  r.year = year;
  std::tie(r.p_ab, r.p_ae) = price_at_year_bounds(company.prices, year);
  r.p_cur = as_of ? close_on_or_before(company.prices, *as_of) : r.p_ae;
  r.aspd = aspd_label(r.p_ab, r.p_ae);
  if (valuation) {
    r.intrinsic = valuation->final_intrinsic_value;
    r.dcspiv = dcspiv_label(*r.intrinsic, r.p_cur);
  }
  return r;
}

inline std::string labels_to_csv(const std::vector<LabelRecord>& rows) {
  std::string out = "ticker,year,p_ab,p_ae,p_cur,intrinsic,aspd,dcspiv\n";
  for (const auto& r : rows) {
    out += r.ticker + ',' + std::to_string(r.year) + ',' + format_double(r.p_ab) + ',' +
           format_double(r.p_ae) + ',' + format_double(r.p_cur) + ',' +
           (r.intrinsic ? format_double(*r.intrinsic) : std::string()) + ',' + std::to_string(r.aspd) + ',' +
           (r.dcspiv ? std::to_string(*r.dcspiv) : std::string()) + '\n';
  }
  return out;
}

}  // namespace fundacast
