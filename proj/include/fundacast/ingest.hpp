#pragma once

// Typed company records and the canonical on-disk formats:
//   <ticker>.statements.json  {"ticker","sector","years":[{"fiscal_year","income","balance","cashflow"}]}
//   <ticker>.prices.csv       header `date,close`, ISO-8601 dates
//   universe.json             market inputs and per-company valuation inputs

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fundacast/error.hpp"
#include "fundacast/schema.hpp"

namespace fundacast {

using Date = std::chrono::year_month_day;

struct AnnualStatement {
  int fiscal_year = 0;
  IncomeStatement income;
  BalanceSheet balance;
  CashflowStatement cashflow;

  friend bool operator==(const AnnualStatement&, const AnnualStatement&) = default;
};

struct PriceObservation {
  Date date;
  double close = 0.0;

  friend bool operator==(const PriceObservation&, const PriceObservation&) = default;
};

struct PriceSeries {
  std::vector<PriceObservation> observations;

  friend bool operator==(const PriceSeries&, const PriceSeries&) = default;
};

struct CompanyRecord {
  std::string ticker;
  std::string sector;
  std::vector<AnnualStatement> statements;
  PriceSeries prices;

  const AnnualStatement* statement_for(int year) const {
    for (const auto& s : statements) {
      if (s.fiscal_year == year) return &s;
    }
    return nullptr;
  }

  friend bool operator==(const CompanyRecord&, const CompanyRecord&) = default;
};

inline constexpr std::size_t kMaxStatementsPerCompany = 5;

// ---------------------------------------------------------------------------
// Formatting helpers

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

inline Date parse_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  auto bad = [&] { return SchemaError("malformed ISO-8601 date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  auto parse_part = [&](std::string_view part, auto& out) {
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc{} || p != part.data() + part.size()) throw bad();
  };
  parse_part(text.substr(0, 4), y);
  parse_part(text.substr(5, 2), m);
  parse_part(text.substr(8, 2), d);
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw bad();
  return date;
}

// ---------------------------------------------------------------------------
// Statements

namespace detail {

template <typename Items, std::size_t N>
Items parse_section(const nlohmann::json& obj, const std::array<std::string_view, N>& keys,
                    std::string_view section, const std::string& where) {
  if (!obj.is_object()) throw SchemaError(where + ": section '" + std::string(section) + "' is not an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw SchemaError(where + ": unknown " + std::string(section) + " key '" + key + "'");
    }
  }
  Items items;
  for (std::size_t i = 0; i < N; ++i) {
    auto it = obj.find(std::string(keys[i]));
    if (it == obj.end()) {
      throw SchemaError(where + ": missing " + std::string(section) + " key '" + std::string(keys[i]) + "'");
    }
    if (it->is_null()) continue;
    if (!it->is_number()) {
      throw SchemaError(where + ": " + std::string(section) + " key '" + std::string(keys[i]) + "' is not a number");
    }
    double v = it->get<double>();
    if (!std::isfinite(v)) {
      throw ValueError(where + ": non-finite value for '" + std::string(keys[i]) + "'");
    }
    items.at(i) = v;
  }
  return items;
}

template <typename Items, std::size_t N>
nlohmann::ordered_json section_to_json(const Items& items, const std::array<std::string_view, N>& keys) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < N; ++i) {
    const auto& v = items.at(i);
    out[std::string(keys[i])] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

struct StatementsFile {
  std::string ticker;
  std::string sector;
  std::vector<AnnualStatement> statements;
};

/// Parses and validates a statements document.
inline StatementsFile parse_statements(const nlohmann::json& doc, const std::string& where = "statements") {
  if (!doc.is_object()) throw SchemaError(where + ": top level is not an object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "ticker" && key != "sector" && key != "years") {
      throw SchemaError(where + ": unknown top-level key '" + key + "'");
    }
  }
  for (const char* key : {"ticker", "sector", "years"}) {
    if (!doc.contains(key)) throw SchemaError(where + ": missing top-level key '" + std::string(key) + "'");
  }
  if (!doc["ticker"].is_string() || !doc["sector"].is_string() || !doc["years"].is_array()) {
    throw SchemaError(where + ": wrong type for ticker/sector/years");
  }
  StatementsFile out;
  out.ticker = doc["ticker"].get<std::string>();
  out.sector = doc["sector"].get<std::string>();
  if (out.ticker.empty()) throw SchemaError(where + ": empty ticker");

  for (const auto& entry : doc["years"]) {
    if (!entry.is_object()) throw SchemaError(where + ": year entry is not an object");
    for (const auto& [key, _] : entry.items()) {
      if (key != "fiscal_year" && key != "income" && key != "balance" && key != "cashflow") {
        throw SchemaError(where + ": unknown year key '" + key + "'");
      }
    }
    for (const char* key : {"fiscal_year", "income", "balance", "cashflow"}) {
      if (!entry.contains(key)) throw SchemaError(where + ": missing year key '" + std::string(key) + "'");
    }
    if (!entry["fiscal_year"].is_number_integer()) throw SchemaError(where + ": fiscal_year must be an integer");
    AnnualStatement s;
    s.fiscal_year = entry["fiscal_year"].get<int>();
    const std::string at = where + " [" + std::to_string(s.fiscal_year) + "]";
    s.income = detail::parse_section<IncomeStatement>(entry["income"], kIncomeKeys, "income", at);
    s.balance = detail::parse_section<BalanceSheet>(entry["balance"], kBalanceKeys, "balance", at);
    s.cashflow = detail::parse_section<CashflowStatement>(entry["cashflow"], kCashflowKeys, "cashflow", at);
    if (!out.statements.empty() && s.fiscal_year <= out.statements.back().fiscal_year) {
      throw OrderingError(where + ": fiscal years not strictly increasing at " + std::to_string(s.fiscal_year));
    }
    out.statements.push_back(std::move(s));
  }
  if (out.statements.empty() || out.statements.size() > kMaxStatementsPerCompany) {
    throw SchemaError(where + ": expected 1 to 5 annual statements, got " +
                      std::to_string(out.statements.size()));
  }
  return out;
}

inline nlohmann::ordered_json statements_to_json(const CompanyRecord& company) {
  nlohmann::ordered_json doc;
  doc["ticker"] = company.ticker;
  doc["sector"] = company.sector;
  auto years = nlohmann::ordered_json::array();
  for (const auto& s : company.statements) {
    nlohmann::ordered_json entry;
    entry["fiscal_year"] = s.fiscal_year;
    entry["income"] = detail::section_to_json(s.income, kIncomeKeys);
    entry["balance"] = detail::section_to_json(s.balance, kBalanceKeys);
    entry["cashflow"] = detail::section_to_json(s.cashflow, kCashflowKeys);
    years.push_back(std::move(entry));
  }
  doc["years"] = std::move(years);
  return doc;
}

// ---------------------------------------------------------------------------
// Prices

inline PriceSeries parse_prices_csv(std::string_view text, const std::string& where = "prices") {
  PriceSeries series;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "date,close") throw SchemaError(where + ": expected header 'date,close'");
      header_seen = true;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
      throw SchemaError(where + ":" + std::to_string(line_no) + ": expected two columns");
    }
    PriceObservation obs;
    obs.date = parse_date(line.substr(0, comma));
    auto num = line.substr(comma + 1);
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), obs.close);
    if (ec != std::errc{} || p != num.data() + num.size()) {
      throw SchemaError(where + ":" + std::to_string(line_no) + ": malformed close '" + std::string(num) + "'");
    }
    if (!std::isfinite(obs.close) || obs.close <= 0.0) {
      throw ValueError(where + ":" + std::to_string(line_no) + ": close must be finite and positive");
    }
    if (!series.observations.empty() && obs.date <= series.observations.back().date) {
      throw OrderingError(where + ":" + std::to_string(line_no) + ": dates not strictly increasing");
    }
    series.observations.push_back(obs);
  }
  if (!header_seen) throw SchemaError(where + ": empty price file");
  return series;
}

inline std::string prices_to_csv(const PriceSeries& series) {
  std::string out = "date,close\n";
  for (const auto& o : series.observations) {
    out += format_date(o.date);
    out += ',';
    out += format_double(o.close);
    out += '\n';
  }
  return out;
}

/// Closes of the first and last trading observation within `year`.
inline std::pair<double, double> price_at_year_bounds(const PriceSeries& series, int year) {
  const std::chrono::year y{year};
  const PriceObservation* first = nullptr;
  const PriceObservation* last = nullptr;
  for (const auto& o : series.observations) {
    if (o.date.year() != y) continue;
    if (!first) first = &o;
    last = &o;
  }
  if (!first) throw NoDataError("no price observations in " + std::to_string(year));
  return {first->close, last->close};
}

/// Close of the last observation on or before `date`.
inline double close_on_or_before(const PriceSeries& series, const Date& date) {
  const PriceObservation* found = nullptr;
  for (const auto& o : series.observations) {
    if (o.date > date) break;
    found = &o;
  }
  if (!found) throw NoDataError("no price observation on or before " + format_date(date));
  return found->close;
}

// ---------------------------------------------------------------------------
// Universe

inline CompanyRecord load_company(const std::filesystem::path& statements_path,
                                  const std::filesystem::path& prices_path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(statements_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(statements_path.string() + ": " + e.what());
  }
  auto parsed = parse_statements(doc, statements_path.filename().string());
  CompanyRecord rec;
  rec.ticker = std::move(parsed.ticker);
  rec.sector = std::move(parsed.sector);
  rec.statements = std::move(parsed.statements);
  rec.prices = parse_prices_csv(detail::read_file(prices_path), prices_path.filename().string());
  return rec;
}

/// Loads every `<ticker>.statements.json` + `<ticker>.prices.csv` pair in
/// `dir`, sorted by ticker.
inline std::vector<CompanyRecord> load_universe(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  constexpr std::string_view kSuffix = ".statements.json";
  if (!fs::is_directory(dir)) throw SchemaError("not a directory: " + dir.string());
  std::vector<std::string> tickers;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > kSuffix.size() && name.ends_with(kSuffix)) {
      tickers.push_back(name.substr(0, name.size() - kSuffix.size()));
    }
  }
  std::sort(tickers.begin(), tickers.end());
  std::vector<CompanyRecord> out;
  out.reserve(tickers.size());
  for (const auto& t : tickers) {
    const fs::path prices = dir / (t + ".prices.csv");
    if (!fs::exists(prices)) throw SchemaError("missing price file for " + t);
    auto rec = load_company(dir / (t + std::string(kSuffix)), prices);
    if (rec.ticker != t) {
      throw SchemaError(t + ".statements.json declares ticker '" + rec.ticker + "'");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

/// Valuation inputs that do not come from the statements themselves.
struct CompanyInputs {
  std::string ticker;
  std::string sector;
  double beta = 1.0;
  std::optional<double> ev_ebitda_multiple;
  /// Consensus growth rate per fiscal year.
  std::map<int, double> analyst_growth;
};

struct UniverseManifest {
  double risk_free_rate = 0.0;
  double market_return = 0.0;
  std::vector<CompanyInputs> companies;

  const CompanyInputs* find(std::string_view ticker) const {
    for (const auto& c : companies) {
      if (c.ticker == ticker) return &c;
    }
    return nullptr;
  }
};

inline UniverseManifest parse_manifest(const nlohmann::json& doc) {
  auto require_number = [](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_number()) {
      throw SchemaError(where + ": '" + key + "' must be a number");
    }
    double v = obj[key].get<double>();
    if (!std::isfinite(v)) throw ValueError(where + ": '" + key + "' is not finite");
    return v;
  };
  if (!doc.is_object() || !doc.contains("market") || !doc.contains("companies") ||
      !doc["companies"].is_array()) {
    throw SchemaError("universe.json: expected {\"market\": {...}, \"companies\": [...]}");
  }
  UniverseManifest m;
  m.risk_free_rate = require_number(doc["market"], "risk_free_rate", "universe.json market");
  m.market_return = require_number(doc["market"], "market_return", "universe.json market");
  for (const auto& c : doc["companies"]) {
    CompanyInputs in;
    if (!c.contains("ticker") || !c["ticker"].is_string() || !c.contains("sector") || !c["sector"].is_string()) {
      throw SchemaError("universe.json: company entries need string ticker and sector");
    }
    in.ticker = c["ticker"].get<std::string>();
    in.sector = c["sector"].get<std::string>();
    const std::string where = "universe.json " + in.ticker;
    if (c.contains("beta")) in.beta = require_number(c, "beta", where);
    if (c.contains("ev_ebitda_multiple") && !c["ev_ebitda_multiple"].is_null()) {
      in.ev_ebitda_multiple = require_number(c, "ev_ebitda_multiple", where);
    }
    if (c.contains("analyst_growth")) {
      if (!c["analyst_growth"].is_object()) throw SchemaError(where + ": analyst_growth must map year -> rate");
      for (const auto& [year, rate] : c["analyst_growth"].items()) {
        if (!rate.is_number()) throw SchemaError(where + ": analyst_growth values must be numbers");
        int y = 0;
        auto [p, ec] = std::from_chars(year.data(), year.data() + year.size(), y);
        if (ec != std::errc{} || p != year.data() + year.size()) {
          throw SchemaError(where + ": analyst_growth key '" + year + "' is not a year");
        }
        in.analyst_growth[y] = rate.get<double>();
      }
    }
    if (m.find(in.ticker)) throw SchemaError("universe.json: duplicate ticker " + in.ticker);
    m.companies.push_back(std::move(in));
  }
  std::sort(m.companies.begin(), m.companies.end(),
            [](const CompanyInputs& a, const CompanyInputs& b) { return a.ticker < b.ticker; });
  return m;
}

inline UniverseManifest load_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "universe.json";
  try {
    return parse_manifest(nlohmann::json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace fundacast
