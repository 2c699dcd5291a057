#include <catch_amalgamated.hpp>

#include "fundacast/labeling.hpp"
#include "oracles.hpp"

using namespace fundacast;

TEST_CASE("ASPD label", "[labeling]") {
  CHECK(aspd_label(100, 120) == 1);
  CHECK(aspd_label(100, 100) == 1);
  CHECK(aspd_label(100, 99.99) == 0);
  CHECK_THROWS_AS(aspd_label(0, 10), ValueError);
  CHECK_THROWS_AS(aspd_label(10, -1), ValueError);
}

TEST_CASE("DCSPIV label", "[labeling]") {
  CHECK(dcspiv_label(150, 100) == 1);
  CHECK(dcspiv_label(100, 100) == 1);
  CHECK(dcspiv_label(80, 100) == 0);
  // a negative intrinsic value is a legitimate overvaluation signal
  CHECK(dcspiv_label(-5, 100) == 0);
  CHECK_THROWS_AS(dcspiv_label(100, 0), ValueError);
}

TEST_CASE("labels match the literal definitions", "[labeling]") {
  Rng rng(10);
  for (int i = 0; i < 10000; ++i) {
    const double a = std::round(rng.uniform(0.01, 500.0) * 100.0) / 100.0;
    const double b = rng.uniform() < 0.1 ? a : std::round(rng.uniform(0.01, 500.0) * 100.0) / 100.0;
    REQUIRE(aspd_label(a, b) == oracle::aspd(a, b));
    REQUIRE(dcspiv_label(b, a) == oracle::dcspiv(b, a));
  }
}

TEST_CASE("labels are invariant to a common scale", "[labeling]") {
  Rng rng(12);
  for (int i = 0; i < 2000; ++i) {
    const double a = rng.uniform(1.0, 100.0), b = rng.uniform(1.0, 100.0);
    const double k = std::pow(2.0, static_cast<double>(rng.below(20)) - 10.0);
    CHECK(aspd_label(k * a, k * b) == aspd_label(a, b));
    CHECK(dcspiv_label(k * a, k * b) == dcspiv_label(a, b));
  }
}

TEST_CASE("raising the opening price never turns ASPD on", "[labeling]") {
  Rng rng(13);
  for (int i = 0; i < 2000; ++i) {
    const double p_ab = rng.uniform(1.0, 100.0), p_ae = rng.uniform(1.0, 100.0);
    if (aspd_label(p_ab, p_ae) == 0) CHECK(aspd_label(p_ab + rng.uniform(0.0, 50.0), p_ae) == 0);
  }
}

TEST_CASE("company-year labeling uses the fiscal-year closes", "[labeling]") {
  CompanyRecord c;
  c.ticker = "T";
  for (auto [d, p] : std::vector<std::pair<const char*, double>>{
           {"2020-12-31", 9}, {"2021-01-04", 10}, {"2021-06-01", 12}, {"2021-12-31", 8}, {"2022-01-03", 20}}) {
    c.prices.observations.push_back({parse_date(d), p});
  }
  DcfValuation v;
  v.final_intrinsic_value = 9.0;

  auto r = label_company_year(c, 2021, v);
  CHECK(r.p_ab == 10);
  CHECK(r.p_ae == 8);
  CHECK(r.p_cur == 8);
  CHECK(r.aspd == 0);
  CHECK(r.dcspiv == 1);

  r = label_company_year(c, 2021, v, parse_date("2021-07-01"));
  CHECK(r.p_cur == 12);
  CHECK(r.dcspiv == 0);

  r = label_company_year(c, 2021, std::nullopt);
  CHECK_FALSE(r.dcspiv);
  CHECK_FALSE(r.intrinsic);
  CHECK_THROWS_AS(label_company_year(c, 2019, v), NoDataError);

  const auto csv = labels_to_csv({label_company_year(c, 2021, v), label_company_year(c, 2021, std::nullopt)});
  CHECK(csv == "ticker,year,p_ab,p_ae,p_cur,intrinsic,aspd,dcspiv\nT,2021,10,8,8,9,0,1\nT,2021,10,8,8,,0,\n");
}
