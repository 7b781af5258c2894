#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ofilab/backtest.hpp"
#include "ofilab/error.hpp"

using namespace ofilab;
using namespace ofilab::backtest;

namespace {

double abs_sum(const std::vector<double>& w) {
  double s = 0;
  for (double v : w) s += std::abs(v);
  return s;
}

}  // namespace

TEST_CASE("forecast-implied weights") {
  const std::vector<double> sprd{0.001, 0.001};
  auto w = forecast_implied_weights(std::vector<double>{0.0005, -0.0002}, sprd, std::vector<double>{1, 1});
  CHECK(w.selected() == 0);
  CHECK(abs_sum(w.w) == 0.0);
  w = forecast_implied_weights(std::vector<double>{0.004, 0.0002}, sprd, std::vector<double>{1, 1});
  CHECK(w.w[0] == 1.0);
  CHECK(w.w[1] == 0.0);
  // f / sigma = (+2, -1) up to a common factor
  w = forecast_implied_weights(std::vector<double>{0.004, -0.003}, sprd, std::vector<double>{0.002, 0.003});
  CHECK(w.w[0] == doctest::Approx(2.0 / 3.0));
  CHECK(w.w[1] == doctest::Approx(-1.0 / 3.0));
  CHECK(abs_sum(w.w) == doctest::Approx(1.0));
}

TEST_CASE("zero or missing dispersion excludes a passing stock with a flag") {
  const auto w = forecast_implied_weights(std::vector<double>{0.004, 0.005}, std::vector<double>{0.001, 0.001},
                                          std::vector<double>{0.0, 0.002});
  CHECK(w.flagged);
  CHECK(w.w[0] == 0.0);
  CHECK(w.w[1] == 1.0);
  const auto nan = std::nan("");
  const auto v = forecast_implied_weights(std::vector<double>{nan, 0.005}, std::vector<double>{0.001, 0.001},
                                          std::vector<double>{0.001, 0.002});
  CHECK(v.w[0] == 0.0);
  CHECK(v.w[1] == 1.0);
}

TEST_CASE("decile thresholds follow the empirical-CDF infimum") {
  std::vector<double> s(10);
  for (int i = 0; i < 10; ++i) s[i] = i + 1;
  CHECK(decile_threshold(s, 9) == 9.0);
  CHECK(decile_threshold(s, 1) == 1.0);
  std::vector<double> t(20);
  for (int i = 0; i < 20; ++i) t[i] = i + 1;
  CHECK(decile_threshold(t, 9) == 18.0);
  CHECK(decile_threshold(t, 1) == 2.0);
}

TEST_CASE("long-short sets at N = 10 and N = 20") {
  std::vector<double> f10{3, 1, 4, 10, 5, 9, 2, 6, 8, 7};
  auto w = long_short_weights(f10);
  CHECK(w.longs == 1);
  CHECK(w.shorts == 0);
  CHECK(w.w[3] == 1.0);
  std::vector<double> f20(20);
  for (int i = 0; i < 20; ++i) f20[i] = 0.1 * (i + 1);
  w = long_short_weights(f20);
  CHECK(w.longs == 2);
  CHECK(w.shorts == 1);
  CHECK(w.w[19] == doctest::Approx(1.0 / 3));
  CHECK(w.w[18] == doctest::Approx(1.0 / 3));
  CHECK(w.w[0] == doctest::Approx(-1.0 / 3));
  w = long_short_weights(std::vector<double>(12, 0.5));
  CHECK(w.selected() == 0);
  CHECK(w.flagged);
}

TEST_CASE("symmetric deciles take equal counts") {
  std::vector<double> f(100);
  for (int i = 0; i < 100; ++i) f[i] = i;
  const auto lit = long_short_weights(f);
  CHECK(lit.longs == 10);
  CHECK(lit.shorts == 9);
  const auto sym = long_short_weights(f, true);
  CHECK(sym.longs == 10);
  CHECK(sym.shorts == 10);
}

TEST_CASE("portfolio weights always have unit or zero gross exposure") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 0.002);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 5 + static_cast<std::size_t>(trial % 40);
    std::vector<double> f(n), sprd(n), sig(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = 0.001 * z(rng);
      sprd[i] = u(rng);
      sig[i] = u(rng) + 1e-6;
    }
    const double a = abs_sum(forecast_implied_weights(f, sprd, sig).w);
    CHECK((a == 0.0 || std::abs(a - 1.0) <= 1e-12));
    const auto ls = long_short_weights(f);
    const double b = abs_sum(ls.w);
    CHECK((b == 0.0 || std::abs(b - 1.0) <= 1e-12));
    auto scaled = f;
    for (auto& v : scaled) v *= 3.7;
    CHECK(long_short_weights(scaled).w == ls.w);
  }
}

TEST_CASE("PnL uses simple returns") {
  CHECK(pnl(std::vector<double>{1, 0, 0}, std::vector<double>{0.01, 0.5, -0.2}) ==
        doctest::Approx(0.010050167084168058).epsilon(1e-15));
  CHECK(pnl(std::vector<double>{0, 0}, std::vector<double>{0.01, 0.02}) == 0.0);
  CHECK(pnl(std::vector<double>{0.5, -0.5}, std::vector<double>{0.03, 0.03}) == 0.0);
  // decomposition into single-stock PnLs
  const std::vector<double> w{0.2, -0.3, 0.5}, R{0.001, -0.004, 0.002};
  double parts = 0;
  for (std::size_t i = 0; i < 3; ++i) parts += pnl(std::vector<double>{w[i]}, std::vector<double>{R[i]});
  CHECK(pnl(w, R) == doctest::Approx(parts).epsilon(1e-15));
}

TEST_CASE("OFI-sign horizon strategy on a full trading day") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  std::vector<double> ofi(390), R(390);
  for (auto& v : ofi) v = z(rng);
  for (auto& v : R) v = 1e-4 * z(rng);
  const auto open = lob::Timestamp::from_hms(9, 30);
  const auto h = ofi_sign_pnl(ofi, R, 60, open, 60.0);
  CHECK(h.n == 330);
  CHECK(h.t_max == lob::Timestamp::from_hms(15, 0));
  CHECK(h.defined == 330);
  std::size_t prev = ofi.size();
  for (int p = 1; p <= 120; ++p) {
    const auto x = ofi_sign_pnl(ofi, R, p, open, 60.0);
    CHECK(x.n <= prev);
    prev = x.n;
  }
  CHECK_THROWS_AS(ofi_sign_pnl(ofi, R, 400, open, 60.0), Error);
  CHECK(ofi_sign_pnl(ofi, std::vector<double>(390, 0.0), 10, open, 60.0).pnl == 0.0);
}

TEST_CASE("horizon PnL telescopes and abstains on zero OFI") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> ofi(200), R(200);
  for (auto& v : ofi) v = z(rng);
  for (auto& v : R) v = z(rng);
  ofi[17] = 0;
  for (std::size_t t = 0; t < 100; ++t)
    for (int p = 1; p < 50; ++p) {
      const double d = position_pnl(ofi, R, t, p + 1) - position_pnl(ofi, R, t, p);
      CHECK(d == doctest::Approx(sign(ofi[t]) * R[t + static_cast<std::size_t>(p) + 1]).epsilon(1e-12));
    }
  CHECK(position_pnl(ofi, R, 17, 5) == 0.0);
  CHECK(std::isnan(position_pnl(ofi, R, 190, 20)));
  CHECK(sign(0.0) == 0);
  CHECK(sign(-2.0) == -1);
}

TEST_CASE("quarters of calendar dates") {
  CHECK(quarter_of("2019-05-02") == "2019Q2");
  CHECK(quarter_of("2017-01-03") == "2017Q1");
  CHECK(quarter_of("2018-12-31") == "2018Q4");
}
