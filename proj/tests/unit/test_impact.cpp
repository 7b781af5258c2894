#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "ofilab/error.hpp"
#include "ofilab/impact.hpp"
#include "ofilab/pipeline.hpp"
#include "support.hpp"

using namespace ofilab;
using namespace ofilab::impact;

namespace {

const pipeline::PanelSet& shared_panels() {
  static const pipeline::PanelSet panels = [] {
    pipeline::RunConfig cfg;
    cfg.synth = support::small_market(3, 2, 101);
    cfg.synth.cross_links = {{0, 1, 1, 0.8, 6}, {1, 2, 3, 0.6, 0}};
    return pipeline::build_panels_synth(cfg);
  }();
  return panels;
}

std::vector<ModelSpec> specs(const std::vector<std::string>& names) {
  std::vector<ModelSpec> out;
  for (const auto& n : names) out.push_back(parse_model(n));
  return out;
}

}  // namespace

TEST_CASE("model names parse into specs and unknown names name the field") {
  const auto ci = parse_model("CI1");
  CHECK(ci.cross);
  CHECK(ci.solver == Solver::lasso_cv);
  CHECK_FALSE(ci.forward);
  const auto pi = parse_model("PI7");
  CHECK(pi.levels == 7);
  CHECK(pi.solver == Solver::ols);
  CHECK(parse_model("FCR").input == Input::log_return);
  CHECK(parse_model("PIMI").input == Input::common_factor);
  try {
    parse_model("PI99");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
    CHECK(e.field() == "models");
  }
  CHECK(known_models().size() >= 15);
}

TEST_CASE("default protocol gives ten 180-row windows per day") {
  const auto& p = shared_panels();
  const auto w = session_windows(p.fine, Protocol{});
  REQUIRE(w.size() == 10);
  for (const auto& s : w) {
    CHECK(s.fit_end - s.fit_begin == 180);
    CHECK(s.oos_end - s.oos_begin == 180);
    CHECK(s.oos_begin == s.fit_end);
  }
  Protocol minute;
  minute.cadence_minutes = 1;
  const auto m = session_windows(p.fine, minute);
  CHECK(m.size() == 300);  // starts 10:00..14:59, each evaluated on the following minute
}

TEST_CASE("contemporaneous fits: counts, nesting, residual identities") {
  const auto& p = shared_panels();
  std::vector<std::string> names;
  for (int m = 1; m <= 10; ++m) names.push_back("PI" + std::to_string(m));
  const auto rep = run_contemporaneous(p.fine, specs(names), Protocol{});
  // day 0 has no prior-day volatility, so only day 1 is fitted
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> by_key;
  for (const auto& f : rep.fits) {
    CHECK(f.day == 1);
    CHECK(f.n_fit == 180);
    CHECK(f.is_r2 <= f.is_r2_raw);
    by_key[{f.day, f.stock, f.window}].push_back(f.is_r2_raw);
  }
  CHECK(by_key.size() == 30);
  for (const auto& [k, r2] : by_key) {
    REQUIRE(r2.size() == 10);
    for (std::size_t m = 1; m < r2.size(); ++m) CHECK(r2[m] >= r2[m - 1] - 1e-12);
  }
}

TEST_CASE("scaling normalized returns leaves every R^2 unchanged") {
  auto panel = shared_panels().fine;
  const auto models = specs({"PI1", "PII", "CI1"});
  const auto a = run_contemporaneous(panel, models, Protocol{});
  for (auto& day : panel.rows)
    for (auto& stock : day)
      for (auto& row : stock) row.r *= 7.5;
  const auto b = run_contemporaneous(panel, models, Protocol{});
  REQUIRE(a.fits.size() == b.fits.size());
  for (std::size_t i = 0; i < a.fits.size(); ++i) {
    CHECK(a.fits[i].is_r2 == doctest::Approx(b.fits[i].is_r2).epsilon(1e-8));
    CHECK(a.fits[i].oos_r2 == doctest::Approx(b.fits[i].oos_r2).epsilon(1e-8));
  }
}

TEST_CASE("contemporaneous report is independent of the thread budget") {
  const auto& p = shared_panels();
  Protocol one, many;
  many.threads = 4;
  const auto models = specs({"PI1", "CI1", "PIM"});
  const auto a = run_contemporaneous(p.fine, models, one);
  const auto b = run_contemporaneous(p.fine, models, many);
  REQUIRE(a.fits.size() == b.fits.size());
  for (std::size_t i = 0; i < a.fits.size(); ++i) {
    CHECK(a.fits[i].model == b.fits[i].model);
    CHECK(a.fits[i].oos_r2 == b.fits[i].oos_r2);
    CHECK(a.fits[i].cross == b.fits[i].cross);
  }
}

TEST_CASE("comparisons pair identical window keys") {
  const auto& p = shared_panels();
  const auto rep = run_contemporaneous(p.fine, specs({"PI1", "CI1"}), Protocol{});
  auto fits = rep.fits;
  // drop one CI1 window: the comparison must shrink, not misalign
  for (auto it = fits.begin(); it != fits.end(); ++it)
    if (it->model == "CI1") {
      fits.erase(it);
      break;
    }
  const auto row = compare(fits, "PI1", "CI1", true);
  CHECK(row.test.n == 29);
}

TEST_CASE("forward forecasts use only past buckets and beat own-flow models on a planted lead-lag") {
  const auto& p = shared_panels();
  ForwardProtocol fp;
  const auto fpi = run_forward(p.coarse, parse_model("FPI1"), fp);
  const auto fci = run_forward(p.coarse, parse_model("FCI1"), fp);
  REQUIRE(fpi.days.size() == fci.days.size());
  for (const auto& d : fci.days) {
    REQUIRE(!d.times.empty());
    // first forecast needs 30 pairs plus 3 lags inside the session
    CHECK(d.times.front() >= lob::Timestamp::from_hms(10, 32));
    CHECK(d.times.back() < lob::Timestamp::from_hms(15, 30));
  }
  std::vector<double> a, b;
  for (const auto& blk : fpi.blocks)
    if (blk.stock == 1) a.push_back(blk.oos_r2);
  for (const auto& blk : fci.blocks)
    if (blk.stock == 1) b.push_back(blk.oos_r2);
  REQUIRE(a.size() == b.size());
  const auto t = regression::delta_r2_test(a, b);
  CHECK(t.mean_delta > 0);
  CHECK(t.p_value < 0.01);
}

TEST_CASE("an autoregression on white noise has no out-of-sample skill") {
  auto panel = shared_panels().coarse;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z(0.0, 1e-4);
  for (auto& day : panel.rows)
    for (auto& stock : day)
      for (auto& row : stock) row.R = z(rng);
  const auto rep = run_forward(panel, parse_model("FAR"), ForwardProtocol{});
  double sum = 0;
  std::size_t n = 0;
  for (const auto& b : rep.blocks)
    if (std::isfinite(b.oos_r2)) {
      sum += b.oos_r2;
      ++n;
    }
  REQUIRE(n >= 20);
  CHECK(sum / static_cast<double>(n) <= 0.0);
}

TEST_CASE("constant returns give constant forecasts and undefined OOS R^2") {
  auto panel = shared_panels().coarse;
  for (auto& day : panel.rows)
    for (auto& stock : day)
      for (auto& row : stock) row.R = 1e-4;
  const auto rep = run_forward(panel, parse_model("FPI1"), ForwardProtocol{});
  for (const auto& d : rep.days)
    for (const auto& f : d.forecast)
      for (double v : f)
        if (std::isfinite(v)) CHECK(v == doctest::Approx(1e-4).epsilon(1e-9));
  for (const auto& b : rep.blocks) CHECK(std::isnan(b.oos_r2));
}

TEST_CASE("horizon impact recovers planted lag coefficients") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  const std::size_t n = 20000;
  std::vector<double> ofi(n), r(n, 0.0);
  for (auto& v : ofi) v = z(rng);
  const double beta[3] = {0.2, -0.05, -0.05};
  for (std::size_t t = 3; t < n; ++t) r[t] = beta[0] * ofi[t - 1] + beta[1] * ofi[t - 2] + beta[2] * ofi[t - 3] + 0.05 * z(rng);
  const auto fit = fit_horizon_impact(r, ofi, 3);
  for (int s = 0; s < 3; ++s) CHECK(fit.beta[static_cast<std::size_t>(s)] == doctest::Approx(beta[s]).epsilon(0.02));
  CHECK(fit.cumsum[0] == doctest::Approx(0.2).epsilon(0.02));
  CHECK(fit.cumsum[1] == doctest::Approx(0.15).epsilon(0.02));
  CHECK(fit.cumsum[2] == doctest::Approx(0.10).epsilon(0.02));
  // telescoping
  for (std::size_t k = 1; k < 3; ++k) CHECK(fit.cumsum[k] - fit.cumsum[k - 1] == doctest::Approx(fit.beta[k]));
  CHECK_THROWS_AS(fit_horizon_impact(r, ofi, 0), Error);
  CHECK_THROWS_AS(fit_horizon_impact({1, 2, 3}, {1, 2, 3}, 2), Error);
}

TEST_CASE("horizon impact with a single planted lag") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  std::vector<double> ofi(5000), r(5000, 0.0);
  for (auto& v : ofi) v = z(rng);
  for (std::size_t t = 1; t < r.size(); ++t) r[t] = 0.3 * ofi[t - 1] + 0.1 * z(rng);
  const auto fit = fit_horizon_impact(r, ofi, 5);
  CHECK(fit.beta[0] == doctest::Approx(0.3).epsilon(0.02));
  for (std::size_t s = 1; s < 5; ++s) CHECK(std::abs(fit.beta[s]) < 0.01);
}

TEST_CASE("quartile labels") {
  CHECK(quartile_labels({8, 1, 7, 2, 6, 3, 5, 4}) == std::vector<int>{3, 0, 3, 0, 2, 1, 2, 1});
  CHECK(quartile_labels({1, 1, 1, 1}) == std::vector<int>{0, 0, 0, 0});
  // a tie spanning a boundary stays in the lower bucket
  CHECK(quartile_labels({1, 2, 2, 3}) == std::vector<int>{0, 1, 1, 3});
  CHECK_THROWS_AS(quartile_labels({1, 2, 3}), Error);
}
