// Acceptance checks: one PASS/FAIL line per criterion. Tolerances and time
// budgets are pinned here; the exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "ofilab/backtest.hpp"
#include "ofilab/factor.hpp"
#include "ofilab/features.hpp"
#include "ofilab/impact.hpp"
#include "ofilab/netview.hpp"
#include "ofilab/pipeline.hpp"
#include "ofilab/regression.hpp"
#include "ofilab/synth.hpp"
#include "support.hpp"

using namespace ofilab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---- tolerances and budgets ------------------------------------------------
constexpr double kRatioSumTol = 1e-9;
constexpr double kEigenResidualTol = 1e-8;
constexpr double kOlsMatchTol = 1e-6;
constexpr double kKktTol = 1e-6;
constexpr double kSlopeRelTol = 1e-6;
constexpr double kShareTolPoints = 3.0;
constexpr double kAbsorbIntegratedMax = 0.5;
constexpr double kAbsorbBestMin = 2.0;
constexpr double kForwardP = 0.01;
constexpr double kGrossTol = 1e-12;
constexpr double kSpectralTol = 1e-8;

// ---- independent references ------------------------------------------------

Eigen::MatrixXd standardize(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z = x.rowwise() - x.colwise().mean();
  for (Eigen::Index j = 0; j < z.cols(); ++j) z.col(j) /= std::sqrt(z.col(j).squaredNorm() / static_cast<double>(z.rows()));
  return z;
}

// Worst subgradient violation of RSS + lambda |b|_1 on the standardized design.
double kkt_violation(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const regression::Fit& f, double lambda) {
  const Eigen::MatrixXd z = standardize(x);
  const Eigen::VectorXd grad = 2.0 * z.transpose() * (y - f.predict(x));
  double worst = std::abs((y - f.predict(x)).sum());  // intercept condition
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (f.beta(j) != 0) {
      worst = std::max(worst, std::abs(grad(j) - lambda * (f.beta(j) > 0 ? 1.0 : -1.0)));
    } else {
      worst = std::max(worst, std::max(0.0, std::abs(grad(j)) - lambda));
    }
  }
  return worst;
}

Eigen::VectorXd normal_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return a.householderQr().solve(y).tail(x.cols());
}

std::vector<support::Row> rows_from_csv(const std::string& text) {
  std::vector<support::Row> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    support::Row r;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) r.push_back(std::stoll(cell));
    out.push_back(std::move(r));
  }
  return out;
}

double variance(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

fs::path work_dir() {
  static const fs::path p = fs::temp_directory_path() / ("ofilab_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---- criteria ----------------------------------------------------------------

Outcome ofi_oracle() {
  std::size_t compared = 0, events = 0, mismatches = 0;
  // random books with sentinels, crossed and one-sided rows
  std::mt19937_64 rng(2024);
  const int levels = 10;
  const auto rows = support::random_books(10000, levels, rng);
  std::vector<std::int64_t> t(rows.size());
  const std::int64_t open = lob::Timestamp::from_hms(10, 0).ns;
  std::uniform_int_distribution<std::int64_t> gap(0, 300'000'000);
  std::int64_t now = open - 2'000'000'000;
  for (auto& x : t) x = (now += gap(rng));
  events += rows.size();
  const auto snaps = support::to_snapshots(rows, t, levels);
  const std::int64_t h = 10'000'000'000;
  const auto n_buckets = static_cast<std::size_t>((t.back() - open) / h);
  const lob::Session s{{open}, {open + static_cast<std::int64_t>(n_buckets) * h}};
  const auto buckets = lob::bucketize(snaps, s, 10.0);
  for (int m = 1; m <= levels; ++m) {
    const auto ref = support::naive_bucket_ofi(rows, t, open, h, n_buckets, m);
    for (std::size_t k = 0; k < buckets.size(); ++k, ++compared)
      mismatches += features::level_ofi(snaps, buckets[k], m) != ref[k];
  }
  // generated market streams, re-read from their LOBSTER text
  auto c = support::small_market(2, 1, 99);
  c.day = {lob::Timestamp::from_hms(9, 30), lob::Timestamp::from_hms(10, 30)};
  c.cross_links = {{0, 1, 2, 0.7, 1}};
  const auto day = synth::generate(c)[0];
  for (const auto& sd : day.stocks) {
    std::ostringstream csv;
    lob::write_orderbook_csv(csv, sd.snapshots);
    const auto raw = rows_from_csv(csv.str());
    std::vector<std::int64_t> ts(raw.size());
    for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = sd.snapshots[i].time.ns;
    events += raw.size();
    const auto b = lob::bucketize(sd.snapshots, c.day, c.step_seconds);
    for (int m = 1; m <= c.levels; ++m) {
      const auto ref = support::naive_bucket_ofi(raw, ts, c.day.open.ns, h, b.size(), m);
      for (std::size_t k = 0; k < b.size(); ++k, ++compared) {
        const auto got = features::level_ofi(sd.snapshots, b[k], m);
        mismatches += got != ref[k] || got != sd.steps[k].flow[static_cast<std::size_t>(m - 1)];
      }
    }
  }
  return {mismatches == 0 && events >= 10000,
          std::to_string(events) + " events, " + std::to_string(compared) + " bucket sums, " +
              std::to_string(mismatches) + " mismatches"};
}

Outcome protocol_constants() {
  pipeline::RunConfig cfg;
  cfg.synth = support::small_market(2, 2, 5);
  const auto ps = pipeline::build_panels_synth(cfg);
  const auto windows = impact::session_windows(ps.fine, impact::Protocol{});
  bool ok = windows.size() == 10;
  for (const auto& w : windows) ok = ok && w.fit_end - w.fit_begin == 180;
  const auto rep = impact::run_contemporaneous(ps.fine, {impact::parse_model("PI1")}, impact::Protocol{});
  std::map<std::pair<std::size_t, std::size_t>, int> per_stock_day;
  for (const auto& f : rep.fits) {
    ok = ok && f.n_fit == 180;
    ++per_stock_day[{f.day, f.stock}];
  }
  for (const auto& [k, n] : per_stock_day) ok = ok && n == 10;
  ok = ok && !per_stock_day.empty();
  return {ok, std::to_string(windows.size()) + " windows per day, " + std::to_string(per_stock_day.size()) +
                  " stock-days fitted"};
}

Outcome pca_checks() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z;
  double worst_sum = 0, worst_res = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd x(180, 10);
    for (int i = 0; i < 180; ++i) {
      const double common = z(rng);
      for (int j = 0; j < 10; ++j) x(i, j) = (1.0 - 0.08 * j) * common + (0.2 + 0.1 * (trial % 5)) * z(rng);
    }
    const auto pca = factor::fit_pca(x);
    const Eigen::MatrixXd xc = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd s = xc.transpose() * xc / 179.0;
    worst_sum = std::max(worst_sum, std::abs(pca.ratios.sum() - 1.0));
    const double top = pca.values(0);
    for (Eigen::Index k = 0; k < pca.values.size(); ++k) {
      const Eigen::VectorXd w = pca.vectors.col(k);
      worst_res = std::max(worst_res, (s * w - pca.values(k) * w).norm() / top);
    }
  }
  return {worst_sum <= kRatioSumTol && worst_res <= kEigenResidualTol,
          "max |sum-1| " + num(worst_sum) + ", max relative residual " + num(worst_res)};
}

Outcome lasso_checks() {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> z;
  double worst_ols = 0, worst_kkt = 0;
  bool zero_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 180, p = 5 + (trial % 4) * 10;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      const double shared = z(rng);
      for (int j = 0; j < p; ++j) x(i, j) = (0.5 + j % 3) * z(rng) + 0.4 * shared + 0.1 * j;
      y(i) = 0.3 + 0.2 * x(i, 0) - 0.5 * x(i, 1) + 0.1 * x(i, p - 1) + z(rng);
    }
    const auto b_ref = normal_ols(x, y);
    const auto f0 = regression::lasso_fit(x, y, 0.0);
    worst_ols = std::max(worst_ols, (f0.beta - b_ref).cwiseAbs().maxCoeff() / std::max(1.0, b_ref.cwiseAbs().maxCoeff()));
    const regression::LassoProblem prob(x, y);
    const double lmax = prob.lambda_max();
    for (double lambda : regression::lambda_grid(lmax, regression::LassoConfig{})) {
      const auto f = regression::lasso_fit(x, y, lambda);
      worst_kkt = std::max(worst_kkt, kkt_violation(x, y, f, lambda) / lmax);
    }
    const auto cv = regression::lasso_cv(x, y);
    worst_kkt = std::max(worst_kkt, kkt_violation(x, y, cv.fit, cv.fit.lambda) / lmax);
    for (double lambda : {lmax, 1.5 * lmax, 100 * lmax}) zero_ok = zero_ok && regression::lasso_fit(x, y, lambda).nnz == 0;
  }
  return {worst_ols <= kOlsMatchTol && worst_kkt <= kKktTol && zero_ok,
          "lambda=0 vs OLS " + num(worst_ols) + ", worst KKT/lambda_max " + num(worst_kkt) +
              (zero_ok ? ", zero at lambda_max" : ", nonzero at lambda_max")};
}

Outcome nested_monotonicity() {
  pipeline::RunConfig cfg;
  cfg.synth = support::small_market(3, 3, 61);
  cfg.synth.cross_links = {{0, 1, 2, 0.5, 0}};
  const auto ps = pipeline::build_panels_synth(cfg);
  std::vector<impact::ModelSpec> models;
  for (int m = 1; m <= 10; ++m) models.push_back(impact::parse_model("PI" + std::to_string(m)));
  const auto rep = impact::run_contemporaneous(ps.fine, models, impact::Protocol{});
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> by_window;
  for (const auto& f : rep.fits) by_window[{f.day, f.stock, f.window}].push_back(f.is_r2_raw);
  std::size_t violations = 0;
  for (const auto& [k, r2] : by_window) {
    if (r2.size() != 10) ++violations;
    for (std::size_t m = 1; m < r2.size(); ++m) violations += r2[m] < r2[m - 1];
  }
  return {violations == 0 && !by_window.empty(),
          std::to_string(by_window.size()) + " windows, " + std::to_string(violations) + " violations"};
}

Outcome planted_recovery() {
  // Noise-free: lot = 2D makes every planted move an exact tick count.
  synth::SynthConfig c;
  c.n_stocks = 1;
  c.levels = 1;
  c.depth = 100;
  c.lot = 200;
  c.noise_std = 0;
  c.seed = 3;
  c.day = {lob::Timestamp::from_hms(9, 30), lob::Timestamp::from_hms(11, 30)};
  const auto day = synth::generate(c)[0];
  const auto& sd = day.stocks[0];
  const auto grid = features::build_mid_grid(sd.snapshots, c.day);
  const auto buckets = lob::bucketize(sd.snapshots, c.day, c.step_seconds);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(buckets.size()), 1);
  Eigen::VectorXd y(x.rows());
  double prev = grid.at(c.day.open);
  for (std::size_t k = 0; k < buckets.size(); ++k) {
    x(static_cast<Eigen::Index>(k), 0) = static_cast<double>(features::level_ofi(sd.snapshots, buckets[k], 1));
    const double mid = grid.at(sd.steps[k].end);
    y(static_cast<Eigen::Index>(k)) = mid - prev;
    prev = mid;
  }
  const double expected = static_cast<double>(c.tick) / (2.0 * static_cast<double>(c.depth) * lob::kPriceScale);
  const double slope = regression::ols_fit(x, y).beta(0);
  const double rel = std::abs(slope - expected) / expected;

  // Noisy: 21 days of one stock give 200 evaluated windows. A deep book keeps
  // the observed depth close to D, so OFI/Q tracks the planted F/(2D).
  pipeline::RunConfig cfg;
  cfg.synth.n_stocks = 1;
  cfg.synth.days = 21;
  cfg.synth.depth = 1000;
  cfg.synth.impact_coeffs.assign(10, 0.0);
  cfg.synth.impact_coeffs[0] = 10.0;
  cfg.synth.noise_std = 1.5;
  cfg.synth.seed = 17;
  std::vector<std::vector<synth::StepTruth>> truth;
  const auto ps = pipeline::build_panels_synth(cfg, [&](const synth::DayOutput& d) { truth.push_back(d.stocks[0].steps); });
  const auto rep = impact::run_contemporaneous(ps.fine, {impact::parse_model("PI1")}, impact::Protocol{});
  const std::int64_t half_hour = 1800LL * 1'000'000'000LL;
  double oos = 0, share = 0;
  std::size_t n = 0;
  for (const auto& f : rep.fits) {
    if (!std::isfinite(f.oos_r2)) continue;
    const std::int64_t lo = f.window_start.ns + half_hour, hi = lo + half_hour;
    std::vector<double> signal, move;
    for (const auto& st : truth[f.day])
      if (st.end.ns > lo && st.end.ns <= hi) {
        signal.push_back(st.signal_ticks);
        move.push_back(static_cast<double>(st.move_ticks));
      }
    oos += f.oos_r2;
    share += variance(signal) / variance(move);
    ++n;
  }
  oos = 100 * oos / static_cast<double>(n);
  share = 100 * share / static_cast<double>(n);
  return {rel <= kSlopeRelTol && n >= 200 && std::abs(oos - share) <= kShareTolPoints,
          "slope rel err " + num(rel) + "; " + std::to_string(n) + " windows, OOS R2 " + num(oos) +
              " vs planted share " + num(share) + " points"};
}

Outcome absorption() {
  const auto cfg = pipeline::load_config(fs::path(OFILAB_SOURCE_DIR) / "configs/absorption_chain.json");
  const auto ps = pipeline::build_panels(cfg);
  impact::Protocol proto;
  proto.lasso = cfg.lasso;
  std::vector<impact::ModelSpec> models;
  for (const char* m : {"PI1", "PII", "CI1", "CII"}) models.push_back(impact::parse_model(m));
  const auto rep = impact::run_contemporaneous(ps.fine, models, proto);
  const double best = 100 * impact::compare(rep.fits, "PI1", "CI1", true).test.mean_delta;
  const double integrated = 100 * impact::compare(rep.fits, "PII", "CII", true).test.mean_delta;
  return {integrated <= kAbsorbIntegratedMax && best >= kAbsorbBestMin,
          "OOS dR2 CI1-PI1 " + num(best) + " points, CII-PII " + num(integrated) + " points"};
}

Outcome forward_cross() {
  const auto cfg = pipeline::load_config(fs::path(OFILAB_SOURCE_DIR) / "configs/forward_ring.json");
  const auto ps = pipeline::build_panels(cfg);
  impact::ForwardProtocol fp;
  fp.lasso = cfg.lasso;
  const auto fpi = impact::run_forward(ps.coarse, impact::parse_model("FPI1"), fp);
  const auto fci = impact::run_forward(ps.coarse, impact::parse_model("FCI1"), fp);
  auto blocks = fpi.blocks;
  blocks.insert(blocks.end(), fci.blocks.begin(), fci.blocks.end());
  const auto row = impact::compare(blocks, "FPI1", "FCI1", true);
  std::map<std::string, std::map<std::string, double>> mean;  // strategy -> model -> bps
  for (const auto* rep : {&fpi, &fci}) {
    const auto minutes = backtest::run_backtest(*rep, backtest::BacktestConfig{});
    for (const auto& s : backtest::summarize(minutes, ps.coarse.dates))
      if (s.period == "all") mean[s.strategy][s.model] = s.mean_bps;
  }
  const double fi_pi = mean["forecast_implied"]["FPI1"], fi_ci = mean["forecast_implied"]["FCI1"];
  const double ls_pi = mean["long_short"]["FPI1"], ls_ci = mean["long_short"]["FCI1"];
  const bool ok = row.test.mean_delta > 0 && row.test.p_value < kForwardP && fi_ci > fi_pi && ls_ci > ls_pi;
  return {ok, "OOS dR2 " + num(100 * row.test.mean_delta) + " points, p " + num(row.test.p_value) +
                  "; forecast-implied " + num(fi_pi) + " -> " + num(fi_ci) + " bps, long-short " + num(ls_pi) +
                  " -> " + num(ls_ci) + " bps"};
}

Outcome portfolio_invariants() {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 0.002), scale(0.001, 1000.0);
  std::size_t bad_gross = 0, bad_scale = 0, bad_telescope = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 120);
    std::vector<double> f(n), sprd(n), sig(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = 0.001 * z(rng);
      sprd[i] = u(rng);
      sig[i] = u(rng) + 1e-6;
    }
    for (const auto& w : {backtest::forecast_implied_weights(f, sprd, sig).w, backtest::long_short_weights(f).w,
                          backtest::long_short_weights(f, true).w}) {
      double g = 0;
      for (double v : w) g += std::abs(v);
      bad_gross += !(g == 0.0 || std::abs(g - 1.0) <= kGrossTol);
    }
    auto scaled = f;
    const double c = scale(rng);
    for (auto& v : scaled) v *= c;
    bad_scale += backtest::long_short_weights(scaled).w != backtest::long_short_weights(f).w;
  }
  std::vector<double> ofi(400), R(400);
  for (auto& v : ofi) v = z(rng);
  for (auto& v : R) v = 1e-3 * z(rng);
  ofi[10] = 0;
  for (std::size_t t = 0; t < 300; ++t)
    for (int p = 1; p < 60; ++p) {
      const double lhs = backtest::position_pnl(ofi, R, t, p + 1) - backtest::position_pnl(ofi, R, t, p);
      const double rhs = backtest::sign(ofi[t]) * R[t + static_cast<std::size_t>(p) + 1];
      bad_telescope += std::abs(lhs - rhs) > 1e-15;
    }
  return {bad_gross + bad_scale + bad_telescope == 0,
          "gross violations " + std::to_string(bad_gross) + ", scale " + std::to_string(bad_scale) + ", telescoping " +
              std::to_string(bad_telescope)};
}

Outcome network_properties() {
  std::mt19937_64 rng(81);
  std::normal_distribution<double> z;
  std::size_t bad_edges = 0;
  double worst_frob = 0, worst_spec = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10 + trial;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = z(rng);
    const double c = std::pow(10.0, trial % 7 - 3);
    auto edges = [](const netview::Network& net) {
      std::vector<std::pair<std::size_t, std::size_t>> e;
      for (const auto& x : net.edges) e.emplace_back(x.src, x.dst);
      return e;
    };
    bad_edges += edges(netview::threshold_network(m, 95)) != edges(netview::threshold_network(c * m, 95));
    const auto sv = netview::singular_values(m, false);
    double sq = 0;
    for (double s : sv) sq += s * s;
    worst_frob = std::max(worst_frob, std::abs(sq - m.squaredNorm()) / m.squaredNorm());
    const Eigen::MatrixXd gram = m.transpose() * m;
    const double spectral = std::sqrt(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram).eigenvalues().maxCoeff());
    worst_spec = std::max(worst_spec, std::abs(sv[0] - spectral) / spectral);
  }
  // hand-enumerated centralities
  netview::Network net;
  net.nodes = 4;
  net.edges = {{0, 1, 1.0}, {0, 2, 1.0}, {0, 3, -1.0}, {1, 2, 0.5}};
  const auto out = netview::out_degree_centrality(net);
  bool hand = out[0] == 1.0 && std::abs(out[1] - 1.0 / 3) < 1e-15 && out[2] == 0.0 && out[3] == 0.0;
  netview::Network cross;
  cross.nodes = 4;
  cross.edges = {{0, 2, 1.0}};
  const auto g = netview::group_degree_centrality(cross, {"A", "A", "B", "B"});
  hand = hand && g.size() == 2 && g[0].out == 0.5 && g[0].in == 0.0 && g[1].in == 0.5 && g[1].out == 0.0;
  return {bad_edges == 0 && worst_frob <= kSpectralTol && worst_spec <= kSpectralTol && hand,
          "edge-set changes " + std::to_string(bad_edges) + ", Frobenius " + num(worst_frob) + ", spectral " +
              num(worst_spec) + (hand ? ", centralities match" : ", centrality mismatch")};
}

Outcome determinism() {
  const fs::path cfg = fs::path(OFILAB_SOURCE_DIR) / "configs/fixture_5stock.json";
  std::vector<std::string> manifests;
  for (const char* threads : {"1", "0"}) {
    const fs::path out = work_dir() / (std::string("all_t") + threads);
    fs::remove_all(out);
    const std::string cmd = std::string(OFILAB_CLI_PATH) + " all --config " + cfg.string() + " --out " + out.string() +
                            " --threads " + threads + " --log-level error > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "CLI run failed with --threads " + std::string(threads)};
    manifests.push_back(slurp(out / "manifest.json"));
  }
  const auto m = nlohmann::json::parse(manifests[0]);
  return {!manifests[0].empty() && manifests[0] == manifests[1],
          std::to_string(m["outputs"].size()) + " outputs, manifests " +
              (manifests[0] == manifests[1] ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";  // optional name filter
  struct Criterion {
    const char* name;
    double budget_s;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"ofi_oracle_equivalence", 1, ofi_oracle},
      {"protocol_constants", 1, protocol_constants},
      {"pca_identities", 5, pca_checks},
      {"lasso_correctness", 30, lasso_checks},
      {"nested_monotonicity", 10, nested_monotonicity},
      {"planted_recovery", 60, planted_recovery},
      {"integrated_ofi_absorption", 300, absorption},
      {"forward_cross_impact", 300, forward_cross},
      {"portfolio_invariants", 5, portfolio_invariants},
      {"network_properties", 5, network_properties},
      {"determinism", 600, determinism},
  };
  int failures = 0;
  std::size_t ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::string(c.name).find(only) == std::string::npos) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs <= c.budget_s;
    failures += !pass;
    std::printf("%s %s: %s [%.2fs, budget %.0fs]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_s);
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  std::printf("%d of %zu criteria failed\n", failures, ran);
  return failures;
}
