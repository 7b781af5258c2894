#pragma once

// Forecast-driven portfolios, per-minute PnL, and the OFI-sign multi-horizon
// strategy.

#include <span>
#include <string>
#include <vector>

#include "ofilab/impact.hpp"

namespace ofilab::backtest {

struct Weights {
  std::vector<double> w;
  std::size_t longs = 0, shorts = 0;
  bool flagged = false;  // no selection possible, or a passing stock had sigma 0
  std::size_t selected() const { return longs + shorts; }
};

/// Spread-filtered, dispersion-scaled weights normalized to sum |w| = 1.
/// Non-finite inputs exclude a stock.
Weights forecast_implied_weights(std::span<const double> f, std::span<const double> spread,
                                 std::span<const double> sigma_f);

/// inf{x : F_N(x) >= k/10} over the sorted values.
double decile_threshold(std::span<const double> sorted, int k);

/// Long f > d9, short f < d1 (or symmetric top/bottom floor(N/10) counts),
/// each selected stock weighted 1/count. Non-finite forecasts are ignored.
Weights long_short_weights(std::span<const double> f, bool symmetric = false);

/// sum_i w_i (e^{R_i} - 1); non-finite returns contribute nothing.
double pnl(std::span<const double> w, std::span<const double> R);

struct MinutePnl {
  std::size_t day = 0;
  lob::Timestamp t;  // forecast time; PnL accrues over the next bucket
  std::string strategy;  // "forecast_implied" | "long_short"
  std::string model;
  double pnl_bps = 0.0;
  std::size_t n_selected = 0;
  std::size_t longs = 0, shorts = 0;
};

struct BacktestConfig {
  bool symmetric_deciles = false;
  int sigma_window = 30;  // trailing forecasts for sigma^F
  int threads = 1;
};

/// Both strategies on every minute with a full trailing forecast window.
std::vector<MinutePnl> run_backtest(const impact::ForwardReport& report, const BacktestConfig& cfg);

struct PnlSummary {
  std::string strategy, model, period;  // period "all" or "YYYYQn"
  double mean_bps = 0.0;
  std::size_t minutes = 0;
};

/// Mean PnL per minute by (strategy, model), overall and per calendar quarter.
std::vector<PnlSummary> summarize(const std::vector<MinutePnl>& minutes, const std::vector<std::string>& dates);

std::string quarter_of(const std::string& date);  // "2019-05-02" -> "2019Q2"

int sign(double x);  // sign(0) = 0

struct HorizonPnl {
  int p = 0;
  double pnl = features::kNaN;  // mean over eligible t of sign(ofi_t) sum_{l=1..p} R_{t+l}
  std::size_t n = 0;            // eligible buckets (t + p inside the day)
  std::size_t defined = 0;      // eligible buckets with every input defined
  lob::Timestamp t_max;         // end of the last eligible bucket
};

/// PnL_{t,p} for a single t; NaN if any input is undefined or t + p is out of range.
double position_pnl(std::span<const double> ofi, std::span<const double> R, std::size_t t, int p);

/// Buckets are h long, the first ending at open + h. Eligible t satisfy t + p < n.
HorizonPnl ofi_sign_pnl(std::span<const double> ofi, std::span<const double> R, int p, lob::Timestamp open = {},
                        double h_seconds = 60.0);

/// Mean over stock-days for p = 1..p_max on a 1-minute panel (sign of raw
/// level-1 OFI, whole trading day). PnL reported in bps.
std::vector<HorizonPnl> run_horizon_pnl(const features::Panel& panel, int p_max);

}  // namespace ofilab::backtest
