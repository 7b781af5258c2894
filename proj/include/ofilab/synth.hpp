#pragma once

// Synthetic multi-asset LOB generator with a planted linear impact rule.
//
// Every stock keeps fixed-price queues between price moves. Within one
// generation step all flow (Poisson queue events, optional common multi-level
// flow, cross-link injections) happens at fixed prices, so the measured
// level-m OFI of the step equals the planted flow F^m exactly. At the step end
// a latent price x (in ticks) advances by
//
//     x += sum_m beta_m * F^m / (2D) + noise
//
// and the book is shifted by round(x) - previous. A shift is written as a
// halt/resume pair of type-7 messages; the halt snapshot is one-sided so both
// of its transitions contribute nothing to OFI.

#include <cstdint>
#include <string>
#include <vector>

#include "ofilab/lob.hpp"

namespace ofilab::synth {

struct CrossLink {
  int source = 0;
  int target = 0;
  int level = 1;          // target level receiving the injected flow
  double strength = 0.0;  // injected shares per share of the source's level-1 flow
  int lag_steps = 0;      // 0 = same step (source generated first)
};

struct SynthConfig {
  int n_stocks = 1;
  int levels = 10;
  lob::Shares depth = 100;  // D, queue size after a price move
  double event_rate = 2.0;  // Poisson queue events per second per stock
  std::vector<double> impact_coeffs;  // per level, in ticks per F/(2D); empty = best level only
  std::vector<CrossLink> cross_links;
  double noise_std = 0.0;   // Gaussian return noise per step, ticks
  double common_std = 0.0;  // per-step multi-level strategy flow, shares per level
  std::vector<double> common_std_by_stock;  // overrides common_std when non-empty
  std::uint64_t seed = 1;
  int days = 1;
  lob::Session day{lob::Timestamp::from_hms(9, 30), lob::Timestamp::from_hms(16, 0)};
  double step_seconds = 10.0;
  lob::Shares lot = 100;
  int max_lots = 3;
  int spread_ticks = 1;
  std::vector<int> spread_ticks_by_stock;  // overrides spread_ticks when non-empty
  lob::Price tick = 100;                   // price units (1e-4 dollars)
  double base_price = 100.0;               // dollars
  std::string start_date = "2019-01-02";
  std::vector<std::string> tickers;  // empty = S000, S001, ...
  std::vector<std::string> sectors;  // empty = "NA"

  /// Throws Error(config) naming the offending field.
  void validate() const;
  std::string ticker(int stock) const;
  std::string sector(int stock) const;
  double beta(int level) const;  // 1-based level
  double common(int stock) const;
  int spread(int stock) const;
};

/// Per stock per step record of the planted mechanism.
struct StepTruth {
  lob::Timestamp end;
  std::vector<std::int64_t> flow;  // F^m, m = 1..M
  double signal_ticks = 0.0;       // sum_m beta_m F^m / (2D)
  double noise_ticks = 0.0;
  std::int64_t move_ticks = 0;  // realized mid move
};

struct StockDay {
  std::vector<lob::LobEvent> events;
  std::vector<lob::BookSnapshot> snapshots;
  std::vector<StepTruth> steps;
};

struct DayOutput {
  std::string date;  // YYYY-MM-DD
  std::vector<StockDay> stocks;
};

/// Streams one trading day at a time; state (prices, latent x, lagged flows)
/// carries across days.
class Generator {
 public:
  explicit Generator(SynthConfig config);
  ~Generator();
  Generator(Generator&&) noexcept;
  Generator& operator=(Generator&&) noexcept;
  const SynthConfig& config() const { return config_; }
  int days_generated() const { return day_; }
  bool done() const { return day_ >= config_.days; }
  DayOutput next_day();

 private:
  struct StockState;
  SynthConfig config_;
  std::vector<int> order_;  // topological order over lag-0 links
  std::vector<StockState> states_;
  int day_ = 0;
  std::vector<std::string> dates_;
};

/// Convenience for tests: all days at once.
std::vector<DayOutput> generate(const SynthConfig& config);

/// Business-day dates (Mon-Fri) starting at `start` (YYYY-MM-DD).
std::vector<std::string> business_dates(const std::string& start, int count);

/// LOBSTER file stem "{TICKER}_{DATE}_{startms}_{endms}".
std::string lobster_stem(const std::string& ticker, const std::string& date, lob::Session day);

}  // namespace ofilab::synth
