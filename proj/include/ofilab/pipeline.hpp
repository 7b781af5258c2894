#pragma once

// Config-driven orchestration: data -> features -> experiments -> backtests
// -> networks, with every artifact written through a staging directory and
// listed in a hashed manifest.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ofilab/backtest.hpp"
#include "ofilab/features.hpp"
#include "ofilab/impact.hpp"
#include "ofilab/synth.hpp"

namespace ofilab::pipeline {

using nlohmann::json;

struct InputConfig {
  std::string mode = "synth";  // synth | lobster
  std::string dir;             // LOBSTER directory
  std::vector<std::string> universe;  // tickers; empty = every ticker found
  std::string features_dir;    // reuse a previous features export instead of raw data
  std::string sectors;         // CSV ticker,sector,market_cap
};

struct RunConfig {
  InputConfig input;
  synth::SynthConfig synth;
  lob::Session day{lob::Timestamp::from_hms(9, 30), lob::Timestamp::from_hms(16, 0)};
  lob::Session session{lob::Timestamp::from_hms(10, 0), lob::Timestamp::from_hms(15, 30)};
  int levels = 10;
  double bucket_seconds = 10;
  double forward_bucket_seconds = 60;
  double window_minutes = 30;
  double cadence_minutes = 30;
  std::optional<double> appendix_cadence_minutes;  // e.g. 1-minute refits
  std::vector<std::string> contemporaneous_models;
  std::vector<std::string> forward_models;
  regression::LassoConfig lasso;
  bool symmetric_deciles = false;
  double network_percentile = 95.0;
  bool network_normalize = true;
  int horizon_p = 60;
  std::uint64_t seed = 1;
  int threads = 1;

  /// Throws Error(config) naming the field.
  void validate() const;
  /// Seed actually handed to the generator.
  std::uint64_t synth_seed() const;
};

std::vector<std::string> default_contemporaneous_models(int levels);
std::vector<std::string> default_forward_models(int levels);

/// Unknown keys are rejected so typos surface as errors.
RunConfig parse_config(const json& j);
RunConfig load_config(const std::filesystem::path& path);
/// Effective configuration without the thread budget.
json to_json(const RunConfig& cfg);

struct SectorInfo {
  std::string sector = "NA";
  int mcap_rank = 0;
};

std::map<std::string, SectorInfo> read_sectors(const std::filesystem::path& path);

/// Feature panels for both bucket lengths plus per stock-day characteristics.
struct PanelSet {
  features::Panel fine;     // bucket_seconds
  features::Panel coarse;   // forward_bucket_seconds
  std::vector<std::vector<features::DailyStats>> stats;  // [day][stock]
  std::vector<SectorInfo> sectors;                        // per stock
};

/// Called once per generated day before the raw data is dropped.
using DaySink = std::function<void(const synth::DayOutput&)>;

PanelSet build_panels_synth(const RunConfig& cfg, const DaySink& sink = {});
PanelSet build_panels_lobster(const RunConfig& cfg);
PanelSet load_feature_export(const RunConfig& cfg, const std::filesystem::path& dir);

/// Dispatches on cfg.input.
PanelSet build_panels(const RunConfig& cfg, const DaySink& sink = {});

/// Rows of one stock-day at one bucket length, all passes applied:
/// sigma from up to 5 previous grids, integrated OFI over 30 minutes of preceding rows.
std::vector<features::FeatureRow> stock_day_rows(std::span<const lob::BookSnapshot> snapshots, const RunConfig& cfg,
                                                 double h_seconds,
                                                 std::span<const features::MidGrid* const> prior_grids);

// CSV helpers shared by the writers and tests.
std::string fmt(double v);  // %.17g
void write_feature_csv(std::ostream& out, const features::Panel& panel, std::size_t day);

struct Outputs;

enum class Stage { synth, features, contemporaneous, forward, backtest, network, all };
Stage parse_stage(const std::string& name);
const char* stage_name(Stage s);

struct RunResult {
  json manifest;
  std::filesystem::path out_dir;
};

/// Runs one subcommand and publishes its artifacts into out_dir.
RunResult run(const RunConfig& cfg, Stage stage, const std::filesystem::path& out_dir);

}  // namespace ofilab::pipeline
