#pragma once

// Per-bucket OFI features, depth scale, mid-price returns and volatility.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ofilab/lob.hpp"

namespace ofilab::features {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Row validity bits. A row with no bits set is fully usable.
enum Flag : std::uint32_t {
  kEmptyBucket = 1u << 0,   // no snapshot in the bucket (OFI = 0, Q carried forward)
  kNoDepth = 1u << 1,       // Q undefined (no valid snapshot yet today)
  kNoMid = 1u << 2,         // no valid snapshot at or before t
  kNoReturn = 1u << 3,      // R undefined
  kNoSigma = 1u << 4,       // no prior-day volatility, r undefined
  kNoIntegrated = 1u << 5,  // integrated OFI undefined
};

struct FeatureRow {
  lob::Timestamp t;  // bucket end
  std::vector<std::int64_t> raw_ofi;  // OFI^m, shares
  std::vector<double> ofi;            // OFI^m / Q
  double ofi_i = kNaN;
  double depth = kNaN;  // Q
  double R = kNaN;
  double r = kNaN;
  double mid = kNaN;
  double spread = kNaN;
  double sigma = kNaN;
  std::uint32_t flags = 0;
  std::size_t events = 0;

  bool ok(std::uint32_t mask) const { return (flags & mask) == 0; }
};

/// OFI contribution of one transition at a 1-based level. Zero when either
/// snapshot is flagged; a side absent in either snapshot contributes zero.
std::int64_t transition_ofi(const lob::BookSnapshot& prev, const lob::BookSnapshot& cur, int level);

/// Sum of transition_ofi over transitions into snapshots [first, last).
/// The transition into `first` uses snapshot first-1 when it exists.
std::int64_t range_ofi(std::span<const lob::BookSnapshot> snapshots, std::size_t first, std::size_t last, int level);

std::int64_t level_ofi(std::span<const lob::BookSnapshot> snapshots, const lob::BucketIndex& bucket, int level);

/// Q over the valid snapshots of the bucket; NaN when there are none.
double depth_scale(std::span<const lob::BookSnapshot> snapshots, const lob::BucketIndex& bucket, int levels);

double normalize_ofi(double raw, double depth);  // NaN unless depth > 0
double log_return(double p_now, double p_before);  // NaN unless both > 0
double sample_std(std::span<const double> values);  // (n-1) denominator; NaN if n < 2
/// Mean over days of the per-day sample std; NaN when no day has >= 2 values.
double realized_vol(const std::vector<std::vector<double>>& per_day_returns);

/// Mid-price (dollars) of the last valid snapshot at or before each whole
/// second from open to close inclusive; NaN where none exists.
struct MidGrid {
  lob::Timestamp open;
  std::vector<double> mids;

  double at(lob::Timestamp t) const;  // t must fall on a whole second
  /// The 30 one-minute log returns sampled at t-30min+60k, k = 0..30.
  /// Empty when any sample is missing or before the open.
  std::vector<double> minute_returns_before(lob::Timestamp t, int minutes = 30) const;
};

MidGrid build_mid_grid(std::span<const lob::BookSnapshot> snapshots, lob::Session day);

/// Previous-day style characteristics of one stock-day.
struct DailyStats {
  double volume = 0.0;       // executed shares (event types 4 and 5)
  double minute_vol = kNaN;  // sample std of 1-minute log returns over the day
  double mean_spread = kNaN; // mean relative spread over valid snapshots
};

DailyStats daily_stats(const lob::LobsterDay& day, const MidGrid& grid);

/// Rows for one stock-day at bucket length h over the whole trading day.
/// sigma, r and ofi_i are left for later passes (flags kNoSigma / kNoIntegrated set).
std::vector<FeatureRow> compute_rows(std::span<const lob::BookSnapshot> snapshots, lob::Session day,
                                     double h_seconds, int levels);

/// Fills sigma and r of `rows` from up to `max_days` previous days' grids
/// (ordered oldest first).
void fill_sigma(std::vector<FeatureRow>& rows, double h_seconds, std::span<const MidGrid* const> prior_days,
                int max_days = 5);

/// Feature panel for one bucket length: rows[day][stock][bucket].
struct Panel {
  double h_seconds = 10.0;
  lob::Session day;
  int levels = 10;
  std::vector<std::string> stocks;
  std::vector<std::string> dates;
  std::vector<std::vector<std::vector<FeatureRow>>> rows;

  std::size_t buckets_per_day() const;
  /// Index of the bucket ending at t.
  std::size_t bucket_of(lob::Timestamp end) const;
};

inline constexpr std::uint32_t kNeedOfi = kNoDepth;
inline constexpr std::uint32_t kNeedReturn = kNoMid | kNoReturn;
inline constexpr std::uint32_t kNeedNormReturn = kNoMid | kNoReturn | kNoSigma;

}  // namespace ofilab::features
