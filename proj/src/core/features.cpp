#include "ofilab/features.hpp"

#include <cmath>

#include "ofilab/error.hpp"

namespace ofilab::features {

std::int64_t transition_ofi(const lob::BookSnapshot& prev, const lob::BookSnapshot& cur, int level) {
  if (!prev.valid() || !cur.valid()) return 0;
  const auto m = static_cast<std::size_t>(level - 1);
  if (m >= prev.levels.size() || m >= cur.levels.size()) return 0;
  const auto& a = prev.levels[m];
  const auto& b = cur.levels[m];
  std::int64_t e = 0;
  if (a.bid_present() && b.bid_present()) {
    if (b.bid_price >= a.bid_price) e += b.bid_size;
    if (b.bid_price <= a.bid_price) e -= a.bid_size;
  }
  if (a.ask_present() && b.ask_present()) {
    if (b.ask_price <= a.ask_price) e -= b.ask_size;
    if (b.ask_price >= a.ask_price) e += a.ask_size;
  }
  return e;
}

std::int64_t range_ofi(std::span<const lob::BookSnapshot> snapshots, std::size_t first, std::size_t last, int level) {
  std::int64_t total = 0;
  for (std::size_t n = std::max<std::size_t>(first, 1); n < last; ++n) {
    total += transition_ofi(snapshots[n - 1], snapshots[n], level);
  }
  return total;
}

std::int64_t level_ofi(std::span<const lob::BookSnapshot> snapshots, const lob::BucketIndex& bucket, int level) {
  if (bucket.empty()) return 0;
  return range_ofi(snapshots, bucket.first, bucket.first + bucket.count, level);
}

double depth_scale(std::span<const lob::BookSnapshot> snapshots, const lob::BucketIndex& bucket, int levels) {
  std::int64_t total = 0;
  std::size_t valid = 0;
  for (std::size_t n = bucket.first; n < bucket.first + bucket.count; ++n) {
    const auto& s = snapshots[n];
    if (!s.valid()) continue;
    ++valid;
    const int upto = std::min(levels, s.level_count());
    for (int m = 0; m < upto; ++m) {
      const auto& l = s.levels[static_cast<std::size_t>(m)];
      if (l.bid_present()) total += l.bid_size;
      if (l.ask_present()) total += l.ask_size;
    }
  }
  if (valid == 0) return kNaN;
  return static_cast<double>(total) / (2.0 * static_cast<double>(valid));
}

double normalize_ofi(double raw, double depth) { return depth > 0 ? raw / depth : kNaN; }

double log_return(double p_now, double p_before) {
  if (!(p_now > 0) || !(p_before > 0)) return kNaN;
  return std::log(p_now / p_before);
}

double sample_std(std::span<const double> values) {
  const auto n = values.size();
  if (n < 2) return kNaN;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double realized_vol(const std::vector<std::vector<double>>& per_day_returns) {
  double total = 0;
  int used = 0;
  for (const auto& day : per_day_returns) {
    const double s = sample_std(day);
    if (std::isnan(s)) continue;
    total += s;
    ++used;
  }
  return used == 0 ? kNaN : total / used;
}

double MidGrid::at(lob::Timestamp t) const {
  const auto offset = t.ns - open.ns;
  if (offset < 0 || offset % 1'000'000'000 != 0) return kNaN;
  const auto k = static_cast<std::size_t>(offset / 1'000'000'000);
  return k < mids.size() ? mids[k] : kNaN;
}

std::vector<double> MidGrid::minute_returns_before(lob::Timestamp t, int minutes) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(minutes));
  const std::int64_t minute = 60'000'000'000;
  double prev = at(lob::Timestamp{t.ns - minutes * minute});
  if (std::isnan(prev)) return {};
  for (int k = 1; k <= minutes; ++k) {
    const double cur = at(lob::Timestamp{t.ns - (minutes - k) * minute});
    const double r = log_return(cur, prev);
    if (std::isnan(r)) return {};
    out.push_back(r);
    prev = cur;
  }
  return out;
}

MidGrid build_mid_grid(std::span<const lob::BookSnapshot> snapshots, lob::Session day) {
  MidGrid grid;
  grid.open = day.open;
  const auto seconds = static_cast<std::size_t>((day.close.ns - day.open.ns) / 1'000'000'000);
  grid.mids.assign(seconds + 1, kNaN);
  std::size_t n = 0;
  double last = kNaN;
  for (std::size_t k = 0; k <= seconds; ++k) {
    const std::int64_t edge = day.open.ns + static_cast<std::int64_t>(k) * 1'000'000'000;
    while (n < snapshots.size() && snapshots[n].time.ns <= edge) {
      if (snapshots[n].valid()) last = snapshots[n].mid();
      ++n;
    }
    grid.mids[k] = last;
  }
  return grid;
}

DailyStats daily_stats(const lob::LobsterDay& day, const MidGrid& grid) {
  DailyStats st;
  for (const auto& e : day.events)
    if (e.event_type == 4 || e.event_type == 5) st.volume += static_cast<double>(e.size);
  std::vector<double> rets;
  for (std::size_t k = 60; k < grid.mids.size(); k += 60) {
    const double r = log_return(grid.mids[k], grid.mids[k - 60]);
    if (!std::isnan(r)) rets.push_back(r);
  }
  st.minute_vol = sample_std(rets);
  double total = 0;
  std::size_t count = 0;
  for (const auto& s : day.snapshots) {
    if (!s.valid()) continue;
    total += s.relative_spread();
    ++count;
  }
  if (count > 0) st.mean_spread = total / static_cast<double>(count);
  return st;
}

std::vector<FeatureRow> compute_rows(std::span<const lob::BookSnapshot> snapshots, lob::Session day,
                                     double h_seconds, int levels) {
  const auto buckets = lob::bucketize(snapshots, day, h_seconds);
  std::vector<FeatureRow> rows;
  rows.reserve(buckets.size());

  // Last valid snapshot at or before the open.
  std::size_t scan = 0;
  const lob::BookSnapshot* last_valid = nullptr;
  while (scan < snapshots.size() && snapshots[scan].time <= day.open) {
    if (snapshots[scan].valid()) last_valid = &snapshots[scan];
    ++scan;
  }
  double prev_mid = last_valid ? last_valid->mid() : kNaN;
  double carried_depth = kNaN;

  for (const auto& b : buckets) {
    FeatureRow row;
    row.t = b.end;
    row.events = b.count;
    row.raw_ofi.assign(static_cast<std::size_t>(levels), 0);
    row.ofi.assign(static_cast<std::size_t>(levels), 0.0);
    if (b.empty()) row.flags |= kEmptyBucket;

    std::int64_t depth_total = 0;
    std::size_t depth_count = 0;
    for (std::size_t n = b.first; n < b.first + b.count; ++n) {
      const auto& cur = snapshots[n];
      if (n > 0) {
        const auto& prev = snapshots[n - 1];
        if (prev.valid() && cur.valid()) {
          for (int m = 1; m <= levels; ++m) row.raw_ofi[static_cast<std::size_t>(m - 1)] += transition_ofi(prev, cur, m);
        }
      }
      if (cur.valid()) {
        last_valid = &cur;
        ++depth_count;
        const int upto = std::min(levels, cur.level_count());
        for (int m = 0; m < upto; ++m) {
          const auto& l = cur.levels[static_cast<std::size_t>(m)];
          if (l.bid_present()) depth_total += l.bid_size;
          if (l.ask_present()) depth_total += l.ask_size;
        }
      }
    }
    if (depth_count > 0) {
      carried_depth = static_cast<double>(depth_total) / (2.0 * static_cast<double>(depth_count));
    }
    row.depth = carried_depth;
    if (!(row.depth > 0)) {
      row.flags |= kNoDepth;
      for (auto& v : row.ofi) v = kNaN;
    } else {
      for (int m = 0; m < levels; ++m) {
        row.ofi[static_cast<std::size_t>(m)] =
            static_cast<double>(row.raw_ofi[static_cast<std::size_t>(m)]) / row.depth;
      }
    }

    if (last_valid) {
      row.mid = last_valid->mid();
      row.spread = last_valid->relative_spread();
    } else {
      row.flags |= kNoMid;
    }
    row.R = log_return(row.mid, prev_mid);
    if (std::isnan(row.R)) row.flags |= kNoReturn;
    prev_mid = row.mid;
    row.flags |= kNoSigma | kNoIntegrated;
    rows.push_back(std::move(row));
  }
  return rows;
}

void fill_sigma(std::vector<FeatureRow>& rows, double h_seconds, std::span<const MidGrid* const> prior_days,
                int max_days) {
  const auto begin = prior_days.size() > static_cast<std::size_t>(max_days)
                         ? prior_days.size() - static_cast<std::size_t>(max_days)
                         : 0;
  const double root_h = std::sqrt(h_seconds / 60.0);  // h in minutes
  std::vector<std::vector<double>> per_day;
  for (auto& row : rows) {
    per_day.clear();
    for (std::size_t d = begin; d < prior_days.size(); ++d) {
      auto rets = prior_days[d]->minute_returns_before(row.t);
      if (!rets.empty()) per_day.push_back(std::move(rets));
    }
    row.sigma = realized_vol(per_day);
    if (row.sigma > 0) {
      row.flags &= ~static_cast<std::uint32_t>(kNoSigma);
      row.r = row.R / (row.sigma * root_h);
    } else {
      row.flags |= kNoSigma;
      row.r = kNaN;
    }
  }
}

std::size_t Panel::buckets_per_day() const {
  const auto h = std::llround(h_seconds * 1e9);
  return static_cast<std::size_t>((day.close.ns - day.open.ns) / h);
}

std::size_t Panel::bucket_of(lob::Timestamp end) const {
  const auto h = std::llround(h_seconds * 1e9);
  const auto off = end.ns - day.open.ns;
  if (off <= 0 || off % h != 0 || static_cast<std::size_t>(off / h) > buckets_per_day()) {
    fail(ErrorCode::invalid_argument, "time " + lob::format_clock(end) + " is not a bucket end");
  }
  return static_cast<std::size_t>(off / h) - 1;
}

}  // namespace ofilab::features
