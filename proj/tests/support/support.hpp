#pragma once

// Shared reference implementations and data builders for the unit and
// acceptance suites. The references deliberately avoid the library's code
// paths: they work on raw LOBSTER integer rows.

#include <array>
#include <cstdint>
#include <random>
#include <sstream>
#include <vector>

#include "ofilab/features.hpp"
#include "ofilab/lob.hpp"
#include "ofilab/synth.hpp"

namespace support {

using Row = std::vector<std::int64_t>;  // 4*M LOBSTER orderbook columns

inline constexpr std::int64_t kSentinel = 9'999'999'999;

inline bool absent(std::int64_t price) { return price == kSentinel || price == -kSentinel; }

/// A book row is usable when both best quotes exist and are not crossed.
inline bool usable(const Row& r) { return !absent(r[0]) && !absent(r[2]) && r[2] < r[0]; }

/// Term-by-term evaluation of the four indicator terms for one transition.
inline std::int64_t naive_transition(const Row& a, const Row& b, int level) {
  if (!usable(a) || !usable(b)) return 0;
  const std::size_t o = 4 * static_cast<std::size_t>(level - 1);
  const std::int64_t pa_s = a[o], qa_s = a[o + 1], pa_b = a[o + 2], qa_b = a[o + 3];
  const std::int64_t pb_s = b[o], qb_s = b[o + 1], pb_b = b[o + 2], qb_b = b[o + 3];
  std::int64_t bid = 0, ask = 0;
  if (!absent(pa_b) && !absent(pb_b)) bid = (pb_b >= pa_b ? qb_b : 0) - (pb_b <= pa_b ? qa_b : 0);
  if (!absent(pa_s) && !absent(pb_s)) ask = -(pb_s <= pa_s ? qb_s : 0) + (pb_s >= pa_s ? qa_s : 0);
  return bid + ask;
}

/// Two-pass reference: per-transition contributions first, then bucket sums
/// over (t - h, t] with the transition into the first member taken from the
/// preceding row.
inline std::vector<std::int64_t> naive_bucket_ofi(const std::vector<Row>& rows, const std::vector<std::int64_t>& t_ns,
                                                  std::int64_t open_ns, std::int64_t h_ns, std::size_t buckets,
                                                  int level) {
  std::vector<std::int64_t> contrib(rows.size(), 0);
  for (std::size_t n = 1; n < rows.size(); ++n) contrib[n] = naive_transition(rows[n - 1], rows[n], level);
  std::vector<std::int64_t> out(buckets, 0);
  for (std::size_t n = 1; n < rows.size(); ++n) {
    if (t_ns[n] <= open_ns) continue;
    const std::int64_t k = (t_ns[n] - open_ns - 1) / h_ns;
    if (k < 0 || static_cast<std::size_t>(k) >= buckets) continue;
    // Transitions whose predecessor lies before the session open still count
    // when the current row is inside the bucket.
    out[static_cast<std::size_t>(k)] += contrib[n];
  }
  return out;
}

/// Random walk of books with occasional one-sided, crossed and sentinel levels.
inline std::vector<Row> random_books(std::size_t n, int levels, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> coin(0, 99);
  std::uniform_int_distribution<std::int64_t> size(0, 500);
  std::uniform_int_distribution<int> move(-2, 2);
  std::vector<Row> rows;
  rows.reserve(n);
  std::int64_t bid = 1'000'000, ask = 1'000'100;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = coin(rng);
    if (c < 30) {
      bid += 100 * move(rng);
      ask = std::max(ask + 100 * move(rng), bid + 100);
    }
    Row r(4 * static_cast<std::size_t>(levels));
    for (int m = 0; m < levels; ++m) {
      const std::size_t o = 4 * static_cast<std::size_t>(m);
      r[o] = ask + 100 * m;
      r[o + 1] = size(rng);
      r[o + 2] = bid - 100 * m;
      r[o + 3] = size(rng);
      if (m > 0 && coin(rng) < 3) {
        r[o] = kSentinel;
        r[o + 1] = 0;
      }
      if (m > 0 && coin(rng) < 3) {
        r[o + 2] = -kSentinel;
        r[o + 3] = 0;
      }
    }
    if (c == 97) r[2] = r[0];  // crossed
    if (c == 98) {
      r[0] = kSentinel;  // one-sided
      r[1] = 0;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ofilab::lob::BookSnapshot> to_snapshots(const std::vector<Row>& rows,
                                                           const std::vector<std::int64_t>& t_ns, int levels) {
  std::ostringstream csv;
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) csv << (j ? "," : "") << r[j];
    csv << '\n';
  }
  std::istringstream in(csv.str());
  auto snaps = ofilab::lob::parse_orderbook_stream(in, levels);
  for (std::size_t i = 0; i < snaps.size(); ++i) snaps[i].time = {t_ns[i]};
  return snaps;
}

/// Small multi-stock synthetic market used by several suites.
inline ofilab::synth::SynthConfig small_market(int stocks, int days, std::uint64_t seed) {
  ofilab::synth::SynthConfig c;
  c.n_stocks = stocks;
  c.days = days;
  c.levels = 10;
  c.depth = 100;
  c.event_rate = 2.0;
  c.impact_coeffs = {1.0, 0.6, 0.4, 0.3, 0.2, 0.15, 0.1, 0.05, 0.05, 0.05};
  c.noise_std = 0.5;
  c.common_std = 40;
  c.seed = seed;
  return c;
}

}  // namespace support
