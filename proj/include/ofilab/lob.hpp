#pragma once

// LOBSTER message / orderbook ingestion and time bucketing.
//
// Prices stay integer (units of 1e-4 dollars) and times stay integer
// nanoseconds after midnight throughout ingestion so that bucket edges and the
// OFI price comparisons are exact.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ofilab::lob {

using Price = std::int64_t;
using Shares = std::int64_t;

inline constexpr Price kAbsentPrice = 9'999'999'999;  // magnitude of the LOBSTER dummy price
inline constexpr double kPriceScale = 1e4;            // price units per dollar

/// Nanoseconds after midnight.
struct Timestamp {
  std::int64_t ns = 0;

  static constexpr Timestamp from_seconds(std::int64_t s) { return {s * 1'000'000'000}; }
  static Timestamp from_seconds(double s);
  static constexpr Timestamp from_hms(int h, int m, int s = 0) {
    return from_seconds(std::int64_t{h} * 3600 + std::int64_t{m} * 60 + s);
  }
  double seconds() const { return static_cast<double>(ns) * 1e-9; }

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;
};

/// Parses "HH:MM" or "HH:MM:SS".
Timestamp parse_clock(std::string_view text);
std::string format_clock(Timestamp t);

/// Parses a decimal seconds field such as "34200.189". Returns the number of
/// fractional digits through `digits`. At most 9 fractional digits.
Timestamp parse_decimal_seconds(std::string_view text, int* digits = nullptr);
std::string format_decimal_seconds(Timestamp t, int digits);

struct LobEvent {
  Timestamp time;
  int time_digits = 9;  // fractional digits used when serializing
  int event_type = 1;   // 1..7
  std::int64_t order_id = 0;
  Shares size = 0;
  Price price = 0;
  int direction = 1;  // +1 buy, -1 sell

  friend bool operator==(const LobEvent&, const LobEvent&) = default;
};

struct BookLevel {
  Price ask_price = kAbsentPrice;
  Shares ask_size = 0;
  Price bid_price = -kAbsentPrice;
  Shares bid_size = 0;

  bool ask_present() const { return ask_price != kAbsentPrice && ask_price != -kAbsentPrice; }
  bool bid_present() const { return bid_price != kAbsentPrice && bid_price != -kAbsentPrice; }

  friend bool operator==(const BookLevel&, const BookLevel&) = default;
};

struct BookSnapshot {
  Timestamp time;
  std::vector<BookLevel> levels;
  std::size_t event_index = 0;
  bool crossed = false;    // bid1 >= ask1
  bool one_sided = false;  // best bid or best ask absent

  bool valid() const { return !crossed && !one_sided; }
  int level_count() const { return static_cast<int>(levels.size()); }
  /// Mid-price in dollars. Only meaningful for valid snapshots.
  double mid() const;
  /// (ask1 - bid1) / mid. Only meaningful for valid snapshots.
  double relative_spread() const;
};

/// Recomputes `crossed` / `one_sided` from the level data.
void classify(BookSnapshot& snapshot);

struct LobsterDay {
  std::vector<LobEvent> events;
  std::vector<BookSnapshot> snapshots;
};

std::vector<LobEvent> parse_message_stream(std::istream& in, std::string_view source = "<stream>");
std::vector<LobEvent> parse_message_file(const std::filesystem::path& path);

/// Snapshot times are left at zero; use `load_lobster_day` to join them.
std::vector<BookSnapshot> parse_orderbook_stream(std::istream& in, int levels,
                                                 std::string_view source = "<stream>");
std::vector<BookSnapshot> parse_orderbook_file(const std::filesystem::path& path, int levels);

/// Parses a row-aligned message/orderbook pair and joins snapshot times.
LobsterDay load_lobster_day(const std::filesystem::path& message_path,
                            const std::filesystem::path& orderbook_path, int levels);

void write_message_csv(std::ostream& out, std::span<const LobEvent> events);
void write_orderbook_csv(std::ostream& out, std::span<const BookSnapshot> snapshots);

struct Session {
  Timestamp open;
  Timestamp close;
};

/// One half-open bucket (start, end]. `first` is the position of the first
/// snapshot with time > start; `count` snapshots belong to the bucket.
struct BucketIndex {
  Timestamp start;
  Timestamp end;
  std::size_t first = 0;
  std::size_t count = 0;

  bool empty() const { return count == 0; }
  std::size_t last() const { return first + count - 1; }
};

/// Contiguous buckets of length `h_seconds` covering the session. The bucket
/// ending at t owns snapshots with time in (t - h, t]. Throws when h <= 0 or
/// when h does not divide the session length.
std::vector<BucketIndex> bucketize(std::span<const BookSnapshot> snapshots, Session session,
                                   double h_seconds);

}  // namespace ofilab::lob
