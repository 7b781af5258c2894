#include "ofilab/lob.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "ofilab/error.hpp"

namespace ofilab::lob {

namespace {

constexpr std::int64_t kNsPerSecond = 1'000'000'000;
constexpr std::int64_t kTimeRegressionToleranceNs = 1;  // 1e-9 s

std::string row_field(std::string_view source, std::size_t row) {
  return std::string(source) + ":" + std::to_string(row);
}

template <class Int>
Int parse_int(std::string_view text, std::string_view source, std::size_t row, const char* what) {
  Int value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    fail(ErrorCode::parse,
         "row " + std::to_string(row) + ": non-numeric " + what + " field '" + std::string(text) + "'",
         row_field(source, row));
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

// Splits on commas into `out`; returns the field count.
std::size_t split(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      break;
    }
    out.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out.size();
}

void append_int(std::string& buf, std::int64_t v) {
  char tmp[32];
  auto [ptr, ec] = std::to_chars(tmp, tmp + sizeof tmp, v);
  buf.append(tmp, ptr);
}

}  // namespace

Timestamp Timestamp::from_seconds(double s) {
  return {static_cast<std::int64_t>(std::llround(s * 1e9))};
}

Timestamp parse_clock(std::string_view text) {
  int parts[3] = {0, 0, 0};
  int n = 0;
  std::size_t pos = 0;
  while (pos <= text.size() && n < 3) {
    auto colon = text.find(':', pos);
    auto piece = text.substr(pos, colon == std::string_view::npos ? std::string_view::npos : colon - pos);
    int v = 0;
    auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (ec != std::errc{} || ptr != piece.data() + piece.size() || piece.empty()) {
      fail(ErrorCode::parse, "bad clock time '" + std::string(text) + "'");
    }
    parts[n++] = v;
    if (colon == std::string_view::npos) break;
    pos = colon + 1;
  }
  if (n < 2) fail(ErrorCode::parse, "bad clock time '" + std::string(text) + "', expected HH:MM");
  return Timestamp::from_hms(parts[0], parts[1], parts[2]);
}

std::string format_clock(Timestamp t) {
  std::int64_t s = t.ns / kNsPerSecond;
  char buf[64];
  if (s % 60 == 0) {
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(s / 3600),
                  static_cast<long long>((s / 60) % 60));
  } else {
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(s / 3600),
                  static_cast<long long>((s / 60) % 60), static_cast<long long>(s % 60));
  }
  return buf;
}

Timestamp parse_decimal_seconds(std::string_view text, int* digits) {
  auto dot = text.find('.');
  auto whole_text = text.substr(0, dot);
  std::int64_t whole = 0;
  auto [ptr, ec] = std::from_chars(whole_text.data(), whole_text.data() + whole_text.size(), whole);
  if (ec != std::errc{} || ptr != whole_text.data() + whole_text.size() || whole_text.empty() || whole < 0) {
    fail(ErrorCode::parse, "bad time field '" + std::string(text) + "'");
  }
  std::int64_t frac = 0;
  int nd = 0;
  if (dot != std::string_view::npos) {
    auto frac_text = text.substr(dot + 1);
    if (frac_text.empty() || frac_text.size() > 9) {
      fail(ErrorCode::parse, "bad time field '" + std::string(text) + "' (1-9 fractional digits)");
    }
    for (char c : frac_text) {
      if (c < '0' || c > '9') fail(ErrorCode::parse, "bad time field '" + std::string(text) + "'");
      frac = frac * 10 + (c - '0');
    }
    nd = static_cast<int>(frac_text.size());
    for (int i = nd; i < 9; ++i) frac *= 10;
  }
  if (digits) *digits = nd;
  return {whole * kNsPerSecond + frac};
}

std::string format_decimal_seconds(Timestamp t, int digits) {
  std::string out;
  append_int(out, t.ns / kNsPerSecond);
  if (digits > 0) {
    std::int64_t frac = t.ns % kNsPerSecond;
    for (int i = digits; i < 9; ++i) frac /= 10;
    std::string tail;
    append_int(tail, frac);
    out += '.';
    if (static_cast<int>(tail.size()) < digits) out.append(static_cast<std::size_t>(digits) - tail.size(), '0');
    out += tail;
  }
  return out;
}

double BookSnapshot::mid() const {
  const auto& l = levels.front();
  return 0.5 * static_cast<double>(l.bid_price + l.ask_price) / kPriceScale;
}

double BookSnapshot::relative_spread() const {
  const auto& l = levels.front();
  return static_cast<double>(l.ask_price - l.bid_price) / (0.5 * static_cast<double>(l.bid_price + l.ask_price));
}

void classify(BookSnapshot& s) {
  s.crossed = false;
  s.one_sided = s.levels.empty() || !s.levels[0].bid_present() || !s.levels[0].ask_present();
  if (!s.one_sided) s.crossed = s.levels[0].bid_price >= s.levels[0].ask_price;
}

std::vector<LobEvent> parse_message_stream(std::istream& in, std::string_view source) {
  std::vector<LobEvent> events;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (split(sv, fields) != 6) {
      fail(ErrorCode::parse,
           "row " + std::to_string(row) + ": expected 6 columns, found " + std::to_string(fields.size()),
           row_field(source, row));
    }
    LobEvent e;
    try {
      e.time = parse_decimal_seconds(fields[0], &e.time_digits);
    } catch (const Error& err) {
      fail(ErrorCode::parse, "row " + std::to_string(row) + ": " + err.what(), row_field(source, row));
    }
    e.event_type = parse_int<int>(fields[1], source, row, "event type");
    e.order_id = parse_int<std::int64_t>(fields[2], source, row, "order id");
    e.size = parse_int<std::int64_t>(fields[3], source, row, "size");
    e.price = parse_int<std::int64_t>(fields[4], source, row, "price");
    e.direction = parse_int<int>(fields[5], source, row, "direction");
    if (e.event_type < 1 || e.event_type > 7) {
      fail(ErrorCode::parse, "row " + std::to_string(row) + ": event type outside 1..7", row_field(source, row));
    }
    if (e.direction != 1 && e.direction != -1) {
      fail(ErrorCode::parse, "row " + std::to_string(row) + ": direction must be +1 or -1", row_field(source, row));
    }
    // Halt messages (type 7) carry size 0.
    if (e.size < 0 || (e.size == 0 && e.event_type != 7)) {
      fail(ErrorCode::parse, "row " + std::to_string(row) + ": size must be positive", row_field(source, row));
    }
    if (!events.empty() && events.back().time.ns - e.time.ns > kTimeRegressionToleranceNs) {
      fail(ErrorCode::parse, "row " + std::to_string(row) + ": time decreases", row_field(source, row));
    }
    events.push_back(e);
  }
  return events;
}

std::vector<LobEvent> parse_message_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open message file " + path.string(), path.string());
  return parse_message_stream(in, path.string());
}

std::vector<BookSnapshot> parse_orderbook_stream(std::istream& in, int levels, std::string_view source) {
  if (levels < 1) fail(ErrorCode::invalid_argument, "level count must be >= 1");
  std::vector<BookSnapshot> snapshots;
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t row = 0;
  const std::size_t expected = 4 * static_cast<std::size_t>(levels);
  while (std::getline(in, line)) {
    ++row;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (split(sv, fields) != expected) {
      fail(ErrorCode::parse,
           "row " + std::to_string(row) + ": expected " + std::to_string(expected) + " columns, found " +
               std::to_string(fields.size()),
           row_field(source, row));
    }
    BookSnapshot s;
    s.event_index = snapshots.size();
    s.levels.resize(static_cast<std::size_t>(levels));
    for (int m = 0; m < levels; ++m) {
      auto& l = s.levels[static_cast<std::size_t>(m)];
      l.ask_price = parse_int<std::int64_t>(fields[4 * m + 0], source, row, "ask price");
      l.ask_size = parse_int<std::int64_t>(fields[4 * m + 1], source, row, "ask size");
      l.bid_price = parse_int<std::int64_t>(fields[4 * m + 2], source, row, "bid price");
      l.bid_size = parse_int<std::int64_t>(fields[4 * m + 3], source, row, "bid size");
      if (l.ask_size < 0 || l.bid_size < 0) {
        fail(ErrorCode::parse, "row " + std::to_string(row) + ": negative size", row_field(source, row));
      }
    }
    classify(s);
    snapshots.push_back(std::move(s));
  }
  return snapshots;
}

std::vector<BookSnapshot> parse_orderbook_file(const std::filesystem::path& path, int levels) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open orderbook file " + path.string(), path.string());
  return parse_orderbook_stream(in, levels, path.string());
}

LobsterDay load_lobster_day(const std::filesystem::path& message_path,
                            const std::filesystem::path& orderbook_path, int levels) {
  LobsterDay day;
  day.events = parse_message_file(message_path);
  day.snapshots = parse_orderbook_file(orderbook_path, levels);
  if (day.events.size() != day.snapshots.size()) {
    fail(ErrorCode::parse,
         "message file has " + std::to_string(day.events.size()) + " rows but orderbook file has " +
             std::to_string(day.snapshots.size()),
         orderbook_path.string());
  }
  for (std::size_t i = 0; i < day.events.size(); ++i) day.snapshots[i].time = day.events[i].time;
  return day;
}

void write_message_csv(std::ostream& out, std::span<const LobEvent> events) {
  std::string buf;
  buf.reserve(64 * 1024);
  for (const auto& e : events) {
    buf += format_decimal_seconds(e.time, e.time_digits);
    buf += ',';
    append_int(buf, e.event_type);
    buf += ',';
    append_int(buf, e.order_id);
    buf += ',';
    append_int(buf, e.size);
    buf += ',';
    append_int(buf, e.price);
    buf += ',';
    append_int(buf, e.direction);
    buf += '\n';
    if (buf.size() > 60 * 1024) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

void write_orderbook_csv(std::ostream& out, std::span<const BookSnapshot> snapshots) {
  std::string buf;
  buf.reserve(64 * 1024);
  for (const auto& s : snapshots) {
    bool first = true;
    for (const auto& l : s.levels) {
      for (std::int64_t v : {l.ask_price, l.ask_size, l.bid_price, l.bid_size}) {
        if (!first) buf += ',';
        first = false;
        append_int(buf, v);
      }
    }
    buf += '\n';
    if (buf.size() > 60 * 1024) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

std::vector<BucketIndex> bucketize(std::span<const BookSnapshot> snapshots, Session session, double h_seconds) {
  if (!(h_seconds > 0)) fail(ErrorCode::invalid_argument, "bucket length must be positive", "bucket_seconds");
  const std::int64_t h = std::llround(h_seconds * 1e9);
  const std::int64_t length = session.close.ns - session.open.ns;
  if (length <= 0) fail(ErrorCode::invalid_argument, "session close must be after open", "session");
  if (h <= 0 || length % h != 0) {
    fail(ErrorCode::invalid_argument, "bucket length must divide the session length", "bucket_seconds");
  }
  const auto count = static_cast<std::size_t>(length / h);
  std::vector<BucketIndex> buckets;
  buckets.reserve(count);
  auto by_time = [](const BookSnapshot& s, Timestamp t) { return s.time <= t; };
  // Position of the first snapshot strictly after `t`.
  auto after = [&](Timestamp t) {
    return static_cast<std::size_t>(
        std::partition_point(snapshots.begin(), snapshots.end(), [&](const BookSnapshot& s) { return by_time(s, t); }) -
        snapshots.begin());
  };
  std::size_t lo = after(session.open);
  for (std::size_t k = 0; k < count; ++k) {
    BucketIndex b;
    b.start = Timestamp{session.open.ns + static_cast<std::int64_t>(k) * h};
    b.end = Timestamp{b.start.ns + h};
    std::size_t hi = lo;
    while (hi < snapshots.size() && snapshots[hi].time <= b.end) ++hi;
    b.first = lo;
    b.count = hi - lo;
    buckets.push_back(b);
    lo = hi;
  }
  return buckets;
}

}  // namespace ofilab::lob
