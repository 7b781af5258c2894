#include <doctest.h>

#include <sstream>

#include "ofilab/error.hpp"
#include "ofilab/lob.hpp"
#include "support.hpp"

using namespace ofilab;
using namespace ofilab::lob;

TEST_CASE("message row parses into typed fields") {
  std::istringstream in("34200.189,1,11885113,21,2238200,1\n");
  const auto ev = parse_message_stream(in);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].time.ns == 34200189000000LL);
  CHECK(ev[0].event_type == 1);
  CHECK(ev[0].order_id == 11885113);
  CHECK(ev[0].size == 21);
  CHECK(ev[0].price == 2238200);
  CHECK(ev[0].direction == 1);
}

TEST_CASE("empty message stream yields no events") {
  std::istringstream in("");
  CHECK(parse_message_stream(in).empty());
}

TEST_CASE("short message row is a parse error naming the row") {
  std::istringstream in("34200.1,1,1,10,100,1\n34200.2,1,2,10,100\n");
  try {
    parse_message_stream(in, "msg.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("time regression in a message file is rejected") {
  std::istringstream in("34200.2,1,1,10,100,1\n34200.1,1,2,10,100,1\n");
  CHECK_THROWS_AS(parse_message_stream(in), Error);
}

TEST_CASE("message serialization round-trips byte for byte") {
  const std::string text =
      "34200.189,1,11885113,21,2238200,1\n"
      "34200.189012,3,11885113,21,2238200,1\n"
      "34201,4,7,100,2239500,-1\n"
      "34201.000000001,7,-1,1,-1,-1\n";
  std::istringstream in(text);
  const auto ev = parse_message_stream(in);
  std::ostringstream out;
  write_message_csv(out, ev);
  CHECK(out.str() == text);
}

TEST_CASE("orderbook row maps to ask/bid levels in LOBSTER order") {
  std::istringstream in("2239500,100,2231800,200\n");
  const auto s = parse_orderbook_stream(in, 1);
  REQUIRE(s.size() == 1);
  CHECK(s[0].levels[0].ask_price == 2239500);
  CHECK(s[0].levels[0].ask_size == 100);
  CHECK(s[0].levels[0].bid_price == 2231800);
  CHECK(s[0].levels[0].bid_size == 200);
  CHECK(s[0].valid());
  CHECK(s[0].mid() == doctest::Approx((223.95 + 223.18) / 2));
}

TEST_CASE("sentinel-filled deeper level is marked absent") {
  std::istringstream in("2239500,100,2231800,200,9999999999,0,-9999999999,0\n");
  const auto s = parse_orderbook_stream(in, 2);
  REQUIRE(s.size() == 1);
  CHECK_FALSE(s[0].levels[1].ask_present());
  CHECK_FALSE(s[0].levels[1].bid_present());
  CHECK(s[0].valid());
}

TEST_CASE("bid equal to ask flags a crossed snapshot that is retained") {
  std::istringstream in("2239500,100,2239500,200\n");
  const auto s = parse_orderbook_stream(in, 1);
  REQUIRE(s.size() == 1);
  CHECK(s[0].crossed);
  CHECK_FALSE(s[0].valid());
}

TEST_CASE("orderbook column count must be 4M") {
  std::istringstream in("2239500,100,2231800\n");
  CHECK_THROWS_AS(parse_orderbook_stream(in, 1), Error);
}

TEST_CASE("orderbook serialization round-trips") {
  const std::string text = "2239500,100,2231800,200,2239600,50,-9999999999,0\n2239400,10,2231900,20,2239500,5,2231800,7\n";
  std::istringstream in(text);
  const auto s = parse_orderbook_stream(in, 2);
  std::ostringstream out;
  write_orderbook_csv(out, s);
  CHECK(out.str() == text);
}

TEST_CASE("bucket counts follow from session length and h") {
  const Session s{Timestamp::from_hms(10, 0), Timestamp::from_hms(10, 30)};
  CHECK(bucketize({}, s, 10.0).size() == 180);
  CHECK(bucketize({}, s, 60.0).size() == 30);
  CHECK_THROWS_AS(bucketize({}, s, 0.0), Error);
  CHECK_THROWS_AS(bucketize({}, s, 7.0), Error);
}

TEST_CASE("a snapshot on a right edge belongs to the bucket ending there") {
  const Session s{Timestamp::from_hms(10, 0), Timestamp::from_hms(10, 1)};
  std::vector<BookSnapshot> snaps(3);
  snaps[0].time = Timestamp::from_hms(10, 0, 5);
  snaps[1].time = Timestamp::from_hms(10, 0, 10);
  snaps[2].time = {Timestamp::from_hms(10, 0, 10).ns + 1};
  const auto b = bucketize(snaps, s, 10.0);
  REQUIRE(b.size() == 6);
  CHECK(b[0].count == 2);
  CHECK(b[0].first == 0);
  CHECK(b[1].count == 1);
  CHECK(b[1].first == 2);
  CHECK(b[2].empty());
}

TEST_CASE("buckets partition the in-session snapshots and stay inside the session") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> t(Timestamp::from_hms(9, 30).ns, Timestamp::from_hms(16, 0).ns);
  std::vector<std::int64_t> times(2000);
  for (auto& x : times) x = t(rng);
  std::sort(times.begin(), times.end());
  std::vector<BookSnapshot> snaps(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) snaps[i].time = {times[i]};
  const Session s{Timestamp::from_hms(10, 0), Timestamp::from_hms(15, 30)};
  const auto b = bucketize(snaps, s, 10.0);
  std::size_t covered = 0, inside = 0;
  for (std::size_t k = 0; k < b.size(); ++k) {
    CHECK(b[k].start >= s.open);
    CHECK(b[k].end <= s.close);
    if (k) CHECK(b[k].start == b[k - 1].end);
    for (std::size_t n = b[k].first; n < b[k].first + b[k].count; ++n) {
      CHECK(snaps[n].time > b[k].start);
      CHECK(snaps[n].time <= b[k].end);
    }
    covered += b[k].count;
  }
  for (const auto& x : times) inside += (x > s.open.ns && x <= s.close.ns);
  CHECK(b.front().start == s.open);
  CHECK(b.back().end == s.close);
  CHECK(covered == inside);
}

TEST_CASE("clock and decimal-seconds formatting") {
  CHECK(parse_clock("10:00").ns == Timestamp::from_hms(10, 0).ns);
  CHECK(parse_clock("15:30:15").ns == Timestamp::from_hms(15, 30, 15).ns);
  CHECK(format_clock(Timestamp::from_hms(9, 30, 5)) == "09:30:05");
  int digits = 0;
  const auto t = parse_decimal_seconds("34200.000123", &digits);
  CHECK(digits == 6);
  CHECK(format_decimal_seconds(t, digits) == "34200.000123");
  CHECK(format_decimal_seconds(Timestamp::from_hms(9, 30), 0) == "34200");
}
