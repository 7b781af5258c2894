#include "ofilab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "ofilab/error.hpp"

namespace ofilab::synth {

namespace {

// splitmix64 finalizer; decorrelates per-stock seeds.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Days since 1970-01-01 (proleptic Gregorian), after H. Hinnant.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
}

enum class Kind { add, cancel, market };

struct Intent {
  std::int64_t time_ns;
  std::size_t seq;  // generation order, breaks time ties
  int level;        // 0-based
  int side;         // +1 bid, -1 ask
  Kind kind;
  lob::Shares size;
  bool convertible;  // Poisson queue events may flip add <-> removal
};

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& msg) { fail(ErrorCode::config, msg, "synth." + field); };
  if (n_stocks < 1) bad("n_stocks", "n_stocks must be >= 1");
  if (levels < 1) bad("levels", "levels must be >= 1");
  if (depth <= 0) bad("depth", "depth must be > 0");
  if (!(event_rate >= 0)) bad("event_rate", "event_rate must be >= 0");
  if (!(noise_std >= 0)) bad("noise_std", "noise_std must be >= 0");
  if (!(common_std >= 0)) bad("common_std", "common_std must be >= 0");
  if (days < 1) bad("days", "days must be >= 1");
  if (!(step_seconds > 0)) bad("step_seconds", "step_seconds must be > 0");
  const auto step_ns = std::llround(step_seconds * 1e9);
  if ((day.close.ns - day.open.ns) <= 0 || (day.close.ns - day.open.ns) % step_ns != 0) {
    bad("step_seconds", "step_seconds must divide the trading day");
  }
  if (lot <= 0) bad("lot", "lot must be > 0");
  if (max_lots < 1) bad("max_lots", "max_lots must be >= 1");
  if (spread_ticks < 1) bad("spread_ticks", "spread_ticks must be >= 1");
  if (tick <= 0) bad("tick", "tick must be > 0");
  if (!(base_price > 0)) bad("base_price", "base_price must be > 0");
  if (!impact_coeffs.empty() && static_cast<int>(impact_coeffs.size()) != levels) {
    bad("impact_coeffs", "impact_coeffs needs one value per level");
  }
  if (!tickers.empty() && static_cast<int>(tickers.size()) != n_stocks) bad("tickers", "one ticker per stock");
  if (!sectors.empty() && static_cast<int>(sectors.size()) != n_stocks) bad("sectors", "one sector per stock");
  if (!spread_ticks_by_stock.empty()) {
    if (static_cast<int>(spread_ticks_by_stock.size()) != n_stocks) bad("spread_ticks_by_stock", "one value per stock");
    for (int s : spread_ticks_by_stock)
      if (s < 1) bad("spread_ticks_by_stock", "spread must be >= 1 tick");
  }
  if (!common_std_by_stock.empty() && static_cast<int>(common_std_by_stock.size()) != n_stocks) {
    bad("common_std_by_stock", "one value per stock");
  }
  for (const auto& l : cross_links) {
    if (l.source < 0 || l.source >= n_stocks || l.target < 0 || l.target >= n_stocks || l.source == l.target) {
      bad("cross_links", "link endpoints must be distinct stocks in range");
    }
    if (l.level < 1 || l.level > levels) bad("cross_links", "link level out of range");
    if (l.lag_steps < 0) bad("cross_links", "lag_steps must be >= 0");
  }
  (void)business_dates(start_date, 1);
}

std::string SynthConfig::ticker(int stock) const {
  if (!tickers.empty()) return tickers[static_cast<std::size_t>(stock)];
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%03d", stock);
  return buf;
}

std::string SynthConfig::sector(int stock) const {
  return sectors.empty() ? std::string("NA") : sectors[static_cast<std::size_t>(stock)];
}

double SynthConfig::beta(int level) const {
  if (impact_coeffs.empty()) return level == 1 ? 1.0 : 0.0;
  return impact_coeffs[static_cast<std::size_t>(level - 1)];
}

double SynthConfig::common(int stock) const {
  return common_std_by_stock.empty() ? common_std : common_std_by_stock[static_cast<std::size_t>(stock)];
}

int SynthConfig::spread(int stock) const {
  return spread_ticks_by_stock.empty() ? spread_ticks : spread_ticks_by_stock[static_cast<std::size_t>(stock)];
}

std::vector<std::string> business_dates(const std::string& start, int count) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(start.c_str(), "%d-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 || d > 31) {
    fail(ErrorCode::config, "bad start_date '" + start + "', expected YYYY-MM-DD", "synth.start_date");
  }
  std::int64_t z = days_from_civil(y, m, d);
  std::vector<std::string> out;
  while (static_cast<int>(out.size()) < count) {
    // 1970-01-01 was a Thursday.
    const auto weekday = ((z % 7) + 7 + 4) % 7;  // 0 = Sunday
    if (weekday != 0 && weekday != 6) {
      int yy = 0;
      unsigned mm = 0, dd = 0;
      civil_from_days(z, yy, mm, dd);
      char buf[16];
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", yy, mm, dd);
      out.emplace_back(buf);
    }
    ++z;
  }
  return out;
}

std::string lobster_stem(const std::string& ticker, const std::string& date, lob::Session day) {
  return ticker + "_" + date + "_" + std::to_string(day.open.ns / 1'000'000) + "_" +
         std::to_string(day.close.ns / 1'000'000);
}

struct Generator::StockState {
  std::mt19937_64 rng;
  lob::Price bid1 = 0;
  std::vector<lob::Shares> bid, ask;
  double latent = 0.0;
  std::int64_t shown = 0;  // round(latent) already applied to the book
  std::int64_t next_order_id = 1;
  std::vector<std::int64_t> level1_flow;  // per global step
};

Generator::Generator(SynthConfig config) : config_(std::move(config)) {
  config_.validate();
  const int n = config_.n_stocks;
  // Kahn's algorithm over lag-0 links; ties by stock index keep the order stable.
  std::vector<int> indegree(static_cast<std::size_t>(n), 0);
  for (const auto& l : config_.cross_links)
    if (l.lag_steps == 0) ++indegree[static_cast<std::size_t>(l.target)];
  std::vector<bool> placed(static_cast<std::size_t>(n), false);
  while (static_cast<int>(order_.size()) < n) {
    int pick = -1;
    for (int i = 0; i < n; ++i) {
      if (!placed[static_cast<std::size_t>(i)] && indegree[static_cast<std::size_t>(i)] == 0) {
        pick = i;
        break;
      }
    }
    if (pick < 0) fail(ErrorCode::config, "same-step cross links form a cycle", "synth.cross_links");
    placed[static_cast<std::size_t>(pick)] = true;
    order_.push_back(pick);
    for (const auto& l : config_.cross_links)
      if (l.lag_steps == 0 && l.source == pick) --indegree[static_cast<std::size_t>(l.target)];
  }

  states_.resize(static_cast<std::size_t>(n));
  const auto tick = config_.tick;
  const lob::Price p0 = std::llround(config_.base_price * lob::kPriceScale / static_cast<double>(tick)) * tick;
  for (int i = 0; i < n; ++i) {
    auto& s = states_[static_cast<std::size_t>(i)];
    s.rng.seed(mix(config_.seed ^ mix(static_cast<std::uint64_t>(i) + 1)));
    s.bid1 = p0 - (config_.spread(i) / 2) * tick;
    s.bid.assign(static_cast<std::size_t>(config_.levels), config_.depth);
    s.ask.assign(static_cast<std::size_t>(config_.levels), config_.depth);
  }
  dates_ = business_dates(config_.start_date, config_.days);
}

Generator::~Generator() = default;
Generator::Generator(Generator&&) noexcept = default;
Generator& Generator::operator=(Generator&&) noexcept = default;

DayOutput Generator::next_day() {
  if (done()) fail(ErrorCode::invalid_argument, "generator exhausted");
  const auto& cfg = config_;
  const int n = cfg.n_stocks;
  const int M = cfg.levels;
  const lob::Price tick = cfg.tick;
  const std::int64_t step_ns = std::llround(cfg.step_seconds * 1e9);
  const std::int64_t steps = (cfg.day.close.ns - cfg.day.open.ns) / step_ns;
  const double two_d = 2.0 * static_cast<double>(cfg.depth);

  DayOutput out;
  out.date = dates_[static_cast<std::size_t>(day_)];
  out.stocks.resize(static_cast<std::size_t>(n));

  auto snapshot_of = [&](int stock, lob::Timestamp t) {
    const auto& s = states_[static_cast<std::size_t>(stock)];
    lob::BookSnapshot snap;
    snap.time = t;
    snap.levels.resize(static_cast<std::size_t>(M));
    const lob::Price ask1 = s.bid1 + cfg.spread(stock) * tick;
    for (int m = 0; m < M; ++m) {
      auto& l = snap.levels[static_cast<std::size_t>(m)];
      l.bid_price = s.bid1 - m * tick;
      l.ask_price = ask1 + m * tick;
      l.bid_size = s.bid[static_cast<std::size_t>(m)];
      l.ask_size = s.ask[static_cast<std::size_t>(m)];
    }
    lob::classify(snap);
    return snap;
  };

  auto push = [&](int stock, lob::LobEvent e, lob::BookSnapshot snap) {
    auto& sd = out.stocks[static_cast<std::size_t>(stock)];
    e.time = snap.time;
    e.time_digits = 9;
    snap.event_index = sd.snapshots.size();
    sd.events.push_back(e);
    sd.snapshots.push_back(std::move(snap));
  };

  auto resume = [&](int stock, lob::Timestamp t) {
    auto& s = states_[static_cast<std::size_t>(stock)];
    std::fill(s.bid.begin(), s.bid.end(), cfg.depth);
    std::fill(s.ask.begin(), s.ask.end(), cfg.depth);
    lob::LobEvent e;
    e.event_type = 7;
    e.order_id = 0;
    e.size = 0;
    e.price = 1;
    e.direction = -1;
    push(stock, e, snapshot_of(stock, t));
  };

  for (int i = 0; i < n; ++i) resume(i, cfg.day.open);

  const std::size_t global_base = static_cast<std::size_t>(day_) * static_cast<std::size_t>(steps);
  std::vector<Intent> intents;

  for (std::int64_t k = 0; k < steps; ++k) {
    const std::int64_t start = cfg.day.open.ns + k * step_ns;
    const std::int64_t end = start + step_ns;
    const std::size_t global_step = global_base + static_cast<std::size_t>(k);

    for (int i : order_) {
      auto& s = states_[static_cast<std::size_t>(i)];
      auto& rng = s.rng;
      intents.clear();
      std::uniform_int_distribution<std::int64_t> when(start + 1, end - 1);

      std::poisson_distribution<int> count(cfg.event_rate * cfg.step_seconds);
      const int events = cfg.event_rate > 0 ? count(rng) : 0;
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::uniform_int_distribution<int> level_pick(0, M - 1);
      std::uniform_int_distribution<int> add_lots(1, cfg.max_lots);
      std::uniform_int_distribution<int> remove_lots(1, (3 * cfg.max_lots + 1) / 2);
      for (int e = 0; e < events; ++e) {
        Intent in{};
        in.time_ns = when(rng);
        in.seq = intents.size();
        const double u = unit(rng);
        in.side = unit(rng) < 0.5 ? 1 : -1;
        in.convertible = true;
        if (u < 0.6) {
          in.kind = Kind::add;
          in.level = level_pick(rng);
          in.size = cfg.lot * add_lots(rng);
        } else if (u < 0.9) {
          in.kind = Kind::cancel;
          in.level = level_pick(rng);
          in.size = cfg.lot * remove_lots(rng);
        } else {
          in.kind = Kind::market;
          in.level = 0;
          in.size = cfg.lot * remove_lots(rng);
        }
        intents.push_back(in);
      }

      const double common = cfg.common(i);
      if (common > 0) {
        std::normal_distribution<double> flow(0.0, common);
        const auto amount = std::llround(flow(rng));
        if (amount != 0) {
          for (int m = 0; m < M; ++m) {
            Intent in{when(rng), intents.size(), m, amount > 0 ? 1 : -1, Kind::add, std::llabs(amount), false};
            intents.push_back(in);
          }
        }
      }

      for (const auto& l : cfg.cross_links) {
        if (l.target != i) continue;
        if (global_step < static_cast<std::size_t>(l.lag_steps)) continue;
        const auto& hist = states_[static_cast<std::size_t>(l.source)].level1_flow;
        const std::size_t at = global_step - static_cast<std::size_t>(l.lag_steps);
        if (at >= hist.size()) continue;
        const auto amount = std::llround(l.strength * static_cast<double>(hist[at]));
        if (amount == 0) continue;
        intents.push_back({when(rng), intents.size(), l.level - 1, amount > 0 ? 1 : -1, Kind::add, std::llabs(amount), false});
      }

      std::sort(intents.begin(), intents.end(), [](const Intent& a, const Intent& b) {
        return a.time_ns != b.time_ns ? a.time_ns < b.time_ns : a.seq < b.seq;
      });

      std::vector<std::int64_t> flow(static_cast<std::size_t>(M), 0);
      const lob::Price ask1 = s.bid1 + cfg.spread(i) * tick;
      for (auto in : intents) {
        auto& queue = in.side > 0 ? s.bid[static_cast<std::size_t>(in.level)] : s.ask[static_cast<std::size_t>(in.level)];
        if (in.convertible) {
          if (in.kind != Kind::add && queue - in.size < cfg.lot) {
            in.kind = Kind::add;
          } else if (in.kind == Kind::add && queue > 3 * cfg.depth && queue - in.size >= cfg.lot) {
            in.kind = Kind::cancel;
          }
        }
        const lob::Shares delta = in.kind == Kind::add ? in.size : -in.size;
        queue += delta;
        flow[static_cast<std::size_t>(in.level)] += in.side > 0 ? delta : -delta;

        lob::LobEvent e;
        e.size = in.size;
        e.price = in.side > 0 ? s.bid1 - in.level * tick : ask1 + in.level * tick;
        e.direction = in.side;
        switch (in.kind) {
          case Kind::add: e.event_type = 1; break;
          case Kind::cancel: e.event_type = 3; break;
          case Kind::market: e.event_type = 4; break;
        }
        e.order_id = s.next_order_id++;
        push(i, e, snapshot_of(i, lob::Timestamp{in.time_ns}));
      }

      s.level1_flow.push_back(flow[0]);

      StepTruth truth;
      truth.end = lob::Timestamp{end};
      truth.flow = flow;
      for (int m = 0; m < M; ++m) {
        truth.signal_ticks += cfg.beta(m + 1) * static_cast<double>(flow[static_cast<std::size_t>(m)]) / two_d;
      }
      if (cfg.noise_std > 0) {
        std::normal_distribution<double> noise(0.0, cfg.noise_std);
        truth.noise_ticks = noise(rng);
      }
      s.latent += truth.signal_ticks + truth.noise_ticks;
      const std::int64_t target = std::llround(s.latent);
      std::int64_t move = target - s.shown;
      // Keep the deepest bid strictly positive.
      const lob::Price floor_bid = static_cast<lob::Price>(M) * tick;
      if (s.bid1 + move * tick < floor_bid) move = (floor_bid - s.bid1) / tick;
      truth.move_ticks = move;
      if (move != 0) {
        s.shown += move;
        s.bid1 += move * tick;
        lob::LobEvent halt;
        halt.event_type = 7;
        halt.size = 0;
        halt.price = -1;
        halt.direction = -1;
        lob::BookSnapshot blank;
        blank.time = lob::Timestamp{end};
        blank.levels.resize(static_cast<std::size_t>(M));
        lob::classify(blank);
        push(i, halt, std::move(blank));
        resume(i, lob::Timestamp{end});
      }
      out.stocks[static_cast<std::size_t>(i)].steps.push_back(std::move(truth));
    }
  }
  ++day_;
  return out;
}

std::vector<DayOutput> generate(const SynthConfig& config) {
  Generator gen(config);
  std::vector<DayOutput> days;
  while (!gen.done()) days.push_back(gen.next_day());
  return days;
}

}  // namespace ofilab::synth
