#include "ofilab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <unistd.h>

#include "ofilab/error.hpp"
#include "ofilab/factor.hpp"
#include "ofilab/hashing.hpp"
#include "ofilab/log.hpp"
#include "ofilab/netview.hpp"
#include "ofilab/parallel.hpp"

namespace ofilab::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

namespace {

// Strict object reader: every key must be consumed.
class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail(ErrorCode::config, "expected an object", prefix_.empty() ? "<root>" : prefix_);
  }

  std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  bool get(const std::string& key, T& out) {
    const json* v = raw(key);
    if (!v) return false;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw std::runtime_error("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer() && !v->is_number_unsigned()) throw std::runtime_error("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw std::runtime_error("expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw std::runtime_error("expected a string");
      }
      out = v->get<T>();
    } catch (const std::exception& e) {
      fail(ErrorCode::config, std::string("invalid value: ") + e.what(), field(key));
    }
    return true;
  }

  void clock(const std::string& key, lob::Timestamp& out) {
    std::string text;
    if (!get(key, text)) return;
    try {
      out = lob::parse_clock(text);
    } catch (const Error& e) {
      fail(ErrorCode::config, e.what(), field(key));
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorCode::config, "unknown key", field(it.key()));
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void read_session(Reader& parent, const std::string& key, lob::Session& s) {
  const json* v = parent.raw(key);
  if (!v) return;
  Reader r(*v, parent.field(key));
  r.clock("open", s.open);
  r.clock("close", s.close);
  r.finish();
}

synth::SynthConfig parse_synth(const json& j, bool& levels_given) {
  synth::SynthConfig c;
  Reader r(j, "synth");
  r.get("n_stocks", c.n_stocks);
  levels_given = r.get("levels", c.levels);
  r.get("depth", c.depth);
  r.get("event_rate", c.event_rate);
  r.get("impact_coeffs", c.impact_coeffs);
  r.get("noise_std", c.noise_std);
  r.get("common_std", c.common_std);
  r.get("common_std_by_stock", c.common_std_by_stock);
  r.get("days", c.days);
  r.get("step_seconds", c.step_seconds);
  r.get("lot", c.lot);
  r.get("max_lots", c.max_lots);
  r.get("spread_ticks", c.spread_ticks);
  r.get("spread_ticks_by_stock", c.spread_ticks_by_stock);
  r.get("tick", c.tick);
  r.get("base_price", c.base_price);
  r.get("start_date", c.start_date);
  r.get("tickers", c.tickers);
  r.get("sectors", c.sectors);
  if (const json* links = r.raw("cross_links")) {
    if (!links->is_array()) fail(ErrorCode::config, "expected an array", "synth.cross_links");
    for (std::size_t i = 0; i < links->size(); ++i) {
      Reader lr((*links)[i], "synth.cross_links[" + std::to_string(i) + "]");
      synth::CrossLink l;
      lr.get("source", l.source);
      lr.get("target", l.target);
      lr.get("level", l.level);
      lr.get("strength", l.strength);
      lr.get("lag_steps", l.lag_steps);
      lr.finish();
      c.cross_links.push_back(l);
    }
  }
  r.finish();
  return c;
}

json synth_json(const synth::SynthConfig& c) {
  json links = json::array();
  for (const auto& l : c.cross_links) {
    links.push_back({{"source", l.source}, {"target", l.target}, {"level", l.level}, {"strength", l.strength},
                     {"lag_steps", l.lag_steps}});
  }
  return {{"n_stocks", c.n_stocks},
          {"levels", c.levels},
          {"depth", c.depth},
          {"event_rate", c.event_rate},
          {"impact_coeffs", c.impact_coeffs},
          {"cross_links", links},
          {"noise_std", c.noise_std},
          {"common_std", c.common_std},
          {"common_std_by_stock", c.common_std_by_stock},
          {"days", c.days},
          {"step_seconds", c.step_seconds},
          {"lot", c.lot},
          {"max_lots", c.max_lots},
          {"spread_ticks", c.spread_ticks},
          {"spread_ticks_by_stock", c.spread_ticks_by_stock},
          {"tick", c.tick},
          {"base_price", c.base_price},
          {"start_date", c.start_date},
          {"tickers", c.tickers},
          {"sectors", c.sectors}};
}

bool whole_multiple(double a, double b) {
  const double q = a / b;
  return q >= 1 && std::abs(q - std::round(q)) < 1e-9;
}

}  // namespace

std::vector<std::string> default_contemporaneous_models(int levels) {
  std::vector<std::string> out;
  for (int m = 1; m <= levels; ++m) out.push_back("PI" + std::to_string(m));
  for (const char* n : {"PII", "CI1", "CII"}) out.emplace_back(n);
  out.push_back("PI" + std::to_string(levels) + "L");
  out.push_back("CI" + std::to_string(levels));
  for (const char* n : {"PIM", "CIM", "PIMI", "CIMI"}) out.emplace_back(n);
  return out;
}

std::vector<std::string> default_forward_models(int levels) {
  std::vector<std::string> out{"FPI1", "FCI1", "FPII", "FCII", "FAR", "FCR"};
  out.push_back("FPI" + std::to_string(levels));
  return out;
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  Reader r(j, "");
  bool models_given = false, forward_given = false;
  if (const json* in = r.raw("input")) {
    Reader ir(*in, "input");
    ir.get("mode", c.input.mode);
    ir.get("dir", c.input.dir);
    ir.get("universe", c.input.universe);
    ir.get("features_dir", c.input.features_dir);
    ir.get("sectors", c.input.sectors);
    ir.finish();
  }
  bool synth_levels = false;
  if (const json* s = r.raw("synth")) c.synth = parse_synth(*s, synth_levels);
  read_session(r, "day", c.day);
  read_session(r, "session", c.session);
  r.get("levels", c.levels);
  r.get("bucket_seconds", c.bucket_seconds);
  r.get("forward_bucket_seconds", c.forward_bucket_seconds);
  r.get("window_minutes", c.window_minutes);
  r.get("cadence_minutes", c.cadence_minutes);
  if (const json* a = r.raw("appendix_cadence_minutes")) {
    if (!a->is_null()) {
      if (!a->is_number()) fail(ErrorCode::config, "expected a number or null", "appendix_cadence_minutes");
      c.appendix_cadence_minutes = a->get<double>();
    }
  }
  if (const json* m = r.raw("models")) {
    Reader mr(*m, "models");
    models_given = mr.get("contemporaneous", c.contemporaneous_models);
    forward_given = mr.get("forward", c.forward_models);
    mr.finish();
  }
  if (const json* l = r.raw("lasso")) {
    Reader lr(*l, "lasso");
    lr.get("folds", c.lasso.folds);
    lr.get("grid_size", c.lasso.grid_size);
    lr.get("min_ratio", c.lasso.min_ratio);
    lr.get("tol", c.lasso.tol);
    lr.get("gap_tol", c.lasso.gap_tol);
    lr.get("max_sweeps", c.lasso.max_sweeps);
    lr.get("include_zero", c.lasso.include_zero);
    lr.finish();
  }
  if (const json* b = r.raw("backtest")) {
    Reader br(*b, "backtest");
    br.get("symmetric_deciles", c.symmetric_deciles);
    br.finish();
  }
  if (const json* n = r.raw("network")) {
    Reader nr(*n, "network");
    nr.get("percentile", c.network_percentile);
    nr.get("normalize", c.network_normalize);
    nr.finish();
  }
  if (const json* h = r.raw("horizon")) {
    Reader hr(*h, "horizon");
    hr.get("p", c.horizon_p);
    hr.finish();
  }
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.finish();

  if (!synth_levels) c.synth.levels = c.levels;
  c.synth.day = c.day;
  if (!models_given) c.contemporaneous_models = default_contemporaneous_models(c.levels);
  if (!forward_given) c.forward_models = default_forward_models(c.levels);
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config " + path.string(), "config");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, std::string("config is not valid JSON: ") + e.what(), "config");
  }
  return parse_config(j);
}

void RunConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& msg) { fail(ErrorCode::config, msg, field); };
  if (input.mode != "synth" && input.mode != "lobster") bad("input.mode", "mode must be synth or lobster");
  if (input.mode == "lobster" && input.dir.empty() && input.features_dir.empty()) {
    bad("input.dir", "lobster mode needs a data directory");
  }
  if (input.mode == "lobster" && !input.dir.empty() && !fs::is_directory(input.dir)) {
    bad("input.dir", "directory does not exist: " + input.dir);
  }
  if (!input.features_dir.empty() && !fs::is_directory(input.features_dir)) {
    bad("input.features_dir", "directory does not exist: " + input.features_dir);
  }
  if (!input.sectors.empty() && !fs::is_regular_file(input.sectors)) {
    bad("input.sectors", "file does not exist: " + input.sectors);
  }
  if (levels < 1 || levels > 100) bad("levels", "levels must lie in [1, 100]");
  if (day.close <= day.open) bad("day", "day close must follow open");
  if (session.open < day.open || session.close > day.close || session.close <= session.open) {
    bad("session", "session must lie inside the trading day");
  }
  if (!(bucket_seconds > 0) || !whole_multiple(day.close.seconds() - day.open.seconds(), bucket_seconds)) {
    bad("bucket_seconds", "bucket length must divide the trading day");
  }
  if (!(forward_bucket_seconds > 0) ||
      !whole_multiple(day.close.seconds() - day.open.seconds(), forward_bucket_seconds)) {
    bad("forward_bucket_seconds", "bucket length must divide the trading day");
  }
  if (!whole_multiple(window_minutes * 60, bucket_seconds)) {
    bad("window_minutes", "window must be a whole number of buckets");
  }
  if (!whole_multiple(cadence_minutes * 60, bucket_seconds)) {
    bad("cadence_minutes", "cadence must be a whole number of buckets");
  }
  if (appendix_cadence_minutes && !whole_multiple(*appendix_cadence_minutes * 60, bucket_seconds)) {
    bad("appendix_cadence_minutes", "cadence must be a whole number of buckets");
  }
  if (lasso.folds < 2) bad("lasso.folds", "folds must be >= 2");
  if (lasso.grid_size < 1) bad("lasso.grid_size", "grid_size must be >= 1");
  if (!(lasso.min_ratio > 0 && lasso.min_ratio < 1)) bad("lasso.min_ratio", "min_ratio must lie in (0, 1)");
  if (!(lasso.tol > 0)) bad("lasso.tol", "tol must be > 0");
  if (!(lasso.gap_tol >= 0)) bad("lasso.gap_tol", "gap_tol must be >= 0");
  if (lasso.max_sweeps < 1) bad("lasso.max_sweeps", "max_sweeps must be >= 1");
  if (!(network_percentile > 0 && network_percentile < 100)) bad("network.percentile", "percentile must lie in (0, 100)");
  if (horizon_p < 1) bad("horizon.p", "p must be >= 1");
  if (threads < 0) bad("threads", "threads must be >= 0");
  for (const auto& m : contemporaneous_models) {
    if (impact::parse_model(m, levels).forward) bad("models", "model '" + m + "' is forward-looking; list it under models.forward");
  }
  for (const auto& m : forward_models) {
    if (!impact::parse_model(m, levels).forward) bad("models", "model '" + m + "' is contemporaneous; list it under models.contemporaneous");
  }
  if (input.mode == "synth") {
    synth.validate();
    if (synth.levels < levels) bad("synth.levels", "synthetic books need at least `levels` levels");
  }
}

std::uint64_t RunConfig::synth_seed() const { return derive_seed(seed, "synth_market"); }

json to_json(const RunConfig& c) {
  json j;
  j["input"] = {{"mode", c.input.mode},
                {"dir", c.input.dir},
                {"universe", c.input.universe},
                {"features_dir", c.input.features_dir},
                {"sectors", c.input.sectors}};
  j["synth"] = synth_json(c.synth);
  j["day"] = {{"open", lob::format_clock(c.day.open)}, {"close", lob::format_clock(c.day.close)}};
  j["session"] = {{"open", lob::format_clock(c.session.open)}, {"close", lob::format_clock(c.session.close)}};
  j["levels"] = c.levels;
  j["bucket_seconds"] = c.bucket_seconds;
  j["forward_bucket_seconds"] = c.forward_bucket_seconds;
  j["window_minutes"] = c.window_minutes;
  j["cadence_minutes"] = c.cadence_minutes;
  j["appendix_cadence_minutes"] = c.appendix_cadence_minutes ? json(*c.appendix_cadence_minutes) : json(nullptr);
  j["models"] = {{"contemporaneous", c.contemporaneous_models}, {"forward", c.forward_models}};
  j["lasso"] = {{"folds", c.lasso.folds},           {"grid_size", c.lasso.grid_size},
                {"min_ratio", c.lasso.min_ratio},   {"tol", c.lasso.tol},
                {"gap_tol", c.lasso.gap_tol}, {"max_sweeps", c.lasso.max_sweeps}, {"include_zero", c.lasso.include_zero}};
  j["backtest"] = {{"symmetric_deciles", c.symmetric_deciles}};
  j["network"] = {{"percentile", c.network_percentile}, {"normalize", c.network_normalize}};
  j["horizon"] = {{"p", c.horizon_p}};
  j["seed"] = c.seed;
  return j;
}

// ---------------------------------------------------------------------------
// Inputs

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) {
    while (!cur.empty() && (cur.back() == '\r' || cur.back() == ' ')) cur.pop_back();
    out.push_back(cur);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail(ErrorCode::parse, "not a number: '" + s + "'", where);
  return v;
}

}  // namespace

std::map<std::string, SectorInfo> read_sectors(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open sector file " + path.string(), "input.sectors");
  std::string line;
  std::vector<std::tuple<std::string, std::string, double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (row == 1 && !f.empty() && f[0] == "ticker") continue;
    if (f.size() != 3) fail(ErrorCode::parse, "expected ticker,sector,market_cap", path.string() + ":" + std::to_string(row));
    rows.emplace_back(f[0], f[1], parse_double(f[2], path.string() + ":" + std::to_string(row)));
  }
  auto order = rows;
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return std::get<2>(a) > std::get<2>(b); });
  std::map<std::string, SectorInfo> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out[std::get<0>(order[i])] = SectorInfo{std::get<1>(order[i]), static_cast<int>(i) + 1};
  }
  return out;
}

std::vector<features::FeatureRow> stock_day_rows(std::span<const lob::BookSnapshot> snapshots, const RunConfig& cfg,
                                                 double h_seconds,
                                                 std::span<const features::MidGrid* const> prior_grids) {
  auto rows = features::compute_rows(snapshots, cfg.day, h_seconds, cfg.levels);
  features::fill_sigma(rows, h_seconds, prior_grids, 5);
  const auto window = static_cast<std::size_t>(std::llround(cfg.window_minutes * 60.0 / h_seconds));
  factor::fill_integrated(rows, window);
  return rows;
}

namespace {

features::Panel empty_panel(const RunConfig& cfg, double h) {
  features::Panel p;
  p.h_seconds = h;
  p.day = cfg.day;
  p.levels = cfg.levels;
  return p;
}

// Shared day loop over stocks once the raw snapshots are available.
struct PanelBuilder {
  const RunConfig& cfg;
  PanelSet ps;
  std::vector<std::deque<features::MidGrid>> grids;  // per stock, last 5 days

  PanelBuilder(const RunConfig& c, std::vector<std::string> stocks) : cfg(c) {
    ps.fine = empty_panel(cfg, cfg.bucket_seconds);
    ps.coarse = empty_panel(cfg, cfg.forward_bucket_seconds);
    ps.fine.stocks = ps.coarse.stocks = std::move(stocks);
    grids.resize(ps.fine.stocks.size());
  }

  // load(i) returns the LobsterDay of stock i.
  template <class Load>
  void add_day(const std::string& date, Load&& load) {
    const std::size_t n = ps.fine.stocks.size();
    std::vector<std::vector<features::FeatureRow>> fine(n), coarse(n);
    std::vector<features::DailyStats> stats(n);
    std::vector<features::MidGrid> new_grids(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
      const lob::LobsterDay day = load(i);
      std::vector<const features::MidGrid*> prior;
      for (const auto& g : grids[i]) prior.push_back(&g);
      fine[i] = stock_day_rows(day.snapshots, cfg, cfg.bucket_seconds, prior);
      coarse[i] = stock_day_rows(day.snapshots, cfg, cfg.forward_bucket_seconds, prior);
      new_grids[i] = features::build_mid_grid(day.snapshots, cfg.day);
      stats[i] = features::daily_stats(day, new_grids[i]);
    });
    for (std::size_t i = 0; i < n; ++i) {
      grids[i].push_back(std::move(new_grids[i]));
      if (grids[i].size() > 5) grids[i].pop_front();
    }
    ps.fine.dates.push_back(date);
    ps.coarse.dates.push_back(date);
    ps.fine.rows.push_back(std::move(fine));
    ps.coarse.rows.push_back(std::move(coarse));
    ps.stats.push_back(std::move(stats));
  }
};

void attach_sectors(const RunConfig& cfg, PanelSet& ps) {
  const auto& stocks = ps.fine.stocks;
  ps.sectors.assign(stocks.size(), SectorInfo{});
  for (std::size_t i = 0; i < stocks.size(); ++i) ps.sectors[i].mcap_rank = static_cast<int>(i) + 1;
  if (!cfg.input.sectors.empty()) {
    const auto table = read_sectors(cfg.input.sectors);
    for (std::size_t i = 0; i < stocks.size(); ++i) {
      auto it = table.find(stocks[i]);
      if (it == table.end()) fail(ErrorCode::config, "ticker " + stocks[i] + " missing from sector file", "input.sectors");
      ps.sectors[i] = it->second;
    }
  } else if (cfg.input.mode == "synth") {
    for (std::size_t i = 0; i < stocks.size(); ++i) ps.sectors[i].sector = cfg.synth.sector(static_cast<int>(i));
  }
}

}  // namespace

PanelSet build_panels_synth(const RunConfig& cfg, const DaySink& sink) {
  auto sc = cfg.synth;
  sc.seed = cfg.synth_seed();
  sc.day = cfg.day;
  synth::Generator gen(sc);
  std::vector<std::string> stocks;
  for (int i = 0; i < sc.n_stocks; ++i) stocks.push_back(sc.ticker(i));
  PanelBuilder b(cfg, stocks);
  while (!gen.done()) {
    auto day = gen.next_day();
    if (sink) sink(day);
    log::info("features for " + day.date);
    b.add_day(day.date, [&](std::size_t i) {
      lob::LobsterDay d;
      d.events = std::move(day.stocks[i].events);
      d.snapshots = std::move(day.stocks[i].snapshots);
      return d;
    });
  }
  attach_sectors(cfg, b.ps);
  return std::move(b.ps);
}

PanelSet build_panels_lobster(const RunConfig& cfg) {
  static const std::regex pattern(R"(^(.+)_(\d{4}-\d{2}-\d{2})_(\d+)_(\d+)_message_(\d+)\.csv$)");
  struct Files {
    fs::path message, orderbook;
  };
  std::map<std::string, std::map<std::string, Files>> found;
  for (const auto& entry : fs::directory_iterator(cfg.input.dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) continue;
    const int file_levels = std::stoi(m[5]);
    if (file_levels < cfg.levels) {
      fail(ErrorCode::config, name + " has " + std::to_string(file_levels) + " levels; config needs " +
                                  std::to_string(cfg.levels), "levels");
    }
    const std::string ob = name.substr(0, name.size() - m[5].length() - 13) + "_orderbook_" + m[5].str() + ".csv";
    const fs::path ob_path = entry.path().parent_path() / ob;
    if (!fs::is_regular_file(ob_path)) fail(ErrorCode::io, "missing orderbook file " + ob_path.string(), "input.dir");
    found[m[1]][m[2]] = Files{entry.path(), ob_path};
  }
  std::vector<std::string> stocks = cfg.input.universe;
  if (stocks.empty())
    for (const auto& [t, _] : found) stocks.push_back(t);
  if (stocks.empty()) fail(ErrorCode::config, "no LOBSTER files found in " + cfg.input.dir, "input.dir");
  std::set<std::string> dates;
  for (std::size_t i = 0; i < stocks.size(); ++i) {
    auto it = found.find(stocks[i]);
    if (it == found.end()) fail(ErrorCode::config, "no files for ticker " + stocks[i], "input.universe");
    std::set<std::string> mine;
    for (const auto& [d, _] : it->second) mine.insert(d);
    if (i == 0) {
      dates = mine;
    } else {
      std::set<std::string> keep;
      std::set_intersection(dates.begin(), dates.end(), mine.begin(), mine.end(), std::inserter(keep, keep.end()));
      if (keep.size() != dates.size() || keep.size() != mine.size()) log::warn("dates differ across tickers; using the common dates");
      dates = std::move(keep);
    }
  }
  if (dates.empty()) fail(ErrorCode::config, "tickers share no trading dates", "input.universe");
  PanelBuilder b(cfg, stocks);
  for (const auto& date : dates) {
    log::info("features for " + date);
    b.add_day(date, [&](std::size_t i) {
      const auto& f = found.at(stocks[i]).at(date);
      return lob::load_lobster_day(f.message, f.orderbook, cfg.levels);
    });
  }
  attach_sectors(cfg, b.ps);
  return std::move(b.ps);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string bucket_dir(double h) { return "h" + fmt(h); }

std::string feature_header(int levels) {
  std::string h = "stock,t";
  for (int m = 1; m <= levels; ++m) h += ",ofi" + std::to_string(m);
  return h + ",ofiI,Q,R,r,mid,spread,sigma,valid\n";
}

}  // namespace

void write_feature_csv(std::ostream& out, const features::Panel& panel, std::size_t day) {
  out << feature_header(panel.levels);
  std::string line;
  for (std::size_t i = 0; i < panel.stocks.size(); ++i) {
    for (const auto& row : panel.rows[day][i]) {
      line = panel.stocks[i] + "," + lob::format_clock(row.t);
      for (double v : row.ofi) line += "," + fmt(v);
      for (double v : {row.ofi_i, row.depth, row.R, row.r, row.mid, row.spread, row.sigma}) line += "," + fmt(v);
      line += "," + std::to_string(row.flags) + "\n";
      out << line;
    }
  }
}

namespace {

void read_feature_csv(const fs::path& path, features::Panel& panel) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string(), "input.features_dir");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line + "\n" != feature_header(panel.levels)) {
    fail(ErrorCode::parse, "unexpected feature header (levels mismatch?)", path.string());
  }
  const std::size_t cols = 2 + static_cast<std::size_t>(panel.levels) + 8;
  std::vector<std::vector<features::FeatureRow>> by_stock;
  std::vector<std::string> order;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(row_no);
    if (f.size() != cols) fail(ErrorCode::parse, "expected " + std::to_string(cols) + " columns", where);
    if (order.empty() || order.back() != f[0]) {
      if (std::find(order.begin(), order.end(), f[0]) != order.end()) fail(ErrorCode::parse, "stock rows not contiguous", where);
      order.push_back(f[0]);
      by_stock.emplace_back();
    }
    features::FeatureRow row;
    row.t = lob::parse_clock(f[1]);
    std::size_t c = 2;
    for (int m = 0; m < panel.levels; ++m) row.ofi.push_back(parse_double(f[c++], where));
    row.ofi_i = parse_double(f[c++], where);
    row.depth = parse_double(f[c++], where);
    row.R = parse_double(f[c++], where);
    row.r = parse_double(f[c++], where);
    row.mid = parse_double(f[c++], where);
    row.spread = parse_double(f[c++], where);
    row.sigma = parse_double(f[c++], where);
    row.flags = static_cast<std::uint32_t>(std::stoul(f[c]));
    by_stock.back().push_back(std::move(row));
  }
  if (panel.stocks.empty()) panel.stocks = order;
  if (order != panel.stocks) fail(ErrorCode::parse, "stock list differs from earlier days", path.string());
  for (const auto& rows : by_stock) {
    if (rows.size() != panel.buckets_per_day()) fail(ErrorCode::parse, "wrong number of buckets", path.string());
  }
  panel.rows.push_back(std::move(by_stock));
}

}  // namespace

PanelSet load_feature_export(const RunConfig& cfg, const fs::path& dir) {
  PanelSet ps;
  ps.fine = empty_panel(cfg, cfg.bucket_seconds);
  ps.coarse = empty_panel(cfg, cfg.forward_bucket_seconds);
  auto load = [&](features::Panel& panel) {
    const fs::path sub = dir / bucket_dir(panel.h_seconds);
    if (!fs::is_directory(sub)) fail(ErrorCode::io, "missing feature directory " + sub.string(), "input.features_dir");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(sub))
      if (e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorCode::io, "no feature files in " + sub.string(), "input.features_dir");
    for (const auto& f : files) {
      read_feature_csv(f, panel);
      panel.dates.push_back(f.stem().string());
    }
  };
  load(ps.fine);
  load(ps.coarse);
  if (ps.fine.dates != ps.coarse.dates || ps.fine.stocks != ps.coarse.stocks) {
    fail(ErrorCode::parse, "fine and coarse feature exports disagree", "input.features_dir");
  }
  const std::size_t n = ps.fine.stocks.size();
  ps.stats.assign(ps.fine.dates.size(), std::vector<features::DailyStats>(n));
  const fs::path stats_path = dir / "daily_stats.csv";
  if (fs::is_regular_file(stats_path)) {
    std::ifstream in(stats_path);
    std::string line;
    std::getline(in, line);
    std::size_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      const auto f = split_csv(line);
      const std::string where = stats_path.string() + ":" + std::to_string(row);
      if (f.size() != 5) fail(ErrorCode::parse, "expected date,stock,volume,minute_vol,mean_spread", where);
      const auto d = std::find(ps.fine.dates.begin(), ps.fine.dates.end(), f[0]) - ps.fine.dates.begin();
      const auto s = std::find(ps.fine.stocks.begin(), ps.fine.stocks.end(), f[1]) - ps.fine.stocks.begin();
      if (static_cast<std::size_t>(d) >= ps.stats.size() || static_cast<std::size_t>(s) >= n) continue;
      auto& st = ps.stats[static_cast<std::size_t>(d)][static_cast<std::size_t>(s)];
      st.volume = parse_double(f[2], where);
      st.minute_vol = parse_double(f[3], where);
      st.mean_spread = parse_double(f[4], where);
    }
  }
  auto cfg_copy = cfg;
  if (cfg.input.mode == "synth" && cfg.synth.n_stocks != static_cast<int>(n)) cfg_copy.input.mode = "lobster";
  attach_sectors(cfg_copy, ps);
  return ps;
}

PanelSet build_panels(const RunConfig& cfg, const DaySink& sink) {
  if (!cfg.input.features_dir.empty()) return load_feature_export(cfg, cfg.input.features_dir);
  if (cfg.input.mode == "synth") return build_panels_synth(cfg, sink);
  return build_panels_lobster(cfg);
}

// ---------------------------------------------------------------------------
// Output staging

struct Outputs {
  fs::path final_dir;
  fs::path staging;
  std::vector<std::string> files;  // relative paths
  bool committed = false;
  bool created_final = false;

  explicit Outputs(fs::path out) : final_dir(std::move(out)) {
    std::error_code ec;
    if (!fs::exists(final_dir)) {
      fs::create_directories(final_dir, ec);
      if (ec) fail(ErrorCode::io, "cannot create output directory " + final_dir.string() + ": " + ec.message(), "out");
      created_final = true;
    }
    if (!fs::is_directory(final_dir)) fail(ErrorCode::io, final_dir.string() + " is not a directory", "out");
    staging = final_dir / (".staging-" + std::to_string(::getpid()));
    fs::remove_all(staging, ec);
    fs::create_directories(staging, ec);
    if (ec) fail(ErrorCode::io, "cannot create staging directory: " + ec.message(), "out");
  }

  ~Outputs() {
    if (committed) return;
    std::error_code ec;
    fs::remove_all(staging, ec);
    if (created_final && fs::is_empty(final_dir, ec)) fs::remove(final_dir, ec);
  }

  std::ofstream open(const std::string& rel) {
    const fs::path p = staging / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) fail(ErrorCode::io, "cannot write " + p.string(), "out");
    if (std::find(files.begin(), files.end(), rel) == files.end()) files.push_back(rel);
    return out;
  }

  void text(const std::string& rel, const std::string& content) {
    auto out = open(rel);
    out << content;
    if (!out) fail(ErrorCode::io, "write failed for " + rel, "out");
  }

  json manifest_entries() const {
    auto sorted = files;
    std::sort(sorted.begin(), sorted.end());
    json arr = json::array();
    for (const auto& rel : sorted) {
      const fs::path p = staging / rel;
      arr.push_back({{"path", rel}, {"sha256", sha256_file(p)}, {"bytes", fs::file_size(p)}});
    }
    return arr;
  }

  void commit(const json& manifest) {
    text("manifest.json", manifest.dump(2) + "\n");
    auto order = files;
    // Manifest last so a reader never sees it before the files it lists.
    std::stable_partition(order.begin(), order.end(), [](const std::string& f) { return f != "manifest.json"; });
    for (const auto& rel : order) {
      const fs::path dst = final_dir / rel;
      fs::create_directories(dst.parent_path());
      fs::rename(staging / rel, dst);
    }
    committed = true;
    std::error_code ec;
    fs::remove_all(staging, ec);
  }
};

// ---------------------------------------------------------------------------
// Stages

Stage parse_stage(const std::string& name) {
  static const std::pair<const char*, Stage> names[] = {
      {"synth", Stage::synth},         {"features", Stage::features}, {"contemporaneous", Stage::contemporaneous},
      {"forward", Stage::forward},     {"backtest", Stage::backtest}, {"network", Stage::network},
      {"all", Stage::all}};
  for (const auto& [n, s] : names)
    if (name == n) return s;
  fail(ErrorCode::invalid_argument, "unknown subcommand '" + name + "'", "subcommand");
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::synth: return "synth";
    case Stage::features: return "features";
    case Stage::contemporaneous: return "contemporaneous";
    case Stage::forward: return "forward";
    case Stage::backtest: return "backtest";
    case Stage::network: return "network";
    case Stage::all: return "all";
  }
  return "?";
}

namespace {

double pct(double v) { return v * 100.0; }

class Csv {
 public:
  explicit Csv(std::string header) { buf_ = std::move(header) + "\n"; }
  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((buf_ += (first ? "" : ","), buf_ += cell(cells), first = false), ...);
    buf_ += "\n";
  }
  const std::string& str() const { return buf_; }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  std::string buf_;
};

std::string truth_json(const RunConfig& cfg, const std::vector<std::string>& dates) {
  json j = synth_json(cfg.synth);
  json beta = json::array();
  for (int m = 1; m <= cfg.synth.levels; ++m) beta.push_back(cfg.synth.beta(m));
  j["beta"] = beta;
  j["seed"] = cfg.synth_seed();
  j["root_seed"] = cfg.seed;
  j["dates"] = dates;
  json tickers = json::array(), sectors = json::array();
  for (int i = 0; i < cfg.synth.n_stocks; ++i) {
    tickers.push_back(cfg.synth.ticker(i));
    sectors.push_back(cfg.synth.sector(i));
  }
  j["tickers"] = tickers;
  j["sectors"] = sectors;
  j["impact_rule"] = "mid move in ticks = sum_m beta_m * F_m / (2 * depth) + noise";
  return j.dump(2) + "\n";
}

// Synth writer: LOBSTER files per stock-day plus step-level truth.
struct SynthWriter {
  Outputs& out;
  const RunConfig& cfg;
  std::string steps;
  std::vector<std::string> dates;

  SynthWriter(Outputs& o, const RunConfig& c) : out(o), cfg(c) {
    steps = "stock,date,step_end,signal,noise,move";
    for (int m = 1; m <= cfg.synth.levels; ++m) steps += ",F" + std::to_string(m);
    steps += "\n";
  }

  void operator()(const synth::DayOutput& day) {
    dates.push_back(day.date);
    const std::string ml = std::to_string(cfg.synth.levels);
    for (std::size_t i = 0; i < day.stocks.size(); ++i) {
      const auto ticker = cfg.synth.ticker(static_cast<int>(i));
      const auto stem = "lobster/" + synth::lobster_stem(ticker, day.date, cfg.day);
      {
        auto f = out.open(stem + "_message_" + ml + ".csv");
        lob::write_message_csv(f, day.stocks[i].events);
      }
      {
        auto f = out.open(stem + "_orderbook_" + ml + ".csv");
        lob::write_orderbook_csv(f, day.stocks[i].snapshots);
      }
      for (const auto& s : day.stocks[i].steps) {
        steps += ticker + "," + day.date + "," + lob::format_clock(s.end) + "," + fmt(s.signal_ticks) + "," +
                 fmt(s.noise_ticks) + "," + std::to_string(s.move_ticks);
        for (auto v : s.flow) steps += "," + std::to_string(v);
        steps += "\n";
      }
    }
  }

  void finish() {
    out.text("truth/truth_steps.csv", steps);
    out.text("truth/ground_truth.json", truth_json(cfg, dates));
  }
};

void write_features(Outputs& out, const PanelSet& ps, const RunConfig& cfg) {
  for (const auto* panel : {&ps.fine, &ps.coarse}) {
    for (std::size_t d = 0; d < panel->dates.size(); ++d) {
      auto f = out.open("features/" + bucket_dir(panel->h_seconds) + "/" + panel->dates[d] + ".csv");
      write_feature_csv(f, *panel, d);
    }
  }
  Csv stats("date,stock,volume,minute_vol,mean_spread");
  for (std::size_t d = 0; d < ps.stats.size(); ++d)
    for (std::size_t i = 0; i < ps.fine.stocks.size(); ++i)
      stats.row(ps.fine.dates[d], ps.fine.stocks[i], ps.stats[d][i].volume, ps.stats[d][i].minute_vol,
                ps.stats[d][i].mean_spread);
  out.text("features/daily_stats.csv", stats.str());

  // PCA diagnostics over each fitting window.
  impact::Protocol proto;
  proto.session = cfg.session;
  proto.window_minutes = cfg.window_minutes;
  proto.cadence_minutes = cfg.cadence_minutes;
  const auto windows = impact::session_windows(ps.fine, proto);
  std::string header = "date,stock,window_start";
  for (int m = 1; m <= cfg.levels; ++m) header += ",ratio" + std::to_string(m);
  for (int m = 1; m <= cfg.levels; ++m) header += ",w" + std::to_string(m);
  Csv per_window(header);
  std::vector<double> sum(static_cast<std::size_t>(cfg.levels), 0.0), sum_w(static_cast<std::size_t>(cfg.levels), 0.0);
  std::size_t count = 0;
  for (std::size_t d = 0; d < ps.fine.rows.size(); ++d) {
    for (std::size_t i = 0; i < ps.fine.stocks.size(); ++i) {
      for (const auto& w : windows) {
        std::vector<const features::FeatureRow*> rows;
        for (std::size_t k = w.fit_begin; k < w.fit_end; ++k)
          if (ps.fine.rows[d][i][k].ok(features::kNoDepth)) rows.push_back(&ps.fine.rows[d][i][k]);
        if (rows.size() < 2) continue;
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), cfg.levels);
        for (std::size_t r = 0; r < rows.size(); ++r)
          for (int m = 0; m < cfg.levels; ++m) x(static_cast<Eigen::Index>(r), m) = rows[r]->ofi[static_cast<std::size_t>(m)];
        const auto p = factor::fit_pca(x);
        if (p.degenerate) continue;
        std::string line = ps.fine.dates[d] + "," + ps.fine.stocks[i] + "," + lob::format_clock(w.start);
        for (int m = 0; m < cfg.levels; ++m) {
          line += "," + fmt(p.ratios(m));
          sum[static_cast<std::size_t>(m)] += p.ratios(m);
        }
        const double l1 = p.vectors.col(0).lpNorm<1>();
        for (int m = 0; m < cfg.levels; ++m) {
          line += "," + fmt(p.vectors(m, 0));
          sum_w[static_cast<std::size_t>(m)] += p.vectors(m, 0) / l1;
        }
        per_window.row(line);
        ++count;
      }
    }
  }
  out.text("reports/pca_windows.csv", per_window.str());
  Csv mean("component,mean_ratio_pct,mean_weight_l1");
  for (int m = 0; m < cfg.levels; ++m) {
    const double c = count > 0 ? static_cast<double>(count) : features::kNaN;
    mean.row("PC" + std::to_string(m + 1), pct(sum[static_cast<std::size_t>(m)] / c), sum_w[static_cast<std::size_t>(m)] / c);
  }
  out.text("reports/pca_variance.csv", mean.str());
}

bool has(const std::vector<std::string>& v, const std::string& s) { return std::find(v.begin(), v.end(), s) != v.end(); }

std::vector<impact::ModelSpec> specs(const std::vector<std::string>& names, int levels) {
  std::vector<impact::ModelSpec> out;
  for (const auto& n : names) out.push_back(impact::parse_model(n, levels));
  return out;
}

void write_fits(Outputs& out, const std::string& rel, const std::vector<impact::WindowFit>& fits, const PanelSet& ps) {
  Csv csv("date,stock,window_start,model,is_r2,oos_r2,lambda,nnz,is_r2_raw,n_fit,n_oos");
  for (const auto& f : fits) {
    csv.row(ps.fine.dates[f.day], ps.fine.stocks[f.stock], lob::format_clock(f.window_start), f.model, f.is_r2,
            f.oos_r2, f.lambda, f.nnz, f.is_r2_raw, f.n_fit, f.n_oos);
  }
  out.text(rel, csv.str());
}

void write_comparisons(Outputs& out, const std::string& rel, const std::vector<impact::WindowFit>& fits,
                       const std::vector<std::pair<std::string, std::string>>& pairs,
                       const std::vector<std::string>& models) {
  Csv csv("sample,base,model,base_r2_pct,model_r2_pct,delta_r2_pct,p_value,n");
  for (const auto& [a, b] : pairs) {
    if (!has(models, a) || !has(models, b)) continue;
    for (bool oos : {false, true}) {
      const auto row = impact::compare(fits, a, b, oos);
      csv.row(row.sample, a, b, pct(row.base_mean), pct(row.model_mean), pct(row.test.mean_delta), row.test.p_value,
              row.test.n);
    }
  }
  out.text(rel, csv.str());
}

void write_contemporaneous(Outputs& out, const std::string& suffix, const impact::ContemporaneousReport& rep,
                           const PanelSet& ps, const RunConfig& cfg, const std::vector<std::string>& models) {
  write_fits(out, "reports/fits_contemporaneous" + suffix + ".csv", rep.fits, ps);
  // Multi-level price impact: one column per PI model.
  std::vector<std::string> levels;
  for (int m = 1; m <= cfg.levels; ++m)
    if (has(models, "PI" + std::to_string(m))) levels.push_back("PI" + std::to_string(m));
  {
    std::string header = "sample";
    for (const auto& m : levels) header += "," + m;
    Csv csv(header);
    for (const char* sample : {"is", "oos", "is_raw"}) {
      std::string line = sample;
      for (const auto& m : levels) {
        double v;
        if (std::string(sample) == "is_raw") {
          double s = 0;
          std::size_t n = 0;
          for (const auto& f : rep.fits)
            if (f.model == m && std::isfinite(f.is_r2_raw)) {
              s += f.is_r2_raw;
              ++n;
            }
          v = n ? s / static_cast<double>(n) : features::kNaN;
        } else {
          v = impact::mean_metric(rep.fits, m, std::string(sample) == "oos");
        }
        line += "," + fmt(pct(v));
      }
      csv.row(line);
    }
    out.text("reports/pi_levels" + suffix + ".csv", csv.str());
  }
  if (has(models, "PII")) {
    Csv csv("sample,PII");
    csv.row("is", pct(impact::mean_metric(rep.fits, "PII", false)));
    csv.row("oos", pct(impact::mean_metric(rep.fits, "PII", true)));
    out.text("reports/pi_integrated" + suffix + ".csv", csv.str());
  }
  write_comparisons(out, "reports/cross_vs_price" + suffix + ".csv", rep.fits, {{"PI1", "CI1"}, {"PII", "CII"}}, models);
  const std::string deep = std::to_string(cfg.levels);
  write_comparisons(out, "reports/deep_cross" + suffix + ".csv", rep.fits,
                    {{"PI" + deep + "L", "CI" + deep}, {"PI" + deep, "CI" + deep}}, models);
  write_comparisons(out, "reports/common_factor" + suffix + ".csv", rep.fits,
                    {{"PIM", "CIM"}, {"PIMI", "CIMI"}, {"PI1", "PIM"}, {"PII", "PIMI"}}, models);

  // Characteristic quartiles from previous-day statistics.
  if (!suffix.empty()) return;
  Csv csv("characteristic,quartile,model,is_r2_pct,oos_r2_pct,stock_days");
  const std::size_t n = ps.fine.stocks.size();
  if (n >= 4) {
    struct Acc {
      double is = 0, oos = 0;
      std::size_t n_is = 0, n_oos = 0;
      std::set<std::pair<std::size_t, std::size_t>> keys;
    };
    for (const char* ch : {"volume", "volatility", "spread"}) {
      for (const std::string m : {"PI1", "PII"}) {
        if (!has(models, m)) continue;
        Acc acc[4];
        for (std::size_t d = 1; d < ps.stats.size(); ++d) {
          std::vector<double> v(n);
          for (std::size_t i = 0; i < n; ++i) {
            const auto& s = ps.stats[d - 1][i];
            v[i] = ch == std::string("volume") ? s.volume : ch == std::string("volatility") ? s.minute_vol : s.mean_spread;
          }
          const auto q = impact::quartile_labels(v);
          for (const auto& f : rep.fits) {
            if (f.day != d || f.model != m) continue;
            auto& a = acc[q[f.stock]];
            if (std::isfinite(f.is_r2)) {
              a.is += f.is_r2;
              ++a.n_is;
            }
            if (std::isfinite(f.oos_r2)) {
              a.oos += f.oos_r2;
              ++a.n_oos;
            }
            a.keys.insert({d, f.stock});
          }
        }
        for (int b = 0; b < 4; ++b) {
          const auto& a = acc[b];
          csv.row(ch, "Q" + std::to_string(b + 1), m, a.n_is ? pct(a.is / static_cast<double>(a.n_is)) : features::kNaN,
                  a.n_oos ? pct(a.oos / static_cast<double>(a.n_oos)) : features::kNaN, a.keys.size());
        }
      }
    }
  } else {
    log::info("characteristic quartiles need at least 4 stocks; table left empty");
  }
  out.text("reports/characteristics.csv", csv.str());
}

struct ForwardResults {
  std::vector<impact::ForwardReport> reports;
};

ForwardResults run_forward_models(const PanelSet& ps, const RunConfig& cfg, const std::vector<std::string>& names) {
  impact::ForwardProtocol fp;
  fp.session = cfg.session;
  fp.lasso = cfg.lasso;
  fp.threads = cfg.threads;
  ForwardResults r;
  for (const auto& spec : specs(names, cfg.levels)) {
    log::info("forward model " + spec.name);
    r.reports.push_back(impact::run_forward(ps.coarse, spec, fp));
  }
  return r;
}

void write_forward(Outputs& out, const ForwardResults& fr, const PanelSet& ps, const RunConfig& cfg) {
  std::vector<impact::WindowFit> blocks;
  std::vector<std::string> names;
  Csv fits("date,stock,block_start,model,is_r2,oos_r2,n_oos");
  Csv fc("date,t,stock,model,forecast,realized,spread");
  for (const auto& rep : fr.reports) {
    names.push_back(rep.model);
    for (const auto& b : rep.blocks) {
      fits.row(ps.coarse.dates[b.day], ps.coarse.stocks[b.stock], lob::format_clock(b.window_start), b.model, b.is_r2,
               b.oos_r2, b.n_oos);
      blocks.push_back(b);
    }
    for (const auto& d : rep.days)
      for (std::size_t i = 0; i < d.forecast.size(); ++i)
        for (std::size_t k = 0; k < d.times.size(); ++k)
          fc.row(ps.coarse.dates[d.day], lob::format_clock(d.times[k]), ps.coarse.stocks[i], rep.model,
                 d.forecast[i][k], d.realized[i][k], d.spread[i][k]);
  }
  out.text("reports/fits_forward.csv", fits.str());
  out.text("reports/forecasts.csv", fc.str());
  const std::string deep = std::to_string(cfg.levels);
  write_comparisons(out, "reports/forward.csv", blocks,
                    {{"FPI1", "FCI1"}, {"FPII", "FCII"}, {"FAR", "FCR"}, {"FPI1", "FPI" + deep}}, names);

  const auto hi = impact::run_horizon_impact(ps.coarse, cfg.horizon_p);
  Csv h("lag,beta,cumsum,cumsum_bps,stock_days");
  for (int s = 0; s < hi.p; ++s)
    h.row(s + 1, hi.beta[static_cast<std::size_t>(s)], hi.cumsum[static_cast<std::size_t>(s)],
          hi.cumsum[static_cast<std::size_t>(s)] * 1e4, hi.fits);
  out.text("reports/horizon_impact.csv", h.str());
}

void write_backtest(Outputs& out, const ForwardResults& fr, const PanelSet& ps, const RunConfig& cfg) {
  backtest::BacktestConfig bc;
  bc.symmetric_deciles = cfg.symmetric_deciles;
  bc.threads = cfg.threads;
  std::vector<backtest::MinutePnl> all;
  for (const auto& rep : fr.reports) {
    auto m = backtest::run_backtest(rep, bc);
    all.insert(all.end(), m.begin(), m.end());
  }
  Csv minutes("date,minute,strategy,model,pnl_bps,n_selected,longs,shorts");
  for (const auto& m : all)
    minutes.row(ps.coarse.dates[m.day], lob::format_clock(m.t), m.strategy, m.model, m.pnl_bps, m.n_selected, m.longs,
                m.shorts);
  out.text("reports/pnl_minutes.csv", minutes.str());
  const auto summary = backtest::summarize(all, ps.coarse.dates);
  Csv overall("strategy,model,mean_pnl_bps,minutes");
  Csv quarterly("strategy,model,quarter,mean_pnl_bps,minutes");
  for (const auto& s : summary) {
    if (s.period == "all") {
      overall.row(s.strategy, s.model, s.mean_bps, s.minutes);
    } else {
      quarterly.row(s.strategy, s.model, s.period, s.mean_bps, s.minutes);
    }
  }
  out.text("reports/pnl_summary.csv", overall.str());
  out.text("reports/pnl_quarterly.csv", quarterly.str());

  const auto hp = backtest::run_horizon_pnl(ps.coarse, std::min<int>(cfg.horizon_p, static_cast<int>(ps.coarse.buckets_per_day()) - 1));
  Csv h("p,pnl_bps,n_eligible,t_max");
  for (const auto& x : hp) h.row(x.p, x.pnl, x.n, lob::format_clock(x.t_max));
  out.text("reports/horizon_pnl.csv", h.str());
}

void write_network(Outputs& out, const std::string& model, const Eigen::MatrixXd& m, const PanelSet& ps,
                   const RunConfig& cfg, bool forward, Csv& sv, Csv& od, Csv& gd) {
  const Eigen::MatrixXd w = cfg.network_normalize ? netview::normalize_mean_abs(m) : m;
  const auto net = netview::threshold_network(w, cfg.network_percentile);
  json nodes = json::array(), edges = json::array();
  for (std::size_t i = 0; i < ps.fine.stocks.size(); ++i) {
    nodes.push_back({{"id", ps.fine.stocks[i]}, {"sector", ps.sectors[i].sector}, {"mcap_rank", ps.sectors[i].mcap_rank}});
  }
  for (const auto& e : net.edges) {
    edges.push_back({{"src", ps.fine.stocks[e.src]}, {"dst", ps.fine.stocks[e.dst]}, {"weight", e.weight}});
  }
  json meta = {{"model", model},
               {"percentile", cfg.network_percentile},
               {"normalization", cfg.network_normalize ? "mean_abs" : "raw"},
               {"threshold", net.threshold},
               {"flagged_empty", net.flagged},
               {"orientation", "edge src -> dst: coefficient of src's flow in dst's return regression"}};
  if (forward) meta["lag_block"] = 0;
  json doc = {{"nodes", nodes}, {"edges", edges}, {"meta", meta}};
  out.text("networks/network_" + model + ".json", doc.dump(2) + "\n");

  const auto raw = netview::singular_values(m, false);
  const auto norm = netview::singular_values(m, true);
  for (std::size_t k = 0; k < raw.size(); ++k) sv.row(model, k + 1, raw[k], norm[k]);
  const auto deg = netview::out_degree_centrality(net);
  for (std::size_t i = 0; i < deg.size(); ++i) od.row(model, ps.fine.stocks[i], deg[i]);
  std::vector<std::string> sector_of;
  for (const auto& s : ps.sectors) sector_of.push_back(s.sector);
  for (const auto& g : netview::group_degree_centrality(net, sector_of)) gd.row(model, g.sector, g.members, g.in, g.out);
}

void write_meta(Outputs& out, const RunConfig& cfg) {
  json meta = {
      {"r2_tables_unit", "percent"},
      {"fits_unit", "fraction"},
      {"delta_r2_test", "one-sided paired t-test of mean(model - base) <= 0"},
      {"oos_r2_centering", "out-of-sample mean"},
      {"pca_window", "rows strictly preceding the bucket, window_minutes long, same day"},
      {"decile_rule", cfg.symmetric_deciles ? "symmetric top/bottom floor(N/10)" : "literal inf-definition, strict inequalities"},
      {"forward_network_lag_block", 0},
      {"lasso_penalty_units", "unnormalized RSS + lambda * ||b||_1 over standardized columns"}};
  out.text("reports/meta.json", meta.dump(2) + "\n");
}

}  // namespace

RunResult run(const RunConfig& cfg_in, Stage stage, const fs::path& out_dir) {
  RunConfig cfg = cfg_in;
  cfg.threads = resolve_threads(cfg.threads);
  cfg.validate();
  if (stage == Stage::synth && cfg.input.mode != "synth") {
    fail(ErrorCode::config, "the synth subcommand needs input.mode = synth", "input.mode");
  }
  Outputs out(out_dir);
  out.text("config.json", to_json(cfg_in).dump(2) + "\n");

  const bool all = stage == Stage::all;
  const bool writes_synth = (stage == Stage::synth || all) && cfg.input.mode == "synth" && cfg.input.features_dir.empty();
  std::optional<SynthWriter> sw;
  if (writes_synth) sw.emplace(out, cfg);

  if (stage == Stage::synth) {
    auto sc = cfg.synth;
    sc.seed = cfg.synth_seed();
    synth::Generator gen(sc);
    while (!gen.done()) (*sw)(gen.next_day());
    sw->finish();
  } else {
    DaySink sink;
    if (sw) sink = [&](const synth::DayOutput& d) { (*sw)(d); };
    const PanelSet ps = build_panels(cfg, sink);
    if (sw) sw->finish();
    if (stage == Stage::features || all) write_features(out, ps, cfg);

    impact::Protocol proto;
    proto.session = cfg.session;
    proto.window_minutes = cfg.window_minutes;
    proto.cadence_minutes = cfg.cadence_minutes;
    proto.lasso = cfg.lasso;
    proto.threads = cfg.threads;

    std::vector<std::string> cont = cfg.contemporaneous_models;
    std::vector<std::string> fwd = cfg.forward_models;
    if (stage == Stage::network) {
      std::erase_if(cont, [&](const std::string& n) {
        const auto s = impact::parse_model(n, cfg.levels);
        return !s.cross || s.input == impact::Input::common_factor;
      });
      std::erase_if(fwd, [&](const std::string& n) {
        const auto s = impact::parse_model(n, cfg.levels);
        return !s.cross || s.input == impact::Input::log_return;
      });
    }

    impact::ContemporaneousReport rep;
    const bool need_cont = all || stage == Stage::contemporaneous || stage == Stage::network;
    if (need_cont && !cont.empty()) {
      log::info("contemporaneous models");
      rep = impact::run_contemporaneous(ps.fine, specs(cont, cfg.levels), proto);
      if (stage != Stage::network) {
        write_contemporaneous(out, "", rep, ps, cfg, cont);
        if (cfg.appendix_cadence_minutes) {
          auto ap = proto;
          ap.cadence_minutes = *cfg.appendix_cadence_minutes;
          std::vector<std::string> subset;
          for (const auto& n : cont) {
            const auto s = impact::parse_model(n, cfg.levels);
            if (s.input != impact::Input::common_factor && (s.solver == impact::Solver::ols || n == "CI1" || n == "CII")) {
              subset.push_back(n);
            }
          }
          log::info("contemporaneous models at the appendix cadence");
          const auto rep2 = impact::run_contemporaneous(ps.fine, specs(subset, cfg.levels), ap);
          write_contemporaneous(out, "_cadence" + fmt(*cfg.appendix_cadence_minutes), rep2, ps, cfg, subset);
        }
      }
    }

    ForwardResults fr;
    const bool need_fwd = all || stage == Stage::forward || stage == Stage::backtest || stage == Stage::network;
    if (need_fwd && !fwd.empty()) fr = run_forward_models(ps, cfg, fwd);
    if (all || stage == Stage::forward) write_forward(out, fr, ps, cfg);
    if (all || stage == Stage::backtest) write_backtest(out, fr, ps, cfg);

    if (all || stage == Stage::network) {
      Csv sv("model,k,singular_value,normalized");
      Csv od("model,stock,out_degree");
      Csv gd("model,sector,members,group_in,group_out");
      for (const auto& n : cont) {
        const auto s = impact::parse_model(n, cfg.levels);
        if (!s.cross || s.input == impact::Input::common_factor) continue;
        write_network(out, n, netview::coefficient_matrix(rep.fits, n, ps.fine.stocks.size()), ps, cfg, false, sv, od, gd);
      }
      for (const auto& r : fr.reports) {
        const auto s = impact::parse_model(r.model, cfg.levels);
        if (!s.cross || s.input == impact::Input::log_return) continue;
        write_network(out, r.model, netview::forward_coefficient_matrix(r), ps, cfg, true, sv, od, gd);
      }
      out.text("reports/singular_values.csv", sv.str());
      out.text("reports/out_degree.csv", od.str());
      out.text("reports/group_degree.csv", gd.str());
    }
    if (stage != Stage::features) write_meta(out, cfg);
  }

  json manifest = {{"tool", "ofilab"},
                   {"subcommand", stage_name(stage)},
                   {"config_sha256", sha256_hex(to_json(cfg_in).dump())},
                   {"seeds", {{"root", cfg.seed}, {"synth_market", cfg.synth_seed()}}},
                   {"outputs", out.manifest_entries()}};
  out.commit(manifest);
  return RunResult{manifest, out_dir};
}

}  // namespace ofilab::pipeline
