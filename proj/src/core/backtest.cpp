#include "ofilab/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "ofilab/error.hpp"
#include "ofilab/parallel.hpp"

namespace ofilab::backtest {

using features::kNaN;

Weights forecast_implied_weights(std::span<const double> f, std::span<const double> spread,
                                 std::span<const double> sigma_f) {
  if (f.size() != spread.size() || f.size() != sigma_f.size()) {
    fail(ErrorCode::invalid_argument, "forecast, spread and sigma vectors differ in length");
  }
  Weights out;
  out.w.assign(f.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i]) || !std::isfinite(spread[i]) || !(std::abs(f[i]) > spread[i])) continue;
    if (!std::isfinite(sigma_f[i]) || sigma_f[i] <= 0.0) {
      out.flagged = true;
      continue;
    }
    out.w[i] = f[i] / sigma_f[i];
    total += std::abs(out.w[i]);
  }
  if (total == 0.0) {
    std::fill(out.w.begin(), out.w.end(), 0.0);
    return out;
  }
  for (auto& w : out.w) {
    w /= total;
    if (w > 0) ++out.longs;
    if (w < 0) ++out.shorts;
  }
  return out;
}

double decile_threshold(std::span<const double> sorted, int k) {
  if (sorted.empty() || k < 1 || k > 10) fail(ErrorCode::invalid_argument, "decile threshold needs data and 1 <= k <= 10");
  const std::size_t n = sorted.size();
  // Smallest order statistic x_(j) with j / n >= k / 10.
  const std::size_t j = (static_cast<std::size_t>(k) * n + 9) / 10;
  return sorted[std::max<std::size_t>(j, 1) - 1];
}

Weights long_short_weights(std::span<const double> f, bool symmetric) {
  Weights out;
  out.w.assign(f.size(), 0.0);
  std::vector<double> sorted;
  for (double v : f)
    if (std::isfinite(v)) sorted.push_back(v);
  if (sorted.empty()) {
    out.flagged = true;
    return out;
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  double hi, lo;
  if (symmetric) {
    const std::size_t c = std::max<std::size_t>(1, n / 10);
    if (2 * c > n) {
      out.flagged = true;
      return out;
    }
    hi = c < n ? sorted[n - c - 1] : sorted.front();
    lo = sorted[c];
  } else {
    hi = decile_threshold(sorted, 9);
    lo = decile_threshold(sorted, 1);
  }
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) continue;
    if (f[i] > hi) {
      out.w[i] = 1.0;
      ++out.longs;
    } else if (f[i] < lo) {
      out.w[i] = -1.0;
      ++out.shorts;
    }
  }
  const auto count = out.selected();
  if (count == 0) {
    out.flagged = true;
    return out;
  }
  for (auto& w : out.w) w /= static_cast<double>(count);
  return out;
}

double pnl(std::span<const double> w, std::span<const double> R) {
  if (w.size() != R.size()) fail(ErrorCode::invalid_argument, "weights and returns differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0 || !std::isfinite(R[i])) continue;
    total += w[i] * std::expm1(R[i]);
  }
  return total;
}

std::vector<MinutePnl> run_backtest(const impact::ForwardReport& report, const BacktestConfig& cfg) {
  if (cfg.sigma_window < 2) fail(ErrorCode::config, "sigma window must be >= 2", "backtest.sigma_window");
  const auto win = static_cast<std::size_t>(cfg.sigma_window);
  std::vector<std::vector<MinutePnl>> per_day(report.days.size());
  parallel_for(report.days.size(), cfg.threads, [&](std::size_t d) {
    const auto& fd = report.days[d];
    const std::size_t stocks = fd.forecast.size();
    const std::size_t steps = fd.times.size();
    std::vector<double> f(stocks), s(stocks), sig(stocks), r(stocks), trail;
    for (std::size_t k = win; k < steps; ++k) {
      for (std::size_t i = 0; i < stocks; ++i) {
        f[i] = fd.forecast[i][k];
        s[i] = fd.spread[i][k];
        r[i] = fd.realized[i][k];
        trail.assign(fd.forecast[i].begin() + static_cast<std::ptrdiff_t>(k - win),
                     fd.forecast[i].begin() + static_cast<std::ptrdiff_t>(k));
        sig[i] = features::sample_std(trail);  // NaN propagates when any trailing forecast is missing
      }
      const Weights a = forecast_implied_weights(f, s, sig);
      const Weights b = long_short_weights(f, cfg.symmetric_deciles);
      for (const auto* wt : {&a, &b}) {
        MinutePnl m;
        m.day = fd.day;
        m.t = fd.times[k];
        m.strategy = wt == &a ? "forecast_implied" : "long_short";
        m.model = report.model;
        m.pnl_bps = pnl(wt->w, r) * 1e4;
        m.n_selected = wt->selected();
        m.longs = wt->longs;
        m.shorts = wt->shorts;
        per_day[d].push_back(std::move(m));
      }
    }
  });
  std::vector<MinutePnl> out;
  for (auto& v : per_day)
    for (auto& m : v) out.push_back(std::move(m));
  return out;
}

std::string quarter_of(const std::string& date) {
  if (date.size() < 7 || date[4] != '-') fail(ErrorCode::invalid_argument, "bad date '" + date + "'");
  const int month = std::stoi(date.substr(5, 2));
  if (month < 1 || month > 12) fail(ErrorCode::invalid_argument, "bad date '" + date + "'");
  return date.substr(0, 4) + "Q" + std::to_string((month - 1) / 3 + 1);
}

std::vector<PnlSummary> summarize(const std::vector<MinutePnl>& minutes, const std::vector<std::string>& dates) {
  // Keyed sums keep the output order independent of input order.
  std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, std::size_t>> acc;
  for (const auto& m : minutes) {
    if (m.day >= dates.size()) fail(ErrorCode::invalid_argument, "minute refers to an unknown day");
    for (const auto& period : {std::string("all"), quarter_of(dates[m.day])}) {
      auto& slot = acc[{m.strategy, m.model, period}];
      slot.first += m.pnl_bps;
      ++slot.second;
    }
  }
  std::vector<PnlSummary> out;
  for (const auto& [key, v] : acc) {
    PnlSummary s;
    std::tie(s.strategy, s.model, s.period) = key;
    s.minutes = v.second;
    s.mean_bps = v.first / static_cast<double>(v.second);
    out.push_back(std::move(s));
  }
  return out;
}

int sign(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

double position_pnl(std::span<const double> ofi, std::span<const double> R, std::size_t t, int p) {
  if (p < 1 || t >= ofi.size() || t + static_cast<std::size_t>(p) >= R.size()) return kNaN;
  if (!std::isfinite(ofi[t])) return kNaN;
  double sum = 0.0;
  for (int l = 1; l <= p; ++l) {
    const double r = R[t + static_cast<std::size_t>(l)];
    if (!std::isfinite(r)) return kNaN;
    sum += r;
  }
  return sign(ofi[t]) * sum;
}

HorizonPnl ofi_sign_pnl(std::span<const double> ofi, std::span<const double> R, int p, lob::Timestamp open,
                        double h_seconds) {
  if (ofi.size() != R.size()) fail(ErrorCode::invalid_argument, "OFI and return series differ in length");
  if (p < 1 || static_cast<std::size_t>(p) >= ofi.size()) {
    fail(ErrorCode::invalid_argument,
         "holding period " + std::to_string(p) + " exceeds the session length of " + std::to_string(ofi.size()) +
             " buckets",
         "horizon.p");
  }
  HorizonPnl out;
  out.p = p;
  const std::size_t last = ofi.size() - 1 - static_cast<std::size_t>(p);
  out.t_max = lob::Timestamp{open.ns + static_cast<std::int64_t>(last + 1) * std::llround(h_seconds * 1e9)};
  out.n = last + 1;
  double total = 0.0;
  for (std::size_t t = 0; t <= last; ++t) {
    const double v = position_pnl(ofi, R, t, p);
    if (!std::isfinite(v)) continue;
    total += v;
    ++out.defined;
  }
  if (out.defined > 0) out.pnl = total / static_cast<double>(out.defined);
  return out;
}

std::vector<HorizonPnl> run_horizon_pnl(const features::Panel& panel, int p_max) {
  const std::size_t n = panel.buckets_per_day();
  if (p_max < 1 || static_cast<std::size_t>(p_max) >= n) {
    fail(ErrorCode::config, "horizon p must lie in [1, buckets per day)", "horizon.p");
  }
  std::vector<HorizonPnl> out(static_cast<std::size_t>(p_max));
  std::vector<std::size_t> used(out.size(), 0);
  std::vector<double> ofi(n), R(n);
  for (const auto& day : panel.rows) {
    for (const auto& rows : day) {
      for (std::size_t k = 0; k < n; ++k) {
        ofi[k] = rows[k].raw_ofi.empty() ? kNaN : static_cast<double>(rows[k].raw_ofi[0]);
        R[k] = rows[k].ok(features::kNeedReturn) ? rows[k].R : kNaN;
      }
      for (int p = 1; p <= p_max; ++p) {
        const auto h = ofi_sign_pnl(ofi, R, p, panel.day.open, panel.h_seconds);
        auto& slot = out[static_cast<std::size_t>(p - 1)];
        slot.p = p;
        slot.t_max = h.t_max;
        slot.n = h.n;
        slot.defined += h.defined;
        if (!std::isfinite(h.pnl)) continue;
        slot.pnl = used[static_cast<std::size_t>(p - 1)] == 0 ? 0.0 : slot.pnl;
        slot.pnl += h.pnl * 1e4;
        ++used[static_cast<std::size_t>(p - 1)];
      }
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (used[i] > 0) out[i].pnl /= static_cast<double>(used[i]);
  return out;
}

}  // namespace ofilab::backtest
