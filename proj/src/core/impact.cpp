#include "ofilab/impact.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "ofilab/error.hpp"
#include "ofilab/factor.hpp"
#include "ofilab/log.hpp"
#include "ofilab/parallel.hpp"

namespace ofilab::impact {

using features::FeatureRow;
using features::kNaN;
using features::Panel;

namespace {

bool parse_level_suffix(const std::string& text, std::size_t from, std::size_t to, int& out) {
  if (from >= to) return false;
  int v = 0;
  for (std::size_t i = from; i < to; ++i) {
    if (text[i] < '0' || text[i] > '9') return false;
    v = v * 10 + (text[i] - '0');
    if (v > 1000) return false;
  }
  out = v;
  return true;
}

double ofi_value(const FeatureRow& row, int level) {
  return row.ok(features::kNoDepth) ? row.ofi[static_cast<std::size_t>(level - 1)] : kNaN;
}

double integrated_value(const FeatureRow& row) {
  return row.ok(features::kNoDepth | features::kNoIntegrated) ? row.ofi_i : kNaN;
}

double norm_return(const FeatureRow& row) { return row.ok(features::kNeedNormReturn) ? row.r : kNaN; }
double raw_return(const FeatureRow& row) { return row.ok(features::kNeedReturn) ? row.R : kNaN; }

// Values of one feature channel set for one stock at one bucket.
void channel_values(const ModelSpec& spec, const FeatureRow& row, std::vector<double>& out) {
  switch (spec.input) {
    case Input::ofi_levels:
      for (int m = 1; m <= spec.levels; ++m) out.push_back(ofi_value(row, m));
      break;
    case Input::ofi_integrated: out.push_back(integrated_value(row)); break;
    case Input::log_return: out.push_back(raw_return(row)); break;
    case Input::common_factor: out.push_back(spec.levels == 0 ? integrated_value(row) : ofi_value(row, 1)); break;
  }
}

int channels(const ModelSpec& spec) { return spec.input == Input::ofi_levels ? spec.levels : 1; }

std::string feature_label(const Panel& panel, std::size_t stock, const ModelSpec& spec, int channel, int lag) {
  std::string base = panel.stocks[stock] + ":";
  switch (spec.input) {
    case Input::ofi_levels: base += "ofi" + std::to_string(channel + 1); break;
    case Input::ofi_integrated: base += "ofiI"; break;
    case Input::log_return: base += "R"; break;
    case Input::common_factor: base += "tau"; break;
  }
  if (spec.forward) base += "@lag" + std::to_string(lag);
  return base;
}

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

void append_row(std::vector<double>& storage, const std::vector<double>& values) {
  storage.insert(storage.end(), values.begin(), values.end());
}

Design to_design(const std::vector<double>& xs, const std::vector<double>& ys, std::size_t p) {
  Design d;
  const auto n = static_cast<Eigen::Index>(ys.size());
  d.x.resize(n, static_cast<Eigen::Index>(p));
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.y(i) = ys[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < p; ++j) d.x(i, static_cast<Eigen::Index>(j)) = xs[static_cast<std::size_t>(i) * p + j];
  }
  return d;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

regression::Fit fit_model(const ModelSpec& spec, const Design& d, const regression::LassoConfig& lasso,
                          const std::vector<std::string>& labels) {
  if (spec.solver == Solver::ols) return regression::ols_fit(d.x, d.y, labels);
  return regression::lasso_cv(d.x, d.y, lasso, labels).fit;
}

std::size_t min_rows(const ModelSpec& spec, std::size_t p, const regression::LassoConfig& lasso) {
  if (spec.solver == Solver::ols) return p + 2;
  return static_cast<std::size_t>(2 * (lasso.folds + 1));
}

}  // namespace

ModelSpec parse_model(const std::string& name, int max_levels) {
  ModelSpec s;
  s.name = name;
  int m = 0;
  auto bad = [&] { fail(ErrorCode::config, "unknown model '" + name + "'", "models"); };
  auto levels_ok = [&](int v) {
    if (v < 1 || v > max_levels) {
      fail(ErrorCode::config,
           "model '" + name + "' needs " + std::to_string(v) + " levels but only " + std::to_string(max_levels) +
               " are configured",
           "models");
    }
  };
  if (name == "PII") {
    s.input = Input::ofi_integrated;
  } else if (name == "CII") {
    s.input = Input::ofi_integrated;
    s.cross = true;
    s.solver = Solver::lasso_cv;
  } else if (name == "PIM" || name == "PIMI" || name == "CIM" || name == "CIMI") {
    s.input = Input::common_factor;
    s.levels = name.back() == 'I' ? 0 : 1;
    s.cross = name[0] == 'C';
    s.solver = s.cross ? Solver::lasso_cv : Solver::ols;
  } else if (name == "FPII" || name == "FCII") {
    s.forward = true;
    s.input = Input::ofi_integrated;
    s.cross = name[1] == 'C';
    s.solver = s.cross ? Solver::lasso_cv : Solver::ols;
  } else if (name == "FAR" || name == "FCR") {
    s.forward = true;
    s.input = Input::log_return;
    s.cross = name == "FCR";
    s.solver = s.cross ? Solver::lasso_cv : Solver::ols;
  } else if (name.size() >= 3 && name.compare(0, 2, "PI") == 0) {
    const bool lasso = name.back() == 'L';
    if (!parse_level_suffix(name, 2, name.size() - (lasso ? 1 : 0), m)) bad();
    levels_ok(m);
    s.levels = m;
    s.solver = lasso ? Solver::lasso_cv : Solver::ols;
  } else if (name.size() >= 3 && name.compare(0, 2, "CI") == 0) {
    if (!parse_level_suffix(name, 2, name.size(), m)) bad();
    levels_ok(m);
    s.levels = m;
    s.cross = true;
    s.solver = Solver::lasso_cv;
  } else if (name.size() >= 4 && (name.compare(0, 3, "FPI") == 0 || name.compare(0, 3, "FCI") == 0)) {
    if (!parse_level_suffix(name, 3, name.size(), m)) bad();
    levels_ok(m);
    s.forward = true;
    s.levels = m;
    s.cross = name[1] == 'C';
    // Multi-level forward models are fitted with LASSO (strong collinearity across levels).
    s.solver = (s.cross || m > 1) ? Solver::lasso_cv : Solver::ols;
  } else {
    bad();
  }
  return s;
}

std::vector<std::string> known_models(int max_levels) {
  std::vector<std::string> out;
  for (int m = 1; m <= max_levels; ++m) out.push_back("PI" + std::to_string(m));
  for (const char* n : {"PII", "CI1", "CII"}) out.emplace_back(n);
  out.push_back("CI" + std::to_string(max_levels));
  out.push_back("PI" + std::to_string(max_levels) + "L");
  for (const char* n : {"PIM", "CIM", "PIMI", "CIMI", "FPI1", "FCI1", "FPII", "FCII", "FAR", "FCR"}) out.emplace_back(n);
  out.push_back("FPI" + std::to_string(max_levels));
  return out;
}

std::vector<WindowSpan> session_windows(const Panel& panel, const Protocol& protocol) {
  const auto h = std::llround(panel.h_seconds * 1e9);
  const auto w = std::llround(protocol.window_minutes * 60e9);
  const auto c = std::llround(protocol.cadence_minutes * 60e9);
  if (w <= 0 || c <= 0) fail(ErrorCode::config, "window and cadence must be positive", "window_minutes");
  if (w % h != 0 || c % h != 0) {
    fail(ErrorCode::config, "window and cadence must be multiples of the bucket length", "cadence_minutes");
  }
  const auto s_open = protocol.session.open.ns - panel.day.open.ns;
  const auto s_close = protocol.session.close.ns - panel.day.open.ns;
  if (s_open < 0 || s_close > panel.day.close.ns - panel.day.open.ns || s_close <= s_open || s_open % h != 0 ||
      s_close % h != 0) {
    fail(ErrorCode::config, "session must lie inside the trading day on bucket edges", "session");
  }
  const auto first = static_cast<std::size_t>(s_open / h);
  const auto last = static_cast<std::size_t>(s_close / h);  // exclusive
  const auto wb = static_cast<std::size_t>(w / h);
  const auto cb = static_cast<std::size_t>(c / h);
  std::vector<WindowSpan> out;
  for (std::size_t begin = first; begin + wb + cb <= last; begin += cb) {
    WindowSpan span;
    span.fit_begin = begin;
    span.fit_end = begin + wb;
    span.oos_begin = span.fit_end;
    span.oos_end = span.fit_end + cb;
    span.start = lob::Timestamp{panel.day.open.ns + static_cast<std::int64_t>(begin) * h};
    out.push_back(span);
  }
  return out;
}

namespace {

// Builds rows [begin, end) for one contemporaneous model and stock. Rows with
// any undefined value are dropped.
void contemporaneous_rows(const Panel& panel, std::size_t day, std::size_t stock, const ModelSpec& spec,
                          std::size_t begin, std::size_t end, std::vector<double>& xs, std::vector<double>& ys) {
  const auto& by_stock = panel.rows[day];
  std::vector<double> values;
  for (std::size_t k = begin; k < end; ++k) {
    const double y = norm_return(by_stock[stock][k]);
    if (!std::isfinite(y)) continue;
    values.clear();
    if (spec.cross) {
      for (std::size_t j = 0; j < by_stock.size(); ++j) channel_values(spec, by_stock[j][k], values);
    } else {
      channel_values(spec, by_stock[stock][k], values);
    }
    if (!all_finite(values)) continue;
    append_row(xs, values);
    ys.push_back(y);
  }
}

std::vector<std::string> contemporaneous_labels(const Panel& panel, std::size_t stock, const ModelSpec& spec) {
  std::vector<std::string> labels;
  if (spec.input == Input::common_factor) {
    labels.push_back("F");
    if (spec.cross) {
      for (std::size_t j = 0; j < panel.stocks.size(); ++j) labels.push_back(feature_label(panel, j, spec, 0, 0));
    } else {
      labels.push_back(feature_label(panel, stock, spec, 0, 0));
    }
    return labels;
  }
  const auto sources = spec.cross ? panel.stocks.size() : 1;
  for (std::size_t s = 0; s < sources; ++s) {
    const std::size_t src = spec.cross ? s : stock;
    for (int c = 0; c < channels(spec); ++c) labels.push_back(feature_label(panel, src, spec, c, 0));
  }
  return labels;
}

// Common-factor design: returns false when the factor is degenerate.
bool common_factor_design(const Panel& panel, std::size_t day, std::size_t stock, const ModelSpec& spec,
                          const WindowSpan& w, Design& fit_d, Design& oos_d) {
  const auto& by_stock = panel.rows[day];
  const std::size_t n = by_stock.size();
  auto collect = [&](std::size_t begin, std::size_t end, Eigen::MatrixXd& ofi, Eigen::VectorXd& y) {
    std::vector<double> xs, ys, values;
    for (std::size_t k = begin; k < end; ++k) {
      const double r = norm_return(by_stock[stock][k]);
      if (!std::isfinite(r)) continue;
      values.clear();
      for (std::size_t j = 0; j < n; ++j) channel_values(spec, by_stock[j][k], values);
      if (!all_finite(values)) continue;
      append_row(xs, values);
      ys.push_back(r);
    }
    const Design d = to_design(xs, ys, n);
    ofi = d.x;
    y = d.y;
  };
  Eigen::MatrixXd ofi_fit, ofi_oos;
  collect(w.fit_begin, w.fit_end, ofi_fit, fit_d.y);
  collect(w.oos_begin, w.oos_end, ofi_oos, oos_d.y);
  if (ofi_fit.rows() < 3) return false;
  factor::CommonFactorFit cf;
  try {
    cf = factor::common_factor_decompose(ofi_fit);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::numeric) return false;
    throw;
  }
  auto assemble = [&](const Eigen::VectorXd& f, const Eigen::MatrixXd& tau, Eigen::MatrixXd& x) {
    const Eigen::Index cols = spec.cross ? static_cast<Eigen::Index>(n) + 1 : 2;
    x.resize(f.size(), cols);
    x.col(0) = f;
    if (spec.cross) {
      x.rightCols(static_cast<Eigen::Index>(n)) = tau;
    } else {
      x.col(1) = tau.col(static_cast<Eigen::Index>(stock));
    }
  };
  assemble(cf.factor, cf.residual, fit_d.x);
  Eigen::VectorXd f_oos;
  Eigen::MatrixXd tau_oos;
  cf.apply(ofi_oos, f_oos, tau_oos);
  assemble(f_oos, tau_oos, oos_d.x);
  return true;
}

}  // namespace

ContemporaneousReport run_contemporaneous(const Panel& panel, const std::vector<ModelSpec>& models,
                                          const Protocol& protocol) {
  for (const auto& m : models) {
    if (m.forward) fail(ErrorCode::config, "model '" + m.name + "' is forward-looking", "models");
    if (m.cross && panel.stocks.size() < 2) {
      fail(ErrorCode::invalid_argument, "cross model '" + m.name + "' needs at least 2 stocks", "models");
    }
    if (m.input == Input::common_factor && panel.stocks.size() < 2) {
      fail(ErrorCode::invalid_argument, "common-factor model '" + m.name + "' needs at least 2 stocks", "models");
    }
  }
  const auto windows = session_windows(panel, protocol);
  const std::size_t days = panel.rows.size();
  const std::size_t stocks = panel.stocks.size();
  std::vector<std::vector<WindowFit>> slots(days * stocks);
  std::vector<std::size_t> skipped(days * stocks, 0);

  parallel_for(days * stocks, protocol.threads, [&](std::size_t task) {
    const std::size_t day = task / stocks;
    const std::size_t stock = task % stocks;
    auto& out = slots[task];
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
      const auto& w = windows[wi];
      for (const auto& spec : models) {
        Design fit_d, oos_d;
        if (spec.input == Input::common_factor) {
          if (!common_factor_design(panel, day, stock, spec, w, fit_d, oos_d)) {
            ++skipped[task];
            continue;
          }
        } else {
          std::vector<double> xs, ys;
          contemporaneous_rows(panel, day, stock, spec, w.fit_begin, w.fit_end, xs, ys);
          const std::size_t p = ys.empty() ? 0 : xs.size() / ys.size();
          fit_d = to_design(xs, ys, p);
          xs.clear();
          ys.clear();
          contemporaneous_rows(panel, day, stock, spec, w.oos_begin, w.oos_end, xs, ys);
          oos_d = to_design(xs, ys, p);
        }
        const auto p = static_cast<std::size_t>(fit_d.x.cols());
        const std::size_t window_rows = w.fit_end - w.fit_begin;
        if (fit_d.y.size() == 0 || static_cast<std::size_t>(fit_d.y.size()) < std::max(min_rows(spec, p, protocol.lasso), window_rows / 2)) {
          ++skipped[task];
          continue;
        }
        regression::Fit fit;
        try {
          fit = fit_model(spec, fit_d, protocol.lasso, contemporaneous_labels(panel, stock, spec));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::numeric && e.code() != ErrorCode::invalid_argument) throw;
          log::debug("skip " + spec.name + " " + panel.stocks[stock] + " " + panel.dates[day] + " " +
                     lob::format_clock(w.start) + ": " + e.what());
          ++skipped[task];
          continue;
        }
        WindowFit wf;
        wf.model = spec.name;
        wf.day = day;
        wf.stock = stock;
        wf.window = wi;
        wf.window_start = w.start;
        wf.is_r2 = fit.adj_r2;
        wf.is_r2_raw = fit.r2;
        wf.lambda = spec.solver == Solver::lasso_cv ? fit.lambda : kNaN;
        wf.nnz = fit.nnz;
        wf.n_fit = static_cast<std::size_t>(fit_d.y.size());
        wf.n_oos = static_cast<std::size_t>(oos_d.y.size());
        if (oos_d.y.size() >= 2) wf.oos_r2 = regression::oos_r2(oos_d.y, fit.predict(oos_d.x));
        if (spec.cross) {
          wf.cross.assign(stocks, 0.0);
          const int c = spec.input == Input::common_factor ? 1 : channels(spec);
          const Eigen::Index offset = spec.input == Input::common_factor ? 1 : 0;
          for (std::size_t j = 0; j < stocks; ++j)
            for (int q = 0; q < c; ++q) wf.cross[j] += fit.beta(offset + static_cast<Eigen::Index>(j) * c + q);
        } else {
          wf.cross.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
        }
        out.push_back(std::move(wf));
      }
    }
  });

  ContemporaneousReport report;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    for (auto& f : slots[t]) report.fits.push_back(std::move(f));
    report.skipped += skipped[t];
  }
  return report;
}

ForwardReport run_forward(const Panel& panel, const ModelSpec& spec, const ForwardProtocol& protocol) {
  if (!spec.forward) fail(ErrorCode::config, "model '" + spec.name + "' is not forward-looking", "models");
  if (spec.cross && panel.stocks.size() < 2) {
    fail(ErrorCode::invalid_argument, "cross model '" + spec.name + "' needs at least 2 stocks", "models");
  }
  if (protocol.lags < 1 || protocol.train_pairs < 2 || protocol.block < 2) {
    fail(ErrorCode::config, "forward protocol needs lags >= 1, train_pairs >= 2, block >= 2", "forward");
  }
  const auto h = std::llround(panel.h_seconds * 1e9);
  const auto s_open = protocol.session.open.ns - panel.day.open.ns;
  const auto s_close = protocol.session.close.ns - panel.day.open.ns;
  if (s_open < 0 || s_close <= s_open || s_open % h != 0 || s_close % h != 0 ||
      s_close > panel.day.close.ns - panel.day.open.ns) {
    fail(ErrorCode::config, "session must lie inside the trading day on bucket edges", "session");
  }
  const auto s0 = static_cast<std::size_t>(s_open / h);      // first session bucket
  const auto s1 = static_cast<std::size_t>(s_close / h) - 1;  // last session bucket
  const auto lags = static_cast<std::size_t>(protocol.lags);
  const auto pairs = static_cast<std::size_t>(protocol.train_pairs);
  const std::size_t first_k = s0 + pairs + lags - 1;
  const std::size_t days = panel.rows.size();
  const std::size_t stocks = panel.stocks.size();
  const std::size_t sources = spec.cross ? stocks : 1;
  const auto c = static_cast<std::size_t>(channels(spec));
  const std::size_t p = sources * lags * c;

  ForwardReport report;
  report.model = spec.name;
  report.days.resize(days);
  std::vector<std::size_t> ks;
  for (std::size_t k = first_k; k + 1 <= s1; ++k) ks.push_back(k);

  for (std::size_t d = 0; d < days; ++d) {
    auto& fd = report.days[d];
    fd.day = d;
    for (auto k : ks) fd.times.push_back(lob::Timestamp{panel.day.open.ns + static_cast<std::int64_t>(k + 1) * h});
    fd.forecast.assign(stocks, std::vector<double>(ks.size(), kNaN));
    fd.realized.assign(stocks, std::vector<double>(ks.size(), kNaN));
    fd.is_r2.assign(stocks, std::vector<double>(ks.size(), kNaN));
    fd.spread.assign(stocks, std::vector<double>(ks.size(), kNaN));
    fd.lag0_sum = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(stocks), static_cast<Eigen::Index>(stocks));
  }
  std::vector<std::size_t> lag0_counts(days * stocks, 0);

  parallel_for(days * stocks, protocol.threads, [&](std::size_t task) {
    const std::size_t d = task / stocks;
    const std::size_t i = task % stocks;
    const auto& by_stock = panel.rows[d];
    auto& fd = report.days[d];
    std::vector<std::string> labels;
    for (std::size_t s = 0; s < sources; ++s)
      for (std::size_t l = 0; l < lags; ++l)
        for (std::size_t q = 0; q < c; ++q)
          labels.push_back(feature_label(panel, spec.cross ? s : i, spec, static_cast<int>(q), static_cast<int>(l)));

    std::vector<double> values;
    auto features_at = [&](std::size_t q) {
      values.clear();
      for (std::size_t s = 0; s < sources; ++s) {
        const std::size_t src = spec.cross ? s : i;
        for (std::size_t l = 0; l < lags; ++l) channel_values(spec, by_stock[src][q - l], values);
      }
      return all_finite(values);
    };

    for (std::size_t ki = 0; ki < ks.size(); ++ki) {
      const std::size_t k = ks[ki];
      fd.realized[i][ki] = raw_return(by_stock[i][k + 1]);
      fd.spread[i][ki] = by_stock[i][k].spread;
      std::vector<double> xs, ys;
      for (std::size_t q = k - pairs; q < k; ++q) {
        // Features end at bucket q; the target is bucket q+1, which must be
        // observed by time t (bucket k).
        if (q + 1 > k || q < s0 + lags - 1) fail(ErrorCode::internal, "forward training pair leaks future data");
        const double y = raw_return(by_stock[i][q + 1]);
        if (!std::isfinite(y) || !features_at(q)) continue;
        append_row(xs, values);
        ys.push_back(y);
      }
      if (ys.size() < min_rows(spec, p, protocol.lasso)) continue;
      if (!features_at(k)) continue;
      const std::vector<double> now = values;
      regression::Fit fit;
      try {
        fit = fit_model(spec, to_design(xs, ys, p), protocol.lasso, labels);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::numeric && e.code() != ErrorCode::invalid_argument) throw;
        continue;
      }
      Eigen::RowVectorXd xnow(static_cast<Eigen::Index>(p));
      for (std::size_t j = 0; j < p; ++j) xnow(static_cast<Eigen::Index>(j)) = now[j];
      fd.forecast[i][ki] = fit.predict_row(xnow);
      fd.is_r2[i][ki] = fit.adj_r2;
      if (spec.cross) {
        for (std::size_t s = 0; s < sources; ++s) {
          double b = 0;
          for (std::size_t q = 0; q < c; ++q) b += fit.beta(static_cast<Eigen::Index>((s * lags + 0) * c + q));
          fd.lag0_sum(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) += b;
        }
        ++lag0_counts[task];
      }
    }
  });

  for (std::size_t d = 0; d < days; ++d) {
    std::size_t most = 0;
    for (std::size_t i = 0; i < stocks; ++i) most = std::max(most, lag0_counts[d * stocks + i]);
    report.days[d].lag0_count = most;
    // Per-row averages so stocks with skipped fits are not underweighted.
    for (std::size_t i = 0; i < stocks; ++i) {
      const auto cnt = lag0_counts[d * stocks + i];
      if (cnt > 0 && cnt != most) {
        report.days[d].lag0_sum.row(static_cast<Eigen::Index>(i)) *= static_cast<double>(most) / static_cast<double>(cnt);
      }
    }
  }

  // Blocks of consecutive forecasts.
  const auto block = static_cast<std::size_t>(protocol.block);
  for (std::size_t d = 0; d < days; ++d) {
    const auto& fd = report.days[d];
    for (std::size_t i = 0; i < stocks; ++i) {
      for (std::size_t b = 0; b * block < ks.size(); ++b) {
        const std::size_t lo = b * block, hi = std::min(ks.size(), lo + block);
        std::vector<double> ys, fs;
        double is_sum = 0;
        std::size_t is_n = 0;
        for (std::size_t k = lo; k < hi; ++k) {
          if (std::isfinite(fd.is_r2[i][k])) {
            is_sum += fd.is_r2[i][k];
            ++is_n;
          }
          if (std::isfinite(fd.forecast[i][k]) && std::isfinite(fd.realized[i][k])) {
            ys.push_back(fd.realized[i][k]);
            fs.push_back(fd.forecast[i][k]);
          }
        }
        if (ys.size() < std::max<std::size_t>(2, block / 2)) continue;
        WindowFit wf;
        wf.model = spec.name;
        wf.day = d;
        wf.stock = i;
        wf.window = b;
        wf.window_start = fd.times[lo];
        wf.is_r2 = is_n > 0 ? is_sum / static_cast<double>(is_n) : kNaN;
        wf.n_oos = ys.size();
        wf.oos_r2 = regression::oos_r2(Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())),
                                       Eigen::Map<Eigen::VectorXd>(fs.data(), static_cast<Eigen::Index>(fs.size())));
        report.blocks.push_back(std::move(wf));
      }
    }
  }
  return report;
}

HorizonImpactFit fit_horizon_impact(const std::vector<double>& r, const std::vector<double>& ofi1, int p) {
  if (p < 1) fail(ErrorCode::invalid_argument, "horizon count p must be >= 1", "horizon.p");
  if (r.size() != ofi1.size()) fail(ErrorCode::invalid_argument, "return and OFI series differ in length");
  const auto pp = static_cast<std::size_t>(p);
  std::vector<double> xs, ys, row;
  for (std::size_t t = pp - 1; t + 1 < r.size(); ++t) {
    const double y = r[t + 1];
    if (!std::isfinite(y)) continue;
    row.clear();
    for (std::size_t s = 1; s <= pp; ++s) row.push_back(ofi1[t + 1 - s]);
    if (!all_finite(row)) continue;
    append_row(xs, row);
    ys.push_back(y);
  }
  if (ys.size() <= pp + 1) {
    fail(ErrorCode::invalid_argument,
         "horizon impact needs more than p + 1 rows (have " + std::to_string(ys.size()) + ", p = " + std::to_string(p) + ")",
         "horizon.p");
  }
  const Design d = to_design(xs, ys, pp);
  const auto fit = regression::ols_fit(d.x, d.y);
  HorizonImpactFit out;
  out.p = p;
  out.fits = 1;
  out.beta.assign(fit.beta.data(), fit.beta.data() + fit.beta.size());
  double run = 0;
  for (double b : out.beta) out.cumsum.push_back(run += b);
  return out;
}

HorizonImpactFit run_horizon_impact(const Panel& panel, int p) {
  if (p < 1) fail(ErrorCode::invalid_argument, "horizon count p must be >= 1", "horizon.p");
  HorizonImpactFit total;
  total.p = p;
  total.beta.assign(static_cast<std::size_t>(p), 0.0);
  for (std::size_t d = 0; d < panel.rows.size(); ++d) {
    for (std::size_t i = 0; i < panel.stocks.size(); ++i) {
      const auto& rows = panel.rows[d][i];
      std::vector<double> r, o;
      for (const auto& row : rows) {
        r.push_back(norm_return(row));
        o.push_back(ofi_value(row, 1));
      }
      try {
        const auto f = fit_horizon_impact(r, o, p);
        for (int s = 0; s < p; ++s) total.beta[static_cast<std::size_t>(s)] += f.beta[static_cast<std::size_t>(s)];
        ++total.fits;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::invalid_argument && e.code() != ErrorCode::numeric) throw;
      }
    }
  }
  if (total.fits > 0)
    for (auto& b : total.beta) b /= static_cast<double>(total.fits);
  double run = 0;
  for (double b : total.beta) total.cumsum.push_back(run += b);
  return total;
}

double mean_metric(const std::vector<WindowFit>& fits, const std::string& model, bool oos) {
  double total = 0;
  std::size_t n = 0;
  for (const auto& f : fits) {
    if (f.model != model) continue;
    const double v = oos ? f.oos_r2 : f.is_r2;
    if (!std::isfinite(v)) continue;
    total += v;
    ++n;
  }
  return n == 0 ? kNaN : total / static_cast<double>(n);
}

DeltaRow compare(const std::vector<WindowFit>& fits, const std::string& base, const std::string& model, bool oos) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
  std::map<Key, double> a, b;
  for (const auto& f : fits) {
    const double v = oos ? f.oos_r2 : f.is_r2;
    if (!std::isfinite(v)) continue;
    if (f.model == base) a[{f.day, f.stock, f.window}] = v;
    if (f.model == model) b[{f.day, f.stock, f.window}] = v;
  }
  std::vector<double> xa, xb;
  for (const auto& [key, v] : a) {
    auto it = b.find(key);
    if (it == b.end()) continue;
    xa.push_back(v);
    xb.push_back(it->second);
  }
  DeltaRow row;
  row.base = base;
  row.model = model;
  row.sample = oos ? "oos" : "is";
  if (xa.size() >= 2) {
    row.test = regression::delta_r2_test(xa, xb);
    double sa = 0, sb = 0;
    for (std::size_t k = 0; k < xa.size(); ++k) {
      sa += xa[k];
      sb += xb[k];
    }
    row.base_mean = sa / static_cast<double>(xa.size());
    row.model_mean = sb / static_cast<double>(xb.size());
  } else {
    row.test.mean_delta = kNaN;
    row.test.p_value = kNaN;
    row.test.n = xa.size();
  }
  return row;
}

std::vector<int> quartile_labels(const std::vector<double>& values) {
  const auto n = values.size();
  if (n < 4) fail(ErrorCode::invalid_argument, "quartile report needs at least 4 stocks");
  std::vector<int> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t below = 0;
    for (double v : values)
      if (v < values[i]) ++below;
    out[i] = std::min(3, static_cast<int>((4 * below) / n));
  }
  return out;
}

}  // namespace ofilab::impact
