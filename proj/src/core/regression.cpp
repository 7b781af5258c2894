#include "ofilab/regression.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "ofilab/error.hpp"

namespace ofilab::regression {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string label_of(const std::vector<std::string>& labels, Eigen::Index j) {
  if (static_cast<std::size_t>(j) < labels.size()) return labels[static_cast<std::size_t>(j)];
  return "x" + std::to_string(j);
}

double soft(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

void check_shapes(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) fail(ErrorCode::invalid_argument, "design rows and target length differ");
  if (!x.allFinite() || !y.allFinite()) fail(ErrorCode::numeric, "design or target has non-finite values");
}

}  // namespace

Eigen::VectorXd Fit::predict(const Eigen::MatrixXd& x) const {
  return (x * beta).array() + intercept;
}

double Fit::predict_row(const Eigen::RowVectorXd& x) const { return intercept + x.dot(beta); }

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  const double mean = y.mean();
  const double sst = (y.array() - mean).square().sum();
  const double sse = (y - yhat).squaredNorm();
  if (!(sst > 0)) return 0.0;
  return 1.0 - sse / sst;
}

double adjusted_r2(double r2, Eigen::Index n, Eigen::Index p) {
  if (n - p - 1 <= 0) return kNaN;
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - p - 1);
}

double oos_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.size() < 2 || y.size() != yhat.size()) return kNaN;
  // a constant target has no variance to explain; rounding in the mean must not fake one
  if ((y.array() == y(0)).all()) return kNaN;
  const double mean = y.mean();
  const double sst = (y.array() - mean).square().sum();
  if (!(sst > 0)) return kNaN;
  return 1.0 - (y - yhat).squaredNorm() / sst;
}

Fit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& labels) {
  check_shapes(x, y);
  const Eigen::Index n = x.rows(), p = x.cols();
  if (p < 1) fail(ErrorCode::invalid_argument, "OLS needs at least one regressor");
  if (n <= p + 1) {
    fail(ErrorCode::invalid_argument,
         "OLS needs n > p + 1 (n = " + std::to_string(n) + ", p = " + std::to_string(p) + ")");
  }
  const Eigen::RowVectorXd xm = x.colwise().mean();
  const double ym = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - xm;
  const Eigen::VectorXd yc = y.array() - ym;

  // Column scaling keeps the rank threshold meaningful across units.
  Eigen::VectorXd norms = xc.colwise().norm().transpose();
  std::string zero_cols;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(norms(j) > 0)) zero_cols += (zero_cols.empty() ? "" : ", ") + label_of(labels, j);
  }
  if (!zero_cols.empty()) fail(ErrorCode::numeric, "rank-deficient design: constant column(s) " + zero_cols, zero_cols);
  const Eigen::MatrixXd xs = xc * norms.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      cols += (cols.empty() ? "" : ", ") + label_of(labels, perm(k));
    }
    fail(ErrorCode::numeric, "rank-deficient design: collinear column(s) " + cols, cols);
  }
  Fit fit;
  fit.beta = norms.cwiseInverse().asDiagonal() * qr.solve(yc);
  fit.intercept = ym - xm.dot(fit.beta);
  fit.residuals = y - fit.predict(x);
  const double sst = yc.squaredNorm();
  fit.r2 = sst > 0 ? 1.0 - fit.residuals.squaredNorm() / sst : 0.0;
  fit.adj_r2 = adjusted_r2(fit.r2, n, p);
  fit.nnz = static_cast<int>((fit.beta.array() != 0).count());
  fit.labels = labels;
  return fit;
}

LassoProblem::LassoProblem(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_shapes(x, y);
  n_ = x.rows();
  p_ = x.cols();
  if (n_ < 2) fail(ErrorCode::invalid_argument, "LASSO needs at least 2 rows");
  mean_ = x.colwise().mean().transpose();
  Eigen::MatrixXd z = x.rowwise() - mean_.transpose();
  scale_ = (z.colwise().squaredNorm().transpose() / static_cast<double>(n_)).cwiseSqrt();
  for (Eigen::Index j = 0; j < p_; ++j) {
    // Treat numerically constant columns as absent.
    if (scale_(j) <= 1e-13 * (std::abs(mean_(j)) + 1e-300)) scale_(j) = 0;
    if (scale_(j) > 0) {
      z.col(j) /= scale_(j);
    } else {
      z.col(j).setZero();
    }
  }
  ymean_ = y.mean();
  const Eigen::VectorXd yc = y.array() - ymean_;
  yss_ = yc.squaredNorm();
  ysd_ = std::sqrt(yss_ / static_cast<double>(n_));
  gram_ = z.transpose() * z;
  zty_ = z.transpose() * yc;
}

double LassoProblem::lambda_max() const { return p_ == 0 ? 0.0 : 2.0 * zty_.cwiseAbs().maxCoeff(); }

Fit LassoProblem::solve(double lambda, const LassoConfig& cfg, Eigen::VectorXd* warm) const {
  if (!(lambda >= 0)) fail(ErrorCode::invalid_argument, "LASSO penalty must be >= 0");
  const double nd = static_cast<double>(n_);
  const double lam = lambda / nd;
  const double half = lam / 2;
  Eigen::VectorXd b = (warm && warm->size() == p_) ? *warm : Eigen::VectorXd::Zero(p_);
  for (Eigen::Index j = 0; j < p_; ++j)
    if (scale_(j) == 0) b(j) = 0;
  Eigen::VectorXd g = zty_ - gram_ * b;  // Z' r
  const double threshold = cfg.tol * (ysd_ > 0 ? ysd_ : 1.0);

  int sweeps = 0;
  auto sweep = [&](bool active_only) {
    double change = 0;
    for (Eigen::Index j = 0; j < p_; ++j) {
      if (scale_(j) == 0) continue;
      if (active_only && b(j) == 0) continue;
      const double old = b(j);
      const double upd = soft(g(j) / nd + old, half);
      if (upd != old) {
        const double d = upd - old;
        g.noalias() -= gram_.col(j) * d;
        b(j) = upd;
        change = std::max(change, std::abs(d));
      }
    }
    ++sweeps;
    return change;
  };
  auto over = [&] {
    if (sweeps > cfg.max_sweeps) {
      fail(ErrorCode::numeric, "LASSO did not converge in " + std::to_string(cfg.max_sweeps) +
                                   " sweeps (lambda = " + std::to_string(lambda) + ", p = " + std::to_string(p_) +
                                   ", n = " + std::to_string(n_) + ")");
    }
  };
  // Duality gap of (1/2n)|r|^2 + half |b|_1, using the rescaled residual as dual point.
  const double null_obj = yss_ / (2 * nd);
  auto gap_small = [&] {
    if (cfg.gap_tol <= 0 || null_obj <= 0) return false;
    const double bz = b.dot(zty_);
    const double rss = std::max(0.0, yss_ - 2 * bz + b.dot(gram_ * b));
    double gmax = 0;
    for (Eigen::Index j = 0; j < p_; ++j)
      if (scale_(j) > 0) gmax = std::max(gmax, std::abs(g(j)));
    const double s = gmax > 0 ? std::min(1.0, nd * half / gmax) : 1.0;
    const double yr = yss_ - bz;  // yc' r
    const double primal = rss / (2 * nd) + half * b.lpNorm<1>();
    const double dual = (2 * s * yr - s * s * rss) / (2 * nd);
    return primal - dual <= cfg.gap_tol * null_obj;
  };
  // Once signs settle, solve the reduced KKT system exactly; CD alone crawls
  // along flat valleys when the active columns are nearly collinear.
  std::vector<Eigen::Index> prev_active;
  auto polish = [&] {
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p_; ++j)
      if (b(j) != 0) active.push_back(j);
    const bool stable = !active.empty() && active == prev_active;
    prev_active = active;
    if (!stable) return false;
    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd ga(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index a = 0; a < k; ++a) {
      rhs(a) = zty_(active[a]) - nd * half * (b(active[a]) > 0 ? 1.0 : -1.0);
      for (Eigen::Index c = 0; c < k; ++c) ga(a, c) = gram_(active[a], active[c]);
    }
    const Eigen::VectorXd ba = ga.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd nb = Eigen::VectorXd::Zero(p_);
    for (Eigen::Index a = 0; a < k; ++a) {
      if ((ba(a) > 0) != (b(active[a]) > 0) || ba(a) == 0) return false;
      nb(active[a]) = ba(a);
    }
    const Eigen::VectorXd ng = zty_ - gram_ * nb;
    const double slack = 1e-9 * (half + (ysd_ > 0 ? ysd_ : 1.0));
    for (Eigen::Index j = 0; j < p_; ++j) {
      if (scale_(j) == 0) continue;
      const double v = ng(j) / nd;
      if (nb(j) != 0 ? std::abs(v - half * (nb(j) > 0 ? 1.0 : -1.0)) > slack : std::abs(v) > half + slack) return false;
    }
    b = nb;
    g = ng;
    return true;
  };
  while (true) {
    const double full = sweep(false);
    over();
    if (full <= threshold || gap_small() || polish()) break;
    while (true) {
      const double part = sweep(true);
      over();
      if (part <= threshold || (sweeps % 10 == 0 && gap_small())) break;
      if (sweeps % 50 == 0) break;  // back to a full sweep so polish() can run
    }
  }
  if (warm) *warm = b;

  Fit fit;
  fit.beta = Eigen::VectorXd::Zero(p_);
  double shift = 0;
  for (Eigen::Index j = 0; j < p_; ++j) {
    if (scale_(j) == 0 || b(j) == 0) continue;
    fit.beta(j) = b(j) / scale_(j);
    shift += fit.beta(j) * mean_(j);
  }
  fit.intercept = ymean_ - shift;
  const double rss = std::max(0.0, yss_ - 2 * b.dot(zty_) + b.dot(gram_ * b));
  fit.r2 = yss_ > 0 ? 1.0 - rss / yss_ : 0.0;
  fit.nnz = static_cast<int>((b.array() != 0).count());
  fit.adj_r2 = adjusted_r2(fit.r2, n_, fit.nnz);
  fit.lambda = lambda;
  fit.lambda_internal = lam;
  fit.lambda_factor = nd;
  fit.sweeps = sweeps;
  return fit;
}

Fit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, const LassoConfig& cfg,
              const std::vector<std::string>& labels) {
  LassoProblem prob(x, y);
  Fit fit = prob.solve(lambda, cfg);
  fit.residuals = y - fit.predict(x);
  fit.r2 = r_squared(y, y - fit.residuals);
  fit.adj_r2 = adjusted_r2(fit.r2, x.rows(), fit.nnz);
  fit.labels = labels;
  return fit;
}

std::vector<double> lambda_grid(double lambda_max, const LassoConfig& cfg) {
  if (cfg.grid_size < 1) fail(ErrorCode::config, "lasso grid_size must be >= 1", "lasso.grid_size");
  if (!(cfg.min_ratio > 0 && cfg.min_ratio < 1)) {
    fail(ErrorCode::config, "lasso min_ratio must be in (0, 1)", "lasso.min_ratio");
  }
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(cfg.grid_size) + 1);
  if (cfg.grid_size == 1) {
    grid.push_back(lambda_max);
  } else {
    const double step = std::log(cfg.min_ratio) / (cfg.grid_size - 1);
    for (int k = 0; k < cfg.grid_size; ++k) grid.push_back(lambda_max * std::exp(step * k));
  }
  if (cfg.include_zero) grid.push_back(0.0);
  return grid;
}

CvResult lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoConfig& cfg,
                  const std::vector<std::string>& labels) {
  check_shapes(x, y);
  if (cfg.folds < 2) fail(ErrorCode::config, "lasso folds must be >= 2", "lasso.folds");
  const Eigen::Index n = x.rows();
  const int blocks = cfg.folds + 1;
  if (n < 2 * blocks) {
    fail(ErrorCode::invalid_argument,
         "LASSO CV needs at least " + std::to_string(2 * blocks) + " rows, got " + std::to_string(n));
  }
  CvResult out;
  LassoProblem full(x, y);
  const double lmax = full.lambda_max();
  const double nd = static_cast<double>(n);
  if (!(lmax > 0)) {
    // Nothing to select: every penalty gives the intercept-only model.
    out.fit = full.solve(0.0, cfg);
    out.fit.flagged = true;
    out.grid_internal = {0.0};
    out.cv_mse = {kNaN};
  } else {
    auto edge = [&](int k) { return static_cast<Eigen::Index>((static_cast<long long>(k) * n) / blocks); };
    std::vector<LassoProblem> probs;
    // the grid top must empty every fold too, so the intercept-only model is always a candidate
    double top = lmax / nd;
    for (int k = 1; k <= cfg.folds; ++k) {
      probs.emplace_back(x.topRows(edge(k)), y.head(edge(k)));
      top = std::max(top, probs.back().lambda_max() / static_cast<double>(edge(k)));
    }
    out.grid_internal = lambda_grid(top, cfg);
    const std::size_t g = out.grid_internal.size();
    out.cv_mse.assign(g, 0.0);
    std::vector<int> used(g, 0);
    for (int k = 1; k <= cfg.folds; ++k) {
      const Eigen::Index train = edge(k);
      const Eigen::Index v0 = edge(k), v1 = edge(k + 1);
      LassoProblem& prob = probs[static_cast<std::size_t>(k - 1)];
      const auto xv = x.middleRows(v0, v1 - v0);
      const auto yv = y.segment(v0, v1 - v0);
      Eigen::VectorXd warm = Eigen::VectorXd::Zero(x.cols());
      Fit f;
      bool saturated = false;
      for (std::size_t l = 0; l < g; ++l) {
        if (!saturated) {
          f = prob.solve(out.grid_internal[l] * static_cast<double>(train), cfg, &warm);
          saturated = f.r2 >= kPathMaxR2 || f.nnz >= train - 1;
        }
        const double mse = (yv - f.predict(xv)).squaredNorm() / static_cast<double>(v1 - v0);
        if (std::isfinite(mse)) {
          out.cv_mse[l] += mse;
          ++used[l];
        }
      }
    }
    bool any = false;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < g; ++l) {
      out.cv_mse[l] = used[l] > 0 ? out.cv_mse[l] / used[l] : kNaN;
      if (std::isfinite(out.cv_mse[l]) && out.cv_mse[l] < best) {
        best = out.cv_mse[l];
        out.chosen = l;
        any = true;
      }
    }
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(x.cols());
    if (!any) out.chosen = 0;
    for (std::size_t l = 0; l <= out.chosen; ++l) {
      out.fit = full.solve(out.grid_internal[l] * nd, cfg, &warm);
      if (out.fit.r2 >= kPathMaxR2 || out.fit.nnz >= n - 1) break;
    }
    out.fit.flagged = !any;
  }
  out.fit.residuals = y - out.fit.predict(x);
  out.fit.labels = labels;
  return out;
}

DeltaTest delta_r2_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorCode::invalid_argument, "Delta R^2 test needs aligned series");
  if (a.size() < 2) fail(ErrorCode::invalid_argument, "Delta R^2 test needs at least 2 pairs");
  DeltaTest out;
  out.n = a.size();
  const double nd = static_cast<double>(a.size());
  double mean = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += b[i] - a[i];
  mean /= nd;
  double ss = 0;
  bool identical = true;
  const double first = b[0] - a[0];
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = b[i] - a[i];
    ss += (d - mean) * (d - mean);
    if (d != first) identical = false;
  }
  out.mean_delta = mean;
  const double sd = std::sqrt(ss / (nd - 1));
  if (identical || !(sd > 0)) {
    out.degenerate = true;
    out.p_value = mean <= 0 ? 1.0 : 0.0;
    return out;
  }
  const double t = mean / (sd / std::sqrt(nd));
  boost::math::students_t dist(nd - 1);
  out.p_value = boost::math::cdf(boost::math::complement(dist, t));
  return out;
}

}  // namespace ofilab::regression
