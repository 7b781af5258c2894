#include "ofilab/factor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ofilab/error.hpp"

namespace ofilab::factor {

int jacobi_eigen(const Eigen::MatrixXd& s, Eigen::VectorXd& values, Eigen::MatrixXd& vectors, double tol,
                 int max_sweeps) {
  const Eigen::Index p = s.rows();
  if (s.cols() != p) fail(ErrorCode::invalid_argument, "jacobi_eigen needs a square matrix");
  Eigen::MatrixXd a = 0.5 * (s + s.transpose());
  vectors = Eigen::MatrixXd::Identity(p, p);
  const double scale = a.norm();
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = i + 1; j < p; ++j) off += 2 * a(i, j) * a(i, j);
    if (off == 0 || std::sqrt(off) <= tol * scale) break;
    for (Eigen::Index i = 0; i < p - 1; ++i) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        const double apq = a(i, j);
        if (apq == 0) continue;
        const double theta = (a(j, j) - a(i, i)) / (2 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1);
        const double sn = t * c;
        for (Eigen::Index k = 0; k < p; ++k) {
          const double aki = a(k, i), akj = a(k, j);
          a(k, i) = c * aki - sn * akj;
          a(k, j) = sn * aki + c * akj;
        }
        for (Eigen::Index k = 0; k < p; ++k) {
          const double aik = a(i, k), ajk = a(j, k);
          a(i, k) = c * aik - sn * ajk;
          a(j, k) = sn * aik + c * ajk;
        }
        for (Eigen::Index k = 0; k < p; ++k) {
          const double vki = vectors(k, i), vkj = vectors(k, j);
          vectors(k, i) = c * vki - sn * vkj;
          vectors(k, j) = sn * vki + c * vkj;
        }
      }
    }
  }
  if (sweep >= max_sweeps) fail(ErrorCode::numeric, "Jacobi eigen-solver did not converge");
  values = a.diagonal();
  return sweep;
}

namespace {

// Orders eigenpairs by descending value. Near-equal values are ordered by the
// position of each vector's largest component, lowest level first; each
// vector's sign makes its component sum nonnegative (first nonzero component
// positive when the sum vanishes).
void canonicalize(Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  const Eigen::Index p = values.size();
  const double top = p > 0 ? values.cwiseAbs().maxCoeff() : 0.0;
  const double tie = 1e-12 * std::max(top, 1e-300);
  auto lead = [&](Eigen::Index k) {
    Eigen::Index at = 0;
    vectors.col(k).cwiseAbs().maxCoeff(&at);
    return at;
  };
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index x, Eigen::Index y) {
    if (std::abs(values(x) - values(y)) > tie) return values(x) > values(y);
    return lead(x) < lead(y);
  });
  Eigen::VectorXd v2(p);
  Eigen::MatrixXd w2(vectors.rows(), p);
  for (Eigen::Index k = 0; k < p; ++k) {
    v2(k) = values(idx[static_cast<std::size_t>(k)]);
    w2.col(k) = vectors.col(idx[static_cast<std::size_t>(k)]);
    const double sum = w2.col(k).sum();
    const double eps = 1e-12 * std::sqrt(static_cast<double>(w2.rows()));
    bool flip = sum < -eps;
    if (std::abs(sum) <= eps) {
      for (Eigen::Index r = 0; r < w2.rows(); ++r) {
        if (std::abs(w2(r, k)) > 1e-12) {
          flip = w2(r, k) < 0;
          break;
        }
      }
    }
    if (flip) w2.col(k) = -w2.col(k);
  }
  values = v2;
  vectors = w2;
}

}  // namespace

PcaResult fit_pca(const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index p = samples.cols();
  if (n < 2) fail(ErrorCode::invalid_argument, "PCA needs at least 2 samples");
  if (p < 1) fail(ErrorCode::invalid_argument, "PCA needs at least 1 variable");
  PcaResult out;
  out.mean = samples.colwise().mean().transpose();
  const Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  out.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  out.sweeps = jacobi_eigen(out.cov, out.values, out.vectors);
  canonicalize(out.values, out.vectors);
  out.values = out.values.cwiseMax(0.0);
  const double trace = out.values.sum();
  if (!(trace > 0)) {
    out.degenerate = true;
    out.ratios = Eigen::VectorXd::Constant(p, features::kNaN);
  } else {
    out.ratios = out.values / trace;
  }
  return out;
}

double integrated_ofi(const Eigen::VectorXd& w1, const Eigen::VectorXd& ofi) {
  const double l1 = w1.lpNorm<1>();
  if (!(l1 > 0)) return features::kNaN;
  return w1.dot(ofi) / l1;
}

void fill_integrated(std::vector<features::FeatureRow>& rows, std::size_t window_rows) {
  if (window_rows < 2) fail(ErrorCode::invalid_argument, "integrated OFI window needs >= 2 rows");
  if (rows.empty()) return;
  const auto levels = static_cast<Eigen::Index>(rows.front().ofi.size());
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(window_rows), levels);
  Eigen::VectorXd x(levels);
  for (std::size_t k = window_rows; k < rows.size(); ++k) {
    auto& row = rows[k];
    if (!row.ok(features::kNoDepth)) continue;
    bool usable = true;
    for (std::size_t j = 0; j < window_rows && usable; ++j) {
      const auto& prev = rows[k - window_rows + j];
      if (!prev.ok(features::kNoDepth)) {
        usable = false;
        break;
      }
      for (Eigen::Index m = 0; m < levels; ++m) samples(static_cast<Eigen::Index>(j), m) = prev.ofi[static_cast<std::size_t>(m)];
    }
    if (!usable) continue;
    const auto pca = fit_pca(samples);
    if (pca.degenerate) continue;
    for (Eigen::Index m = 0; m < levels; ++m) x(m) = row.ofi[static_cast<std::size_t>(m)];
    const double v = integrated_ofi(pca.vectors.col(0), x);
    if (std::isnan(v)) continue;
    row.ofi_i = v;
    row.flags &= ~static_cast<std::uint32_t>(features::kNoIntegrated);
  }
}

void CommonFactorFit::apply(const Eigen::MatrixXd& panel, Eigen::VectorXd& factor_out,
                            Eigen::MatrixXd& residual_out) const {
  const Eigen::MatrixXd centered = panel.rowwise() - center.transpose();
  factor_out = centered * w;
  residual_out = panel;
  for (Eigen::Index i = 0; i < panel.cols(); ++i) {
    residual_out.col(i) = panel.col(i).array() - intercept(i) - loading(i) * factor_out.array();
  }
}

CommonFactorFit common_factor_decompose(const Eigen::MatrixXd& panel) {
  const Eigen::Index t = panel.rows();
  const Eigen::Index n = panel.cols();
  if (n < 2) fail(ErrorCode::invalid_argument, "common factor needs at least 2 stocks");
  if (t < 3) fail(ErrorCode::invalid_argument, "common factor needs at least 3 buckets");
  const auto pca = fit_pca(panel);
  if (pca.degenerate) fail(ErrorCode::numeric, "common factor panel has no variation");
  CommonFactorFit fit;
  fit.w = pca.vectors.col(0);
  fit.center = pca.mean;
  const Eigen::MatrixXd centered = panel.rowwise() - fit.center.transpose();
  fit.factor = centered * fit.w;
  const double f_mean = fit.factor.mean();
  const Eigen::VectorXd fc = fit.factor.array() - f_mean;
  const double sff = fc.squaredNorm();
  if (!(sff > 0)) fail(ErrorCode::numeric, "common factor has no variation");
  fit.intercept.resize(n);
  fit.loading.resize(n);
  fit.residual.resize(t, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x_mean = panel.col(i).mean();
    const double g = fc.dot(panel.col(i).array().matrix() - Eigen::VectorXd::Constant(t, x_mean)) / sff;
    fit.loading(i) = g;
    fit.intercept(i) = x_mean - g * f_mean;
    fit.residual.col(i) = panel.col(i).array() - fit.intercept(i) - g * fit.factor.array();
  }
  return fit;
}

}  // namespace ofilab::factor
