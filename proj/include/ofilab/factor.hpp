#pragma once

// PCA of multi-level OFIs, integrated OFI, and the cross-sectional common
// factor decomposition.

#include <Eigen/Dense>

#include "ofilab/features.hpp"

namespace ofilab::factor {

struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;      // (n-1) denominator
  Eigen::MatrixXd vectors;  // columns, unit l2 norm, descending eigenvalue
  Eigen::VectorXd values;   // clamped at 0
  Eigen::VectorXd ratios;   // NaN when trace is 0
  bool degenerate = false;  // zero total variance
  int sweeps = 0;
};

/// Cyclic Jacobi for a symmetric matrix. Stops when the off-diagonal
/// Frobenius mass falls below tol * ||S||_F (or is exactly zero).
/// Returns the number of sweeps used.
int jacobi_eigen(const Eigen::MatrixXd& s, Eigen::VectorXd& values, Eigen::MatrixXd& vectors, double tol = 1e-10,
                 int max_sweeps = 100);

/// Samples are rows. Throws for n < 2.
PcaResult fit_pca(const Eigen::MatrixXd& samples);

/// w'x / ||w||_1; NaN when w is zero.
double integrated_ofi(const Eigen::VectorXd& w1, const Eigen::VectorXd& ofi);

/// Fills ofi_i for every row that has `window_rows` preceding rows with
/// defined OFIs on the same day, using the first principal vector of those rows.
void fill_integrated(std::vector<features::FeatureRow>& rows, std::size_t window_rows);

struct CommonFactorFit {
  Eigen::VectorXd w;        // first principal vector of the cross-section
  Eigen::VectorXd center;   // column means of the training panel
  Eigen::VectorXd factor;   // T scores
  Eigen::VectorXd intercept;  // mu_i
  Eigen::VectorXd loading;    // gamma_i
  Eigen::MatrixXd residual;   // T x N

  /// Factor scores and residuals for new rows with the fitted parameters.
  void apply(const Eigen::MatrixXd& panel, Eigen::VectorXd& factor_out, Eigen::MatrixXd& residual_out) const;
};

/// panel is T x N (buckets by stocks). Needs N >= 2, T >= 3, nonconstant.
CommonFactorFit common_factor_decompose(const Eigen::MatrixXd& panel);

}  // namespace ofilab::factor
