#pragma once

// OLS and LASSO fits, forward-chaining cross-validation, R^2 helpers and the
// paired Delta-R^2 test.
//
// LASSO penalty units: the public `lambda` is the penalty on the unnormalized
// loss  RSS + lambda * ||b||_1  over standardized columns. Internally the
// solver minimizes (1/n) RSS + lambda_int * ||b||_1 with lambda_int = lambda / n;
// every Fit records both and the factor n.

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace ofilab::regression {

struct Fit {
  double intercept = 0.0;
  Eigen::VectorXd beta;       // original column scale
  Eigen::VectorXd residuals;  // y - yhat on the fitting rows
  double r2 = 0.0;
  double adj_r2 = 0.0;
  int nnz = 0;
  double lambda = 0.0;           // unnormalized-loss units
  double lambda_internal = 0.0;  // (1/n)-normalized loss
  double lambda_factor = 1.0;    // lambda = lambda_internal * lambda_factor
  int sweeps = 0;
  bool flagged = false;  // CV fallback used
  std::vector<std::string> labels;

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  double predict_row(const Eigen::RowVectorXd& x) const;
};

/// Least squares with intercept. Requires n > p + 1 and full column rank of
/// the centered design; otherwise throws naming the collinear columns.
Fit ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& labels = {});

struct LassoConfig {
  int folds = 5;
  int grid_size = 50;
  double min_ratio = 1e-4;
  double tol = 1e-10;  // max coefficient change, in units of sd(y)
  double gap_tol = 1e-12;  // duality gap, relative to the null objective
  int max_sweeps = 100000;
  bool include_zero = false;  // append lambda = 0 to the CV grid
};

/// Standardized design reused across penalties (and across targets).
class LassoProblem {
 public:
  LassoProblem(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
  Eigen::Index n() const { return n_; }
  Eigen::Index p() const { return p_; }
  /// Largest useful penalty in unnormalized-loss units: 2 * max_j |z_j' (y - ybar)|.
  double lambda_max() const;
  /// Solves at lambda (unnormalized-loss units). `warm` holds standardized coefficients
  /// and is updated in place when given.
  Fit solve(double lambda, const LassoConfig& cfg, Eigen::VectorXd* warm = nullptr) const;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& scale() const { return scale_; }

 private:
  Eigen::Index n_ = 0, p_ = 0;
  Eigen::VectorXd mean_, scale_;  // population sd; 0 marks a constant column
  double ymean_ = 0.0, ysd_ = 0.0;
  Eigen::MatrixXd gram_;  // Z'Z
  Eigen::VectorXd zty_;   // Z'(y - ybar)
  double yss_ = 0.0;      // ||y - ybar||^2
};

Fit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda, const LassoConfig& cfg = {},
              const std::vector<std::string>& labels = {});

/// Unnormalized-loss grid: grid_size log-spaced values from lambda_max down to
/// min_ratio * lambda_max (plus 0 when include_zero).
std::vector<double> lambda_grid(double lambda_max, const LassoConfig& cfg);

struct CvResult {
  Fit fit;  // refit on all rows at the chosen penalty
  std::vector<double> grid_internal;  // (1/n)-normalized penalties tried
  std::vector<double> cv_mse;
  std::size_t chosen = 0;
};

/// Paths stop early once the training fit explains this share of the
/// variance or keeps n - 1 predictors; smaller penalties reuse that solution
/// (near-interpolating fits converge very slowly and carry no extra information).
inline constexpr double kPathMaxR2 = 0.999;

/// Forward-chaining CV: rows split into folds+1 contiguous blocks; fold k
/// trains on blocks [0, k) and validates on block k. The grid is shared in
/// normalized units so it transfers across training sizes.
CvResult lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LassoConfig& cfg = {},
                  const std::vector<std::string>& labels = {});

double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);
/// NaN when n - p - 1 <= 0.
double adjusted_r2(double r2, Eigen::Index n, Eigen::Index p);
/// Centred on the out-of-sample mean; NaN for fewer than 2 rows or zero variance.
double oos_r2(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

struct DeltaTest {
  double mean_delta = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool degenerate = false;  // all differences identical
};

/// One-sided paired t-test of mean(b - a) <= 0.
DeltaTest delta_r2_test(std::span<const double> a, std::span<const double> b);

}  // namespace ofilab::regression
