#pragma once

// Rolling-window experiments for every model family: contemporaneous price
// and cross impact, common-factor models, forward-looking forecasts and the
// multi-horizon impact regression.

#include <string>
#include <vector>

#include "ofilab/features.hpp"
#include "ofilab/regression.hpp"

namespace ofilab::impact {

enum class Solver { ols, lasso_cv };
enum class Input { ofi_levels, ofi_integrated, log_return, common_factor };

struct ModelSpec {
  std::string name;
  bool forward = false;
  bool cross = false;   // uses every stock's features
  Input input = Input::ofi_levels;
  int levels = 1;       // for ofi_levels
  Solver solver = Solver::ols;
};

/// Contemporaneous: PI1..PI<M>, PII, CI1, CII, CI10, PI10L, PIM, CIM, PIMI, CIMI.
/// Forward: FPI1, FCI1, FPII, FCII, FAR, FCR, FPI10.
/// Throws Error(config, field "models") for unknown names.
ModelSpec parse_model(const std::string& name, int max_levels = 10);
std::vector<std::string> known_models(int max_levels = 10);

struct Protocol {
  lob::Session session{lob::Timestamp::from_hms(10, 0), lob::Timestamp::from_hms(15, 30)};
  double window_minutes = 30;
  double cadence_minutes = 30;
  regression::LassoConfig lasso;
  int threads = 1;
};

/// Bucket index ranges of one rolling window within a day.
struct WindowSpan {
  std::size_t fit_begin = 0, fit_end = 0;  // [begin, end)
  std::size_t oos_begin = 0, oos_end = 0;
  lob::Timestamp start;
};

/// Fit window j covers [open + j*cadence, +window) of the session; it is
/// evaluated on the next cadence span. Windows whose evaluation span would
/// leave the session are dropped.
std::vector<WindowSpan> session_windows(const features::Panel& panel, const Protocol& protocol);

struct WindowFit {
  std::string model;
  std::size_t day = 0;
  std::size_t stock = 0;
  std::size_t window = 0;
  lob::Timestamp window_start;
  double is_r2 = features::kNaN;      // adjusted
  double is_r2_raw = features::kNaN;  // unadjusted
  double oos_r2 = features::kNaN;
  double lambda = features::kNaN;
  int nnz = 0;
  std::size_t n_fit = 0, n_oos = 0;
  std::vector<double> cross;  // per source stock coefficient (cross models); own coefficient for PI models
};

struct ContemporaneousReport {
  std::vector<WindowFit> fits;  // ordered by (day, stock, window, model order)
  std::size_t skipped = 0;
};

/// Runs every model on every (day, stock, window). Days whose rows lack a
/// normalized return are skipped automatically.
ContemporaneousReport run_contemporaneous(const features::Panel& panel, const std::vector<ModelSpec>& models,
                                          const Protocol& protocol);

/// Forward forecasts of one model for one day: forecast[stock][k] predicts
/// R at bucket times[k] + h.
struct ForwardDay {
  std::size_t day = 0;
  std::vector<lob::Timestamp> times;          // feature bucket end t
  std::vector<std::vector<double>> forecast;  // [stock][k]
  std::vector<std::vector<double>> realized;  // R_{t+1}
  std::vector<std::vector<double>> is_r2;     // adjusted IS R^2 of the fit used
  std::vector<std::vector<double>> spread;    // relative spread at t
  Eigen::MatrixXd lag0_sum;  // sum over fits of lag-0 coefficients [target, source]
  std::size_t lag0_count = 0;
};

struct ForwardReport {
  std::string model;
  std::vector<ForwardDay> days;
  std::vector<WindowFit> blocks;  // OOS R^2 per block of `block` consecutive forecasts
};

struct ForwardProtocol {
  lob::Session session{lob::Timestamp::from_hms(10, 0), lob::Timestamp::from_hms(15, 30)};
  int train_pairs = 30;
  int lags = 3;   // lags 0..lags-1
  int block = 30;
  regression::LassoConfig lasso;
  int threads = 1;
};

ForwardReport run_forward(const features::Panel& panel, const ModelSpec& model, const ForwardProtocol& protocol);

/// Daily OLS of r_{t+1} on ofi^1 lags 1..p over the whole day.
struct HorizonImpactFit {
  int p = 0;
  std::vector<double> beta;    // beta_1..beta_p, averaged over stock-days
  std::vector<double> cumsum;  // running sums
  std::size_t fits = 0;
};

HorizonImpactFit fit_horizon_impact(const std::vector<double>& r, const std::vector<double>& ofi1, int p);
HorizonImpactFit run_horizon_impact(const features::Panel& panel, int p);

struct DeltaRow {
  std::string base, model;
  std::string sample;  // "is" or "oos"
  double base_mean = features::kNaN, model_mean = features::kNaN;
  regression::DeltaTest test;
};

/// Pairs fits of two models on identical (day, stock, window) keys.
DeltaRow compare(const std::vector<WindowFit>& fits, const std::string& base, const std::string& model,
                 bool oos);

double mean_metric(const std::vector<WindowFit>& fits, const std::string& model, bool oos);

/// Quartile buckets by percentile rank (count of strictly smaller values / N).
/// Ties share the lower bucket.
std::vector<int> quartile_labels(const std::vector<double>& values);

}  // namespace ofilab::impact
