#pragma once

// Averaged cross-impact coefficient matrices and their threshold networks.
// Matrices are indexed [target, source]: entry (i, j) is the coefficient of
// stock j's flow in stock i's regression and becomes the edge j -> i.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ofilab/impact.hpp"

namespace ofilab::netview {

Eigen::MatrixXd average_coefficients(const std::vector<Eigen::MatrixXd>& windows);

/// Mean over windows of WindowFit::cross for `model`, row = fitted stock.
Eigen::MatrixXd coefficient_matrix(const std::vector<impact::WindowFit>& fits, const std::string& model,
                                   std::size_t stocks);

/// Mean lag-0 coefficient block over every forward fit of the report.
Eigen::MatrixXd forward_coefficient_matrix(const impact::ForwardReport& report);

/// Linear-interpolation percentile (position q/100 * (n-1) over sorted values).
double percentile(std::vector<double> values, double q);

struct Edge {
  std::size_t src = 0, dst = 0;
  double weight = 0.0;
};

struct Network {
  std::size_t nodes = 0;
  double percentile = 95.0;
  double threshold = 0.0;  // edges satisfy |weight| > threshold
  std::vector<Edge> edges;  // ordered by (src, dst)
  bool flagged = false;     // all off-diagonal entries zero
};

Network threshold_network(const Eigen::MatrixXd& m, double pct);

/// Divides by the mean absolute entry; a zero matrix is returned unchanged.
Eigen::MatrixXd normalize_mean_abs(const Eigen::MatrixXd& m);

/// Descending singular values of a square matrix.
std::vector<double> singular_values(const Eigen::MatrixXd& m, bool normalize);

std::vector<double> out_degree_centrality(const Network& net);

struct GroupCentrality {
  std::string sector;
  std::size_t members = 0;
  double in = features::kNaN;   // share of outside nodes with an edge into the sector
  double out = features::kNaN;  // share of outside nodes receiving an edge from the sector
  bool defined = false;         // false for an empty complement or empty sector
};

/// Sectors in first-appearance order.
std::vector<GroupCentrality> group_degree_centrality(const Network& net, const std::vector<std::string>& sector_of);

}  // namespace ofilab::netview
