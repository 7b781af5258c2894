#include "ofilab/netview.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ofilab/error.hpp"

namespace ofilab::netview {

Eigen::MatrixXd average_coefficients(const std::vector<Eigen::MatrixXd>& windows) {
  if (windows.empty()) fail(ErrorCode::invalid_argument, "no coefficient matrices to average");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(windows[0].rows(), windows[0].cols());
  for (const auto& w : windows) {
    if (w.rows() != sum.rows() || w.cols() != sum.cols()) {
      fail(ErrorCode::invalid_argument, "coefficient matrices have inconsistent dimensions");
    }
    sum += w;
  }
  return sum / static_cast<double>(windows.size());
}

Eigen::MatrixXd coefficient_matrix(const std::vector<impact::WindowFit>& fits, const std::string& model,
                                   std::size_t stocks) {
  const auto n = static_cast<Eigen::Index>(stocks);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::size_t> count(stocks, 0);
  for (const auto& f : fits) {
    if (f.model != model) continue;
    if (f.cross.size() != stocks || f.stock >= stocks) {
      fail(ErrorCode::invalid_argument, "fit of " + model + " does not carry one coefficient per stock");
    }
    for (std::size_t j = 0; j < stocks; ++j) sum(static_cast<Eigen::Index>(f.stock), static_cast<Eigen::Index>(j)) += f.cross[j];
    ++count[f.stock];
  }
  for (std::size_t i = 0; i < stocks; ++i)
    if (count[i] > 0) sum.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(count[i]);
  return sum;
}

Eigen::MatrixXd forward_coefficient_matrix(const impact::ForwardReport& report) {
  Eigen::MatrixXd sum;
  std::size_t count = 0;
  for (const auto& d : report.days) {
    if (d.lag0_count == 0) continue;
    if (sum.size() == 0) sum = Eigen::MatrixXd::Zero(d.lag0_sum.rows(), d.lag0_sum.cols());
    sum += d.lag0_sum;
    count += d.lag0_count;
  }
  if (count == 0) fail(ErrorCode::invalid_argument, "forward report of " + report.model + " has no cross fits");
  return sum / static_cast<double>(count);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorCode::invalid_argument, "percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) fail(ErrorCode::invalid_argument, "percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

Network threshold_network(const Eigen::MatrixXd& m, double pct) {
  if (m.rows() != m.cols() || m.rows() < 2) fail(ErrorCode::invalid_argument, "network needs a square matrix of size >= 2");
  if (!(pct > 0.0 && pct < 100.0)) fail(ErrorCode::config, "percentile must lie in (0, 100)", "network.percentile");
  Network net;
  net.nodes = static_cast<std::size_t>(m.rows());
  net.percentile = pct;
  std::vector<double> mags;
  bool any = false;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      if (i != j) {
        if (!std::isfinite(m(i, j))) fail(ErrorCode::numeric, "coefficient matrix has non-finite entries");
        mags.push_back(std::abs(m(i, j)));
        any = any || m(i, j) != 0.0;
      }
  if (!any) {
    net.flagged = true;
    return net;
  }
  net.threshold = percentile(mags, pct);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && std::abs(m(i, j)) > net.threshold)
        net.edges.push_back({static_cast<std::size_t>(j), static_cast<std::size_t>(i), m(i, j)});
  return net;
}

Eigen::MatrixXd normalize_mean_abs(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return m;
  const double mean_abs = m.cwiseAbs().mean();
  return mean_abs > 0.0 ? Eigen::MatrixXd(m / mean_abs) : m;
}

std::vector<double> singular_values(const Eigen::MatrixXd& m, bool normalize) {
  if (m.rows() != m.cols()) fail(ErrorCode::invalid_argument, "singular values need a square matrix");
  const Eigen::MatrixXd a = normalize ? normalize_mean_abs(m) : m;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();  // already descending
  return {s.data(), s.data() + s.size()};
}

std::vector<double> out_degree_centrality(const Network& net) {
  if (net.nodes < 2) fail(ErrorCode::invalid_argument, "centrality needs at least 2 nodes");
  std::vector<std::set<std::size_t>> out(net.nodes);
  for (const auto& e : net.edges)
    if (e.src != e.dst) out[e.src].insert(e.dst);
  std::vector<double> c(net.nodes);
  for (std::size_t i = 0; i < net.nodes; ++i) c[i] = static_cast<double>(out[i].size()) / static_cast<double>(net.nodes - 1);
  return c;
}

std::vector<GroupCentrality> group_degree_centrality(const Network& net, const std::vector<std::string>& sector_of) {
  if (sector_of.size() != net.nodes) fail(ErrorCode::invalid_argument, "sector map size differs from node count");
  std::vector<std::string> sectors;
  for (const auto& s : sector_of)
    if (std::find(sectors.begin(), sectors.end(), s) == sectors.end()) sectors.push_back(s);
  std::vector<GroupCentrality> out;
  for (const auto& s : sectors) {
    GroupCentrality g;
    g.sector = s;
    std::size_t outside = 0;
    for (const auto& x : sector_of) (x == s ? g.members : outside) += 1;
    std::set<std::size_t> reached, feeding;
    for (const auto& e : net.edges) {
      const bool src_in = sector_of[e.src] == s, dst_in = sector_of[e.dst] == s;
      if (src_in && !dst_in) reached.insert(e.dst);
      if (!src_in && dst_in) feeding.insert(e.src);
    }
    if (outside > 0 && g.members > 0) {
      g.defined = true;
      g.out = static_cast<double>(reached.size()) / static_cast<double>(outside);
      g.in = static_cast<double>(feeding.size()) / static_cast<double>(outside);
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace ofilab::netview
