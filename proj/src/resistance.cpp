#include "midmile/resistance.hpp"

#include <stdexcept>

#include <Eigen/Dense>

#include "midmile/graph.hpp"

namespace midmile {

ResistanceMatrix resistance_matrix(
    int num_nodes,
    const std::vector<std::pair<std::pair<int, int>, double>>& edges) {
  if (num_nodes <= 0) throw std::invalid_argument("resistance: empty graph");
  const int n = num_nodes;
  Eigen::MatrixXd laplacian = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [ends, conductance] : edges) {
    auto [a, b] = ends;
    if (!(conductance > 0.0)) {
      throw std::invalid_argument("resistance: conductance must be positive");
    }
    laplacian(a, a) += conductance;
    laplacian(b, b) += conductance;
    laplacian(a, b) -= conductance;
    laplacian(b, a) -= conductance;
  }
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& [ends, conductance] : edges) {
    adj[ends.first].push_back(ends.second);
    adj[ends.second].push_back(ends.first);
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  if (reached != n) {
    throw std::invalid_argument("resistance: static network is disconnected");
  }

  std::vector<double> values(static_cast<std::size_t>(n) * n, 0.0);
  if (n == 1) return ResistanceMatrix(n, std::move(values));

  // Ground hub 0: the reduced Laplacian is positive definite iff the graph is
  // connected, and its inverse padded with a zero row/column is a generalized
  // inverse of the full Laplacian.
  Eigen::MatrixXd grounded = laplacian.bottomRightCorner(n - 1, n - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(grounded);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("resistance: static network is disconnected");
  }
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  g.bottomRightCorner(n - 1, n - 1) = inv;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double r = i == j ? 0.0 : g(i, i) + g(j, j) - 2.0 * g(i, j);
      values[static_cast<std::size_t>(i * n + j)] = r;
    }
  }
  // Symmetrize away rounding.
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double avg = 0.5 * (values[i * n + j] + values[j * n + i]);
      values[i * n + j] = avg;
      values[j * n + i] = avg;
    }
  }
  return ResistanceMatrix(n, std::move(values));
}

ResistanceMatrix resistance_matrix(const StaticNetwork& net, double scale) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("resistance: beta1 must be positive");
  }
  std::vector<std::pair<std::pair<int, int>, double>> weighted;
  weighted.reserve(net.edges.size());
  for (auto [a, b] : net.edges) {
    double c = scale * (net.degree[a] + net.degree[b]);
    weighted.push_back({{a, b}, c});
  }
  return resistance_matrix(net.num_hubs, weighted);
}

}  // namespace midmile
