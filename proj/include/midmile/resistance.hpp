#pragma once

#include <utility>
#include <vector>

namespace midmile {

struct StaticNetwork;

// Pairwise effective resistance between hubs of the static network.
class ResistanceMatrix {
 public:
  ResistanceMatrix() = default;
  ResistanceMatrix(int size, std::vector<double> values)
      : size_(size), values_(std::move(values)) {}

  int size() const { return size_; }
  double operator()(int i, int j) const { return values_[i * size_ + j]; }
  const std::vector<double>& values() const { return values_; }

 private:
  int size_ = 0;
  std::vector<double> values_;
};

// Effective resistance with edge conductance scale * (deg(a) + deg(b)).
// Solves the Laplacian grounded at hub 0; throws std::invalid_argument if the
// network is disconnected or the scale is not positive.
ResistanceMatrix resistance_matrix(const StaticNetwork& net, double scale);

// Same computation for an explicit weighted undirected graph.
// `edges` holds (a, b, conductance) triples.
ResistanceMatrix resistance_matrix(
    int num_nodes, const std::vector<std::pair<std::pair<int, int>, double>>& edges);

}  // namespace midmile
