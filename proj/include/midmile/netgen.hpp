#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "midmile/graph.hpp"
#include "midmile/rng.hpp"

namespace midmile {

struct ExpansionConfig {
  int num_hubs = 10;
  int horizon = 50;
  // Trucks departing per launch step; unset means one per hub.
  std::optional<int> trucks_per_step;
  // Durations above horizon - 1 are clipped to the feasible range.
  int max_duration = 5;
  double beta1 = 0.01;
  bool unit_capacity = false;

  int effective_trucks_per_step() const {
    return trucks_per_step.value_or(num_hubs);
  }
};

// Throws std::invalid_argument on bad parameters.
void validate(const ExpansionConfig& cfg);

// Extended Barabasi-Albert graph (NetworkX extended_barabasi_albert_graph):
// start from m isolated hubs, then repeatedly with probability p add m edges
// between existing hubs, with probability q rewire m edges, otherwise attach
// a new hub to m distinct targets drawn from the preferential-attachment list.
StaticNetwork gen_static(int num_hubs, std::uint64_t seed, int m = 2,
                         double p = 0.2, double q = 0.0);

// Draws `count` distinct indices into `scores`, one at a time from
// p(i) ~ exp(beta * score[i]) over the items not yet drawn.
std::vector<std::size_t> boltzmann_sample_without_replacement(
    std::span<const double> scores, double beta, std::size_t count, Rng& rng);

// Single draw from the same distribution.
std::size_t boltzmann_sample(std::span<const double> scores, double beta,
                             Rng& rng);

// Time-expands the static network: all (hub, t) nodes, the virtual lattice,
// and trucks_per_step Boltzmann-sampled trucks per launch step t < T.
MdpState expand(std::shared_ptr<const StaticNetwork> network,
                const ExpansionConfig& cfg, std::uint64_t seed);

}  // namespace midmile
