#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "midmile/graph.hpp"
#include "midmile/rng.hpp"

namespace midmile {

struct ParcelGenConfig {
  int num_parcels = 200;
  double pareto_shape = 0.1;
  double pareto_scale = 0.01;  // minimum weight
  double max_weight = 1.0;
  double beta2 = 0.1;  // start hub: p(h) ~ exp(-beta2 deg(h))
  double beta3 = 0.1;  // next truck: p(e) ~ exp(beta3 r(start, receiver))
  int mean_route_length = 10;
  int max_retries = 50;
  bool unit_weight = false;
};

void validate(const ParcelGenConfig& cfg);

// Remaining truck capacity during generation, keyed by forward edge id.
using ShadowCapacities = std::unordered_map<EdgeId, double>;

ShadowCapacities shadow_from_state(const MdpState& state);

// Truncated Pareto(shape, scale) on [scale, max_weight] by rejection.
double sample_weight(const ParcelGenConfig& cfg, Rng& rng);

// Start hub by Boltzmann over -deg(h); start time uniform over the existing
// nodes of that hub with time in [1, T - L]. Hubs without such a node are
// skipped. Throws std::runtime_error when no hub qualifies.
NodeRef sample_start(const MdpState& state, const ParcelGenConfig& cfg,
                     Rng& rng);

struct SampledRoute {
  std::vector<EdgeId> edges;  // forward edge ids, time-monotone
  NodeRef goal;
  bool retry = false;  // route ended at the start hub
};

// Walks forward from `start` over edges with shadow capacity >= weight.
// After a hop of duration l the walk stops iff Bin(l, 1/L) > 0, or when no
// feasible continuation exists. Shadow capacities are decremented only for
// successful (non-retry) routes.
SampledRoute sample_route(const MdpState& state, double weight, NodeRef start,
                          const ParcelGenConfig& cfg, ShadowCapacities& shadow,
                          Rng& rng);

void commit_route(const MdpState& state, const std::vector<EdgeId>& route,
                  double weight, ShadowCapacities& shadow);

struct PopulateStats {
  int retries = 0;     // weight reductions across all parcels
  int degenerate = 0;  // parcels kept with a same-hub route
};

// Places cfg.num_parcels parcels, heaviest first. Each failed attempt scales
// the weight by 0.9; after max_retries the same-hub route is kept.
MdpState populate(MdpState state, const ParcelGenConfig& cfg,
                  std::uint64_t seed, PopulateStats* stats = nullptr);

}  // namespace midmile
