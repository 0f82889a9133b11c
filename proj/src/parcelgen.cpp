#include "midmile/parcelgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "midmile/netgen.hpp"

namespace midmile {

void validate(const ParcelGenConfig& cfg) {
  if (cfg.num_parcels < 0) {
    throw std::invalid_argument("parcelgen: n must be >= 0");
  }
  if (!(cfg.pareto_scale > 0.0 && cfg.pareto_scale < cfg.max_weight)) {
    throw std::invalid_argument("parcelgen: need 0 < scale < max_weight");
  }
  if (!(cfg.pareto_shape > 0.0)) {
    throw std::invalid_argument("parcelgen: alpha must be positive");
  }
  if (cfg.max_weight > 1.0) {
    throw std::invalid_argument("parcelgen: max_weight must be <= 1");
  }
  if (cfg.mean_route_length < 1) {
    throw std::invalid_argument("parcelgen: L must be >= 1");
  }
  if (cfg.max_retries < 0) {
    throw std::invalid_argument("parcelgen: max_retries must be >= 0");
  }
}

ShadowCapacities shadow_from_state(const MdpState& state) {
  ShadowCapacities shadow;
  for (EdgeId id : state.edge_ids()) {
    const EdgeRecord& e = state.edge(id);
    if (e.kind == EdgeKind::kTruckFwd) shadow[id] = e.capacity;
  }
  return shadow;
}

double sample_weight(const ParcelGenConfig& cfg, Rng& rng) {
  if (cfg.unit_weight) return 1.0;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (true) {
    // Inverse CDF of Pareto: w = m * u^(-1/alpha), u in (0, 1].
    double u = 1.0 - unit(rng);
    double w = cfg.pareto_scale * std::pow(u, -1.0 / cfg.pareto_shape);
    if (w <= cfg.max_weight) return w;
  }
}

NodeRef sample_start(const MdpState& state, const ParcelGenConfig& cfg,
                     Rng& rng) {
  const int last = state.horizon() - cfg.mean_route_length;
  if (last < 1) {
    throw std::runtime_error("parcelgen: horizon must exceed L");
  }
  std::vector<HubId> hubs;
  std::vector<std::vector<int>> times;
  std::vector<double> scores;
  for (HubId h = 0; h < state.num_hubs(); ++h) {
    std::vector<int> ts;
    for (int t = 1; t <= last; ++t) {
      if (state.has_node({h, t})) ts.push_back(t);
    }
    if (ts.empty()) continue;
    hubs.push_back(h);
    times.push_back(std::move(ts));
    scores.push_back(-static_cast<double>(state.network().degree[h]));
  }
  if (hubs.empty()) {
    throw std::runtime_error("parcelgen: no feasible start node");
  }
  std::size_t k = boltzmann_sample(scores, cfg.beta2, rng);
  std::uniform_int_distribution<std::size_t> pick(0, times[k].size() - 1);
  return {hubs[k], times[k][pick(rng)]};
}

namespace {

bool fits(const EdgeRecord& e, double weight, const ShadowCapacities& shadow) {
  if (e.kind == EdgeKind::kVirtualFwd) return true;
  if (e.kind != EdgeKind::kTruckFwd) return false;
  auto it = shadow.find(e.id);
  double cap = it == shadow.end() ? e.capacity : it->second;
  return cap >= weight - kCapacityEps;
}

}  // namespace

SampledRoute sample_route(const MdpState& state, double weight, NodeRef start,
                          const ParcelGenConfig& cfg, ShadowCapacities& shadow,
                          Rng& rng) {
  SampledRoute out;
  NodeRef here = start;
  const ResistanceMatrix& r = state.resistance();
  const double stop_p = 1.0 / cfg.mean_route_length;
  std::vector<EdgeId> options;
  std::vector<double> scores;
  while (true) {
    options.clear();
    scores.clear();
    for (EdgeId id : state.out_edges(here)) {
      const EdgeRecord& e = state.edge(id);
      if (!fits(e, weight, shadow)) continue;
      options.push_back(id);
      scores.push_back(r(start.hub, e.receiver.hub));
    }
    if (options.empty()) break;
    // Out-edge order depends on insertion history; sort for stable draws.
    std::vector<std::size_t> order(options.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return options[a] < options[b];
    });
    std::vector<double> sorted_scores;
    for (std::size_t i : order) sorted_scores.push_back(scores[i]);
    std::size_t k = order[boltzmann_sample(sorted_scores, cfg.beta3, rng)];
    const EdgeRecord& chosen = state.edge(options[k]);
    out.edges.push_back(chosen.id);
    int duration = chosen.receiver.time - chosen.sender.time;
    here = chosen.receiver;
    std::binomial_distribution<int> stop(duration, stop_p);
    if (stop(rng) > 0) break;
  }
  out.goal = here;
  out.retry = here.hub == start.hub;
  if (!out.retry) commit_route(state, out.edges, weight, shadow);
  return out;
}

void commit_route(const MdpState& state, const std::vector<EdgeId>& route,
                  double weight, ShadowCapacities& shadow) {
  for (EdgeId id : route) {
    const EdgeRecord& e = state.edge(id);
    if (e.kind != EdgeKind::kTruckFwd) continue;
    auto it = shadow.find(id);
    if (it == shadow.end()) it = shadow.emplace(id, e.capacity).first;
    it->second -= weight;
  }
}

MdpState populate(MdpState state, const ParcelGenConfig& cfg,
                  std::uint64_t seed, PopulateStats* stats) {
  validate(cfg);
  if (!state.parcels().empty()) {
    throw std::invalid_argument("populate: state already has parcels");
  }
  Rng rng = make_rng(seed, 4);
  std::vector<double> weights;
  weights.reserve(static_cast<std::size_t>(cfg.num_parcels));
  for (int i = 0; i < cfg.num_parcels; ++i) {
    weights.push_back(sample_weight(cfg, rng));
  }
  std::sort(weights.begin(), weights.end(), std::greater<>());

  ShadowCapacities shadow = shadow_from_state(state);
  PopulateStats local;
  ParcelId next_id = 0;
  for (double weight : weights) {
    int retries = 0;
    SampledRoute route;
    NodeRef start;
    while (true) {
      start = sample_start(state, cfg, rng);
      route = sample_route(state, weight, start, cfg, shadow, rng);
      if (!route.retry) break;
      if (retries >= cfg.max_retries) {
        commit_route(state, route.edges, weight, shadow);
        ++local.degenerate;
        break;
      }
      // Unit weights stay 1; only the resample counts as a retry.
      if (!cfg.unit_weight) weight *= 0.9;
      ++retries;
    }
    local.retries += retries;
    ParcelRecord parcel;
    parcel.id = next_id++;
    parcel.weight = weight;
    parcel.current = start;
    parcel.goal = route.goal;
    parcel.route = std::move(route.edges);
    state.add_parcel(std::move(parcel));
  }
  if (stats != nullptr) *stats = local;
  return state;
}

}  // namespace midmile
