#include "midmile/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include <spdlog/spdlog.h>

#include "midmile/pruning.hpp"

namespace midmile {

std::string_view to_string(RoutingStrategy strategy) {
  switch (strategy) {
    case RoutingStrategy::kOneStep: return "one_step";
    case RoutingStrategy::kAllStep: return "all_step";
    case RoutingStrategy::kLastParcel: return "last_parcel";
  }
  return "one_step";
}

RoutingStrategy routing_strategy_from_string(std::string_view name) {
  if (name == "one_step") return RoutingStrategy::kOneStep;
  if (name == "all_step") return RoutingStrategy::kAllStep;
  if (name == "last_parcel") return RoutingStrategy::kLastParcel;
  throw std::invalid_argument("unknown routing strategy '" +
                              std::string(name) + "'");
}

EnvConfig experiment_config() {
  EnvConfig cfg;
  cfg.netgen.num_hubs = 10;
  cfg.netgen.horizon = 50;
  cfg.netgen.max_duration = 5;
  cfg.parcelgen.num_parcels = 200;
  cfg.parcelgen.mean_route_length = 10;
  cfg.unit_mode = true;
  return cfg;
}

void validate(const EnvConfig& cfg) {
  validate(cfg.netgen);
  validate(cfg.parcelgen);
  if (cfg.netgen.horizon <= cfg.parcelgen.mean_route_length) {
    throw std::invalid_argument("config: horizon must exceed L");
  }
}

MdpState reset(const EnvConfig& cfg) { return reset(cfg, cfg.seed); }

MdpState reset(const EnvConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  ExpansionConfig ncfg = cfg.netgen;
  ParcelGenConfig pcfg = cfg.parcelgen;
  if (cfg.unit_mode) {
    ncfg.unit_capacity = true;
    pcfg.unit_weight = true;
  }
  auto net = std::make_shared<const StaticNetwork>(
      gen_static(ncfg.num_hubs, derive_seed(seed, 1)));
  MdpState state = expand(net, ncfg, derive_seed(seed, 2));
  skip_prune(state);
  state = populate(std::move(state), pcfg, derive_seed(seed, 4));
  prune_all(state);
  if (cfg.unit_mode) {
    // Dropping trucks can strand nodes and open new chains.
    remove_unrouted_trucks(state);
    prune_all(state);
  }
  return state;
}

void remove_unrouted_trucks(MdpState& state) {
  std::set<EdgeId> used;
  for (const auto& [id, p] : state.parcels()) {
    for (EdgeId e : expand_route(state, p.route)) used.insert(e);
  }
  for (EdgeId id : state.edge_ids()) {
    if (!state.has_edge(id)) continue;
    const EdgeRecord& e = state.edge(id);
    if (e.kind != EdgeKind::kTruckFwd) continue;
    auto hops = expand_edge(state, id);
    bool routed = std::any_of(hops.begin(), hops.end(),
                              [&](EdgeId h) { return used.count(h) > 0; });
    if (!routed) state.remove_edge_pair(id);
  }
  std::set<NodeRef> protect;
  for (const auto& [id, p] : state.parcels()) {
    protect.insert(p.current);
    protect.insert(p.goal);
  }
  for (NodeRef n : state.nodes()) {
    if (protect.count(n) == 0 && state.in_edges(n).empty() &&
        state.out_edges(n).empty()) {
      state.remove_node(n);
    }
  }
}

std::vector<EdgeId> get_actions(const MdpState& state, ParcelId parcel,
                                bool use_parcel_pruning) {
  const ParcelRecord& p = state.parcel(parcel);
  std::vector<EdgeId> out;
  for (EdgeId id : state.out_edges(p.current)) {
    const EdgeRecord& e = state.edge(id);
    if (usable_by(e, p.weight)) out.push_back(id);
  }
  if (use_parcel_pruning && !out.empty()) {
    ReachSet reach = parcel_prune(state, p);
    std::erase_if(out, [&](EdgeId id) { return !reach.contains(id); });
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

bool has_moves(const MdpState& state, NodeRef node) {
  for (EdgeId id : state.out_edges(node)) {
    EdgeKind k = state.edge(id).kind;
    if (k == EdgeKind::kTruckFwd || k == EdgeKind::kVirtualFwd) return true;
  }
  return false;
}

}  // namespace

Transition step(MdpState& state, ParcelId parcel, EdgeId action,
                bool prune_on_step) {
  if (!state.has_parcel(parcel)) {
    throw InvalidAction("parcel " + std::to_string(parcel) + " not in transit");
  }
  const ParcelRecord& p = state.parcel(parcel);
  if (!state.has_edge(action)) {
    throw InvalidAction("edge " + std::to_string(action) + " not in state");
  }
  const EdgeRecord e = state.edge(action);
  if (e.sender != p.current || !usable_by(e, p.weight)) {
    throw InvalidAction("edge " + std::to_string(action) +
                        " is not an available action for parcel " +
                        std::to_string(parcel));
  }

  Transition tr;
  tr.parcel = parcel;
  tr.action = action;
  const NodeRef vacated = p.current;
  const NodeRef goal = p.goal;
  if (e.kind == EdgeKind::kTruckFwd) {
    state.set_capacity(action, e.capacity - p.weight);
  }
  state.remove_edge_pair(p.edge);
  ParcelRecord& moving = state.mutable_parcel(parcel);
  moving.current = e.receiver;
  moving.edge = kNoEdge;

  if (e.receiver == goal) {
    tr.delivered = true;
    tr.removed = true;
    tr.reward = 1;
    state.retire_parcel(parcel, ParcelStatus::kDelivered);
  } else if (e.receiver.time >= goal.time || !has_moves(state, e.receiver)) {
    tr.removed = true;
    state.retire_parcel(parcel, ParcelStatus::kFailed);
  } else {
    moving.edge = state.add_edge_pair(e.receiver, goal, EdgeKind::kParcelFwd,
                                      0.0, moving.weight);
  }
  if (prune_on_step) step_prune(state, vacated);
  return tr;
}

Transition fail_parcel(MdpState& state, ParcelId parcel) {
  Transition tr;
  tr.parcel = parcel;
  tr.removed = true;
  state.retire_parcel(parcel, ParcelStatus::kFailed);
  return tr;
}

Selection select_next(const MdpState& state, RoutingStrategy strategy) {
  if (state.parcels().empty()) {
    throw std::logic_error("select_next: no parcel in transit");
  }
  const bool latest = strategy == RoutingStrategy::kLastParcel;
  const ParcelRecord* best = nullptr;
  // parcels() iterates in id order, so strict comparisons keep the lower id.
  for (const auto& [id, p] : state.parcels()) {
    if (best == nullptr ||
        (latest ? p.current.time > best->current.time
                : p.current.time < best->current.time)) {
      best = &p;
    }
  }
  Selection s;
  s.parcel = best->id;
  s.steps = strategy == RoutingStrategy::kOneStep ? 1 : kUntilDone;
  return s;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

}  // namespace

EpisodeStats run_episode(MdpState state, const EnvConfig& cfg, Policy& policy,
                         Rng& rng, const DecisionObserver& observer) {
  const auto begin = Clock::now();
  EpisodeStats stats;
  stats.parcels = static_cast<int>(state.parcels().size());
  stats.min_capacity = 0.0;
  bool seen_truck = false;

  while (!state.parcels().empty()) {
    Selection sel = select_next(state, cfg.strategy);
    for (int k = 0; k < sel.steps && state.has_parcel(sel.parcel); ++k) {
      auto t0 = Clock::now();
      std::vector<EdgeId> actions =
          get_actions(state, sel.parcel, cfg.parcel_prune_actions);
      stats.get_actions_ms += ms_since(t0);
      if (actions.empty()) {
        fail_parcel(state, sel.parcel);
        ++stats.failed;
        break;
      }
      Decision decision{state, sel.parcel, actions};
      t0 = Clock::now();
      std::size_t idx = policy.choose(decision, rng);
      stats.policy_ms += ms_since(t0);
      ++stats.decisions;
      if (idx >= actions.size()) {
        throw std::runtime_error("policy returned action index " +
                                 std::to_string(idx) + " of " +
                                 std::to_string(actions.size()));
      }
      const NodeRef vacated = state.parcel(sel.parcel).current;
      const EdgeId chosen = actions[idx];
      t0 = Clock::now();
      Transition tr = step(state, sel.parcel, chosen, false);
      stats.step_ms += ms_since(t0);
      if (state.has_edge(chosen) &&
          state.edge(chosen).kind == EdgeKind::kTruckFwd) {
        double cap = state.edge(chosen).capacity;
        stats.min_capacity = seen_truck ? std::min(stats.min_capacity, cap) : cap;
        seen_truck = true;
      }
      if (cfg.prune_on_step) {
        t0 = Clock::now();
        step_prune(state, vacated);
        stats.pruning_ms += ms_since(t0);
      }
      ++stats.transitions;
      stats.episode_return += tr.reward;
      if (tr.delivered) ++stats.delivered;
      if (tr.removed && !tr.delivered) ++stats.failed;
      if (observer) observer(decision, idx, tr);
    }
  }
  stats.wall_ms = ms_since(begin);
  spdlog::debug("episode: {} parcels, {} delivered, {} transitions",
                stats.parcels, stats.delivered, stats.transitions);
  return stats;
}

EpisodeStats run_episode(const EnvConfig& cfg, Policy& policy, Rng& rng) {
  return run_episode(reset(cfg), cfg, policy, rng);
}

}  // namespace midmile
