#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "midmile/graph.hpp"
#include "midmile/netgen.hpp"
#include "midmile/parcelgen.hpp"
#include "midmile/rng.hpp"

namespace midmile {

enum class RoutingStrategy { kOneStep, kAllStep, kLastParcel };

std::string_view to_string(RoutingStrategy strategy);
RoutingStrategy routing_strategy_from_string(std::string_view name);

struct EnvConfig {
  ExpansionConfig netgen;
  ParcelGenConfig parcelgen;
  // Unit variant: capacities and weights 1, unused trucks removed after reset.
  bool unit_mode = false;
  bool prune_on_step = false;
  bool parcel_prune_actions = false;
  RoutingStrategy strategy = RoutingStrategy::kOneStep;
  std::uint64_t seed = 0;
};

// H=10, T=50, 200 parcels, max duration 5, L=10, unit variant on.
EnvConfig experiment_config();

void validate(const EnvConfig& cfg);

// Static network -> time expansion -> skip prune -> parcels -> prune_all.
MdpState reset(const EnvConfig& cfg);
MdpState reset(const EnvConfig& cfg, std::uint64_t seed);

// Removes truck pairs that no ground-truth route uses, then isolated nodes.
void remove_unrouted_trucks(MdpState& state);

// Forward truck/virtual edges leaving the parcel's node that can carry it,
// ascending by id; optionally restricted to the parcel's reach set.
std::vector<EdgeId> get_actions(const MdpState& state, ParcelId parcel,
                                bool use_parcel_pruning);

struct Transition {
  ParcelId parcel = 0;
  EdgeId action = kNoEdge;
  int reward = 0;
  bool delivered = false;
  bool removed = false;
};

class InvalidAction : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Moves the parcel along `action`, consuming truck capacity. The parcel is
// delivered at its goal, and fails when it can no longer reach the goal
// (time at or past the goal time at another hub, or a dead end). Throws
// InvalidAction without touching the state if the action is not available.
Transition step(MdpState& state, ParcelId parcel, EdgeId action,
                bool prune_on_step = false);

// Marks a parcel without available actions as failed (reward 0).
Transition fail_parcel(MdpState& state, ParcelId parcel);

inline constexpr int kUntilDone = std::numeric_limits<int>::max();

struct Selection {
  ParcelId parcel = 0;
  int steps = 1;  // kUntilDone routes until the parcel leaves the state
};

// Earliest parcel (one-step / all-step) or latest parcel (last-parcel);
// ties go to the lower parcel id. Requires a live parcel.
Selection select_next(const MdpState& state, RoutingStrategy strategy);

struct Decision {
  const MdpState& state;
  ParcelId parcel;
  std::span<const EdgeId> actions;
};

class Policy {
 public:
  virtual ~Policy() = default;
  // Index into decision.actions.
  virtual std::size_t choose(const Decision& decision, Rng& rng) = 0;
};

struct EpisodeStats {
  int parcels = 0;
  int delivered = 0;
  int failed = 0;
  int episode_return = 0;
  int transitions = 0;
  int decisions = 0;
  double min_capacity = 0.0;  // lowest truck capacity seen after a step
  double wall_ms = 0.0;
  double get_actions_ms = 0.0;
  double policy_ms = 0.0;
  double step_ms = 0.0;
  double pruning_ms = 0.0;
};

using DecisionObserver = std::function<void(
    const Decision& decision, std::size_t chosen, const Transition& result)>;

// Routes parcels until none is in transit.
EpisodeStats run_episode(MdpState state, const EnvConfig& cfg, Policy& policy,
                         Rng& rng, const DecisionObserver& observer = {});
EpisodeStats run_episode(const EnvConfig& cfg, Policy& policy, Rng& rng);

}  // namespace midmile
