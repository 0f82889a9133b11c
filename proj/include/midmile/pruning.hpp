#pragma once

#include <vector>

#include "midmile/graph.hpp"

namespace midmile {

// Nodes and edges that lie on some capacity-feasible path from a parcel's
// current node to its goal, assuming every truck is otherwise empty.
struct ReachSet {
  std::vector<NodeRef> nodes;  // sorted
  std::vector<EdgeId> edges;   // sorted; forward and backward ids
  bool deliverable = false;    // goal reachable from current

  bool contains(NodeRef node) const;
  bool contains(EdgeId edge) const;
};

// A forward edge a parcel of `weight` may take.
bool usable_by(const EdgeRecord& edge, double weight);

// Two-way reachability: a forward sweep from the current node expands nodes
// above the midpoint time ceil((t_cur + t_goal) / 2), a backward sweep from
// the goal expands nodes below it, and the two halves are joined at the
// midpoint. Undeliverable parcels get {current, goal} plus their own edge.
ReachSet parcel_prune(const MdpState& state, const ParcelRecord& parcel);
ReachSet parcel_prune(const MdpState& state, ParcelId parcel);

// Replaces every chain of nodes with exactly one incoming and one outgoing
// truck/virtual edge (and no parcel endpoint) by a single merged edge. The
// merged edge is virtual iff every hop is virtual, otherwise a truck with the
// minimum capacity of its trucks. Returns the new skip-map entries.
SkipMap skip_prune(MdpState& state);

// Keeps only the union of all parcels' reach sets, then skip-prunes.
void prune_all(MdpState& state);

// Incremental prune after a transition moved a parcel off `vacated`: only
// nodes and edges at or after the earliest affected time are re-examined.
// On a state that was already a prune_all fixpoint before the transition the
// result equals prune_all of the post-transition state.
void step_prune(MdpState& state, NodeRef vacated);

}  // namespace midmile
