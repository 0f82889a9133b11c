#include "midmile/pruning.hpp"

#include <algorithm>
#include <set>

namespace midmile {

namespace {

struct Grid {
  int horizon;
  std::size_t size;
  explicit Grid(const MdpState& s)
      : horizon(s.horizon()),
        size(static_cast<std::size_t>(s.num_hubs()) *
             static_cast<std::size_t>(s.horizon() + 1)) {}
  std::size_t operator()(NodeRef n) const {
    return static_cast<std::size_t>(n.hub) *
               static_cast<std::size_t>(horizon + 1) +
           static_cast<std::size_t>(n.time);
  }
};

bool is_move(EdgeKind kind) {
  return kind == EdgeKind::kTruckFwd || kind == EdgeKind::kVirtualFwd;
}

}  // namespace

bool ReachSet::contains(NodeRef node) const {
  return std::binary_search(nodes.begin(), nodes.end(), node);
}

bool ReachSet::contains(EdgeId edge) const {
  return std::binary_search(edges.begin(), edges.end(), edge);
}

bool usable_by(const EdgeRecord& edge, double weight) {
  if (edge.kind == EdgeKind::kVirtualFwd) return true;
  return edge.kind == EdgeKind::kTruckFwd &&
         edge.capacity >= weight - kCapacityEps;
}

ReachSet parcel_prune(const MdpState& state, ParcelId parcel) {
  return parcel_prune(state, state.parcel(parcel));
}

ReachSet parcel_prune(const MdpState& state, const ParcelRecord& parcel) {
  const NodeRef cur = parcel.current;
  const NodeRef goal = parcel.goal;
  const double w = parcel.weight;
  ReachSet out;
  auto trivial = [&]() {
    out.nodes = {cur};
    if (goal != cur) out.nodes.push_back(goal);
    std::sort(out.nodes.begin(), out.nodes.end());
    if (parcel.edge != kNoEdge && state.has_edge(parcel.edge)) {
      out.edges = {parcel.edge, mate_of(parcel.edge)};
    }
    out.deliverable = false;
    return out;
  };
  if (goal.time <= cur.time || !state.has_node(cur) || !state.has_node(goal)) {
    return trivial();
  }

  const Grid grid(state);
  const int mid = (cur.time + goal.time + 1) / 2;
  auto ok = [&](const EdgeRecord& e) {
    return usable_by(e, w) && e.sender.time >= cur.time &&
           e.receiver.time <= goal.time;
  };

  // Forward sweep: exact forward reachability for t <= mid.
  std::vector<char> fwd(grid.size, 0);
  std::vector<NodeRef> top;  // discovered by the forward sweep
  {
    std::vector<NodeRef> stack{cur};
    fwd[grid(cur)] = 1;
    while (!stack.empty()) {
      NodeRef u = stack.back();
      stack.pop_back();
      top.push_back(u);
      if (u.time >= mid) continue;
      for (EdgeId id : state.out_edges(u)) {
        const EdgeRecord& e = state.edge(id);
        if (!ok(e) || fwd[grid(e.receiver)]) continue;
        fwd[grid(e.receiver)] = 1;
        stack.push_back(e.receiver);
      }
    }
  }
  // Backward sweep: exact backward reachability for t >= mid.
  std::vector<char> bwd(grid.size, 0);
  std::vector<NodeRef> bottom;
  {
    std::vector<NodeRef> stack{goal};
    bwd[grid(goal)] = 1;
    while (!stack.empty()) {
      NodeRef v = stack.back();
      stack.pop_back();
      bottom.push_back(v);
      if (v.time <= mid) continue;
      for (EdgeId id : state.in_edges(v)) {
        const EdgeRecord& e = state.edge(id);
        if (!ok(e) || bwd[grid(e.sender)]) continue;
        bwd[grid(e.sender)] = 1;
        stack.push_back(e.sender);
      }
    }
  }

  // Join: extend backward reachability up through the top half and forward
  // reachability down through the bottom half.
  std::vector<char> reach_down(grid.size, 0);  // can reach goal
  std::vector<char> reach_up(grid.size, 0);    // reachable from current
  auto can_reach_goal = [&](NodeRef n) {
    return n.time >= mid ? bwd[grid(n)] != 0 : reach_down[grid(n)] != 0;
  };
  auto reached_from_cur = [&](NodeRef n) {
    return n.time <= mid ? fwd[grid(n)] != 0 : reach_up[grid(n)] != 0;
  };
  std::sort(top.begin(), top.end(), [](NodeRef a, NodeRef b) {
    return TimeOrder{}(b, a);
  });
  for (NodeRef u : top) {
    if (u.time >= mid) continue;
    for (EdgeId id : state.out_edges(u)) {
      const EdgeRecord& e = state.edge(id);
      if (ok(e) && can_reach_goal(e.receiver)) {
        reach_down[grid(u)] = 1;
        break;
      }
    }
  }
  std::sort(bottom.begin(), bottom.end(), TimeOrder{});
  for (NodeRef v : bottom) {
    if (v.time <= mid) continue;
    for (EdgeId id : state.in_edges(v)) {
      const EdgeRecord& e = state.edge(id);
      if (ok(e) && reached_from_cur(e.sender)) {
        reach_up[grid(v)] = 1;
        break;
      }
    }
  }

  auto in_set = [&](NodeRef n) {
    return reached_from_cur(n) && can_reach_goal(n);
  };
  if (!in_set(cur)) return trivial();

  std::vector<NodeRef> candidates = top;
  candidates.insert(candidates.end(), bottom.begin(), bottom.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  for (NodeRef n : candidates) {
    if (!in_set(n)) continue;
    out.nodes.push_back(n);
    for (EdgeId id : state.out_edges(n)) {
      const EdgeRecord& e = state.edge(id);
      if (ok(e) && in_set(e.receiver)) {
        out.edges.push_back(id);
        out.edges.push_back(mate_of(id));
      }
    }
  }
  if (parcel.edge != kNoEdge && state.has_edge(parcel.edge)) {
    out.edges.push_back(parcel.edge);
    out.edges.push_back(mate_of(parcel.edge));
  }
  std::sort(out.edges.begin(), out.edges.end());
  out.edges.erase(std::unique(out.edges.begin(), out.edges.end()),
                  out.edges.end());
  out.deliverable = true;
  return out;
}

SkipMap skip_prune(MdpState& state) {
  const Grid grid(state);
  std::vector<char> protect(grid.size, 0);
  for (const auto& [id, p] : state.parcels()) {
    if (state.in_range(p.current)) protect[grid(p.current)] = 1;
    if (state.in_range(p.goal)) protect[grid(p.goal)] = 1;
  }
  auto single = [&](std::span<const EdgeId> ids) -> EdgeId {
    EdgeId found = kNoEdge;
    for (EdgeId id : ids) {
      if (!is_move(state.edge(id).kind)) continue;
      if (found != kNoEdge) return kNoEdge;
      found = id;
    }
    return found;
  };
  auto skippable = [&](NodeRef n) {
    return !protect[grid(n)] && single(state.in_edges(n)) != kNoEdge &&
           single(state.out_edges(n)) != kNoEdge;
  };

  SkipMap delta;
  for (NodeRef n : state.nodes()) {
    if (!state.has_node(n) || !skippable(n)) continue;
    EdgeId in = single(state.in_edges(n));
    if (skippable(state.edge(in).sender)) continue;  // not a chain head

    std::vector<EdgeId> chain{in};
    std::vector<NodeRef> inner;
    NodeRef at = n;
    while (skippable(at)) {
      inner.push_back(at);
      EdgeId out = single(state.out_edges(at));
      chain.push_back(out);
      at = state.edge(out).receiver;
    }
    const NodeRef parent = state.edge(in).sender;
    const NodeRef child = at;

    std::vector<SkipHop> hops;
    bool all_virtual = true;
    double capacity = 0.0;
    bool have_truck = false;
    for (EdgeId id : chain) {
      const EdgeRecord& e = state.edge(id);
      if (e.kind == EdgeKind::kTruckFwd) {
        all_virtual = false;
        capacity = have_truck ? std::min(capacity, e.capacity) : e.capacity;
        have_truck = true;
      }
      auto it = state.skip_map().find(id);
      if (it != state.skip_map().end()) {
        hops.insert(hops.end(), it->second.begin(), it->second.end());
      } else {
        hops.push_back({id, e.sender, e.receiver, e.kind, e.capacity});
      }
    }
    for (NodeRef r : inner) state.remove_node(r);
    EdgeId merged = state.add_edge_pair(
        parent, child, all_virtual ? EdgeKind::kVirtualFwd : EdgeKind::kTruckFwd,
        all_virtual ? 0.0 : capacity, 0.0);
    state.skip_map()[merged] = hops;
    delta[merged] = std::move(hops);
  }
  return delta;
}

namespace {

// Drops every node/edge at or after `from_time` not covered by the reach sets
// of parcels whose window extends to `from_time` or later.
void keep_reachable(MdpState& state, int from_time) {
  const Grid grid(state);
  std::vector<char> keep_node(grid.size, 0);
  std::set<EdgeId> keep_edge;
  for (const auto& [id, p] : state.parcels()) {
    if (p.goal.time < from_time) continue;
    ReachSet r = parcel_prune(state, p);
    for (NodeRef n : r.nodes) keep_node[grid(n)] = 1;
    keep_edge.insert(r.edges.begin(), r.edges.end());
  }
  for (EdgeId id : state.edge_ids()) {
    if (!state.has_edge(id) || id % 2 != 0) continue;
    // Edges leaving earlier nodes only serve unaffected parcels.
    if (state.edge(id).sender.time < from_time) continue;
    if (keep_edge.count(id) == 0) state.remove_edge_pair(id);
  }
  for (NodeRef n : state.nodes()) {
    if (n.time < from_time) continue;
    if (!keep_node[grid(n)]) state.remove_node(n);
  }
}

}  // namespace

void prune_all(MdpState& state) {
  keep_reachable(state, 1);
  skip_prune(state);
}

void step_prune(MdpState& state, NodeRef vacated) {
  int from = vacated.time;
  for (const auto& [id, p] : state.parcels()) {
    if (p.current.time <= vacated.time && vacated.time < p.goal.time) {
      from = std::min(from, p.current.time);
    }
  }
  keep_reachable(state, from);
  skip_prune(state);
}

}  // namespace midmile
