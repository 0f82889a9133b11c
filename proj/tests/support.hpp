#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "midmile/dynamics.hpp"
#include "midmile/graph.hpp"
#include "midmile/netgen.hpp"
#include "midmile/policies.hpp"
#include "midmile/pruning.hpp"

namespace support {

using namespace midmile;

// Default experiment config scaled down.
inline EnvConfig small_config(int hubs, int horizon, int parcels,
                              int route_length, int trucks_per_step) {
  EnvConfig cfg = experiment_config();
  cfg.netgen.num_hubs = hubs;
  cfg.netgen.horizon = horizon;
  cfg.netgen.trucks_per_step = trucks_per_step;
  cfg.parcelgen.num_parcels = parcels;
  cfg.parcelgen.mean_route_length = route_length;
  return cfg;
}

// 3 hubs, 5 steps, 5 parcels.
inline EnvConfig tiny_config() {
  EnvConfig cfg = small_config(3, 5, 5, 2, 2);
  cfg.netgen.max_duration = 2;
  return cfg;
}

// Fractional capacities and weights on a 4-hub/12-step instance.
inline EnvConfig fractional_config(int parcels = 12) {
  EnvConfig cfg = small_config(4, 12, parcels, 4, 3);
  cfg.netgen.max_duration = 3;
  cfg.unit_mode = false;
  return cfg;
}

// Full time lattice over a path graph 0-1-...-(hubs-1), no trucks.
inline MdpState lattice(int hubs, int horizon) {
  std::vector<std::pair<HubId, HubId>> edges;
  for (int h = 0; h + 1 < hubs; ++h) edges.emplace_back(h, h + 1);
  auto net = std::make_shared<StaticNetwork>(hubs, edges);
  MdpState s(net, 0.01, horizon);
  for (int h = 0; h < hubs; ++h) {
    for (int t = 1; t <= horizon; ++t) s.add_node({h, t});
  }
  for (int h = 0; h < hubs; ++h) {
    for (int t = 1; t < horizon; ++t) {
      s.add_edge_pair({h, t}, {h, t + 1}, EdgeKind::kVirtualFwd, 0.0, 0.0);
    }
  }
  return s;
}

// Resistance by nodal analysis: inject a unit current at i, draw it out at
// j, ground j, and read the potential at i. Dense Gaussian elimination with
// partial pivoting, no shared code with the library.
inline double nodal_resistance(
    int n, const std::vector<std::pair<std::pair<int, int>, double>>& edges,
    int i, int j) {
  if (i == j) return 0.0;
  std::vector<std::vector<double>> g(n, std::vector<double>(n, 0.0));
  for (const auto& [ab, c] : edges) {
    auto [a, b] = ab;
    g[a][a] += c;
    g[b][b] += c;
    g[a][b] -= c;
    g[b][a] -= c;
  }
  std::vector<int> keep;
  for (int k = 0; k < n; ++k) {
    if (k != j) keep.push_back(k);
  }
  const int m = n - 1;
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) a[r][c] = g[keep[r]][keep[c]];
    a[r][m] = keep[r] == i ? 1.0 : 0.0;
  }
  for (int col = 0; col < m; ++col) {
    int piv = col;
    for (int r = col + 1; r < m; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    for (int r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
    }
  }
  for (int r = 0; r < m; ++r) {
    if (keep[r] == i) return a[r][m] / a[r][r];
  }
  return 0.0;
}

// Random connected weighted graph: a random spanning tree plus extra edges.
inline std::vector<std::pair<std::pair<int, int>, double>> random_graph(
    int n, Rng& rng) {
  std::uniform_real_distribution<double> cond(0.1, 3.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::set<std::pair<int, int>> seen;
  std::vector<std::pair<std::pair<int, int>, double>> edges;
  for (int v = 1; v < n; ++v) {
    int u = std::uniform_int_distribution<int>(0, v - 1)(rng);
    seen.insert({u, v});
    edges.push_back({{u, v}, cond(rng)});
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (!seen.count({a, b}) && coin(rng) < 0.3) {
        edges.push_back({{a, b}, cond(rng)});
      }
    }
  }
  return edges;
}

// Capacity-feasible current->goal reachability by exhaustive path
// enumeration over forward truck/virtual edges.
struct PathOracle {
  std::set<NodeRef> nodes;
  std::set<EdgeId> edges;  // forward ids
  bool deliverable = false;
};

inline PathOracle enumerate_paths(const MdpState& s, const ParcelRecord& p) {
  PathOracle out;
  std::vector<NodeRef> nodes{p.current};
  std::vector<EdgeId> edges;
  auto dfs = [&](auto&& self, NodeRef u) -> void {
    if (u == p.goal) {
      out.deliverable = true;
      out.nodes.insert(nodes.begin(), nodes.end());
      out.edges.insert(edges.begin(), edges.end());
      return;
    }
    if (u.time >= p.goal.time) return;
    for (EdgeId id : s.out_edges(u)) {
      const EdgeRecord& e = s.edge(id);
      if (!is_forward(e.kind) || is_parcel(e.kind)) continue;
      if (!usable_by(e, p.weight) || e.receiver.time > p.goal.time) continue;
      nodes.push_back(e.receiver);
      edges.push_back(id);
      self(self, e.receiver);
      nodes.pop_back();
      edges.pop_back();
    }
  };
  if (p.goal.time > p.current.time) dfs(dfs, p.current);
  return out;
}

// Order-free description of a state's graph, for comparing states whose
// merged edges may carry different ids.
struct GraphContent {
  std::vector<NodeRef> nodes;
  std::multiset<std::tuple<NodeRef, NodeRef, int, double, double>> edges;

  bool operator==(const GraphContent&) const = default;
};

inline GraphContent content(const MdpState& s) {
  GraphContent c;
  c.nodes = s.nodes();
  for (EdgeId id : s.edge_ids()) {
    const EdgeRecord& e = s.edge(id);
    c.edges.insert({e.sender, e.receiver, static_cast<int>(e.kind), e.capacity,
                    e.weight});
  }
  return c;
}

// Replays ground-truth routes on `state` under the config's dynamics.
inline EpisodeStats replay(const MdpState& state, const EnvConfig& cfg) {
  ReplayPolicy policy;
  Rng rng = make_rng(0);
  return run_episode(state, cfg, policy, rng);
}

}  // namespace support
