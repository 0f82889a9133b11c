#include <doctest.h>

#include <queue>

#include "midmile/features.hpp"
#include "support.hpp"

using namespace midmile;

namespace {

int count_flag(const FeatureGraph& fg, std::size_t slot) {
  int n = 0;
  for (const FeatureEdge& e : fg.edges) n += e.features[slot] == 1.0;
  return n;
}

// Goal reachable from the current node over forward truck, virtual and
// synthetic links, ignoring the parcel edge itself.
bool goal_reachable(const FeatureGraph& fg, const MdpState& s) {
  const ParcelRecord& p = s.parcel(fg.parcel);
  std::vector<std::vector<int>> adj(fg.nodes.size());
  for (const FeatureEdge& e : fg.edges) {
    if (e.kind == EdgeKind::kTruckFwd || e.kind == EdgeKind::kVirtualFwd) {
      adj[e.sender].push_back(e.receiver);
    }
  }
  std::vector<char> seen(fg.nodes.size(), 0);
  std::queue<int> q;
  q.push(fg.node_index(p.current));
  seen[q.front()] = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        q.push(v);
      }
    }
  }
  return seen[fg.node_index(p.goal)];
}

}  // namespace

TEST_CASE("relative time") {
  CHECK(relative_time(5, 5, 10) == 0.0);
  CHECK(relative_time(10, 5, 10) == 1.0);
  CHECK(relative_time(7, 5, 10) == doctest::Approx(0.4));
  CHECK(relative_time(12, 5, 10) == doctest::Approx(1.4));
  CHECK(relative_time(3, 4, 4) == 0.0);
  CHECK(relative_time(3, 6, 4) == 0.0);
}

TEST_CASE("radius zero keeps the parcel edge and endpoints") {
  MdpState s = support::lattice(2, 4);
  s.add_parcel({0, 1.0, {0, 1}, {1, 3}, {}, ParcelStatus::kInTransit});
  s.add_parcel({1, 1.0, {0, 1}, {0, 3}, {}, ParcelStatus::kInTransit});

  FeatureGraph a = extract_feature_graph(s, 0, 0);
  REQUIRE(a.nodes.size() == 2);
  CHECK(a.nodes[0].node == NodeRef{0, 1});
  CHECK(a.nodes[1].node == NodeRef{1, 3});
  REQUIRE(a.edges.size() == 2);
  CHECK(a.edges[0].source == s.parcel(0).edge);
  CHECK(a.edges[1].source == mate_of(s.parcel(0).edge));
  // Actions leave the graph at radius zero.
  CHECK(!a.actions.empty());
  for (int idx : a.action_edges) CHECK(idx == -1);

  // Same hub: a synthetic stay-in-place pair joins the endpoints.
  FeatureGraph b = extract_feature_graph(s, 1, 0);
  REQUIRE(b.edges.size() == 4);
  int synthetic = 0;
  for (const FeatureEdge& e : b.edges) {
    if (e.source != kNoEdge) continue;
    ++synthetic;
    CHECK(e.key < 0);
    CHECK(e.features[kRoutedFlag] == 0.0);
    CHECK(e.features[kActionFlag] == 0.0);
    EdgeRecord proto;
    proto.kind = e.kind;
    auto base = encode_edge_features(proto);
    CHECK(std::equal(base.begin(), base.end(), e.features.begin()));
  }
  CHECK(synthetic == 2);
  CHECK(b.nodes[0].features[1] == 0.0);
  CHECK(b.nodes[1].features[1] == 1.0);
  CHECK(b.nodes[0].features[0] == 0.0);
}

TEST_CASE("feature graphs on generated instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MdpState s = reset(experiment_config(), seed);
    ParcelId pid = select_next(s, RoutingStrategy::kOneStep).parcel;
    auto actions = get_actions(s, pid, false);
    for (int k : {0, 1, 2, 3}) {
      FeatureGraph fg = extract_feature_graph(s, pid, k, actions);
      const ParcelRecord& p = s.parcel(pid);
      CHECK(fg.node_index(p.current) >= 0);
      CHECK(fg.node_index(p.goal) >= 0);
      CHECK(count_flag(fg, kRoutedFlag) == 2);
      if (k >= 1) {
        CHECK(count_flag(fg, kActionFlag) == static_cast<int>(actions.size()));
        for (std::size_t i = 0; i < actions.size(); ++i) {
          REQUIRE(fg.action_edges[i] >= 0);
          CHECK(fg.edges[fg.action_edges[i]].source == actions[i]);
        }
      }
      for (const FeatureEdge& e : fg.edges) {
        for (std::size_t slot : {kRoutedFlag, kActionFlag}) {
          CHECK((e.features[slot] == 0.0 || e.features[slot] == 1.0));
        }
        CHECK(e.features[kPhantomWeight] == 0.0);
        CHECK(e.sender >= 0);
        CHECK(e.receiver >= 0);
      }
      for (std::size_t i = 1; i < fg.edges.size(); ++i) {
        CHECK(fg.edges[i - 1].key < fg.edges[i].key);
      }
      if (k == 2) CHECK(fg.nodes.size() < s.num_nodes());
      CHECK(feature_graph_to_json(fg) ==
            feature_graph_to_json(extract_feature_graph(s, pid, k, actions)));
    }
  }
}

TEST_CASE("large radius feature graphs connect deliverable parcels") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MdpState s = reset(support::fractional_config(12), seed);
    for (const auto& [pid, p] : s.parcels()) {
      if (!parcel_prune(s, p).deliverable) continue;
      FeatureGraph fg = extract_feature_graph(s, pid, s.horizon());
      CHECK(goal_reachable(fg, s));
    }
  }
}

TEST_CASE("phantom weights split evenly over trucks") {
  MdpState s = support::lattice(4, 3);
  std::vector<EdgeId> trucks;
  for (int i = 0; i < 3; ++i) {
    trucks.push_back(s.add_edge_pair({2, 1}, {3, 2}, EdgeKind::kTruckFwd, 1.0, 0.0));
  }
  // Phantom parcel: starts at (2,1) and can only leave by the three trucks.
  s.add_parcel({0, 0.6, {2, 1}, {3, 3}, {}, ParcelStatus::kInTransit});
  // Routed parcel sits where the trucks arrive.
  s.add_parcel({1, 1.0, {3, 2}, {0, 3}, {}, ParcelStatus::kInTransit});

  FeatureGraph plain = extract_feature_graph(s, 1, 1);
  CHECK(plain.edge_index(s.parcel(0).edge) == -1);
  for (EdgeId t : trucks) {
    REQUIRE(plain.edge_index(t) >= 0);
    CHECK(plain.edges[plain.edge_index(t)].features[kPhantomWeight] == 0.0);
  }

  FeatureGraph fg = extract_feature_graph(s, 1, 1, {.phantom_weights = true});
  for (EdgeId t : trucks) {
    for (EdgeId e : {t, mate_of(t)}) {
      REQUIRE(fg.edge_index(e) >= 0);
      CHECK(fg.edges[fg.edge_index(e)].features[kPhantomWeight] ==
            doctest::Approx(0.2).epsilon(1e-12));
    }
  }
  auto w = phantom_weights(s, fg);
  CHECK(w.size() == 3);

  // Without the phantom parcel nothing is attributed.
  s.retire_parcel(0, ParcelStatus::kFailed);
  FeatureGraph alone = extract_feature_graph(s, 1, 1, {.phantom_weights = true});
  CHECK(phantom_weights(s, alone).empty());
  for (const FeatureEdge& e : alone.edges) CHECK(e.features[kPhantomWeight] == 0.0);
}

TEST_CASE("phantom flow is conserved") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    MdpState s = reset(support::fractional_config(12), seed);
    for (const auto& [pid, p] : s.parcels()) {
      ReachSet reach = parcel_prune(s, p);
      auto flow = phantom_flow(s, p, reach);
      if (!reach.deliverable) {
        CHECK(flow.empty());
        continue;
      }
      std::map<NodeRef, double> in, out;
      for (const auto& [id, w] : flow) {
        CHECK(w > 0.0);
        out[s.edge(id).sender] += w;
        in[s.edge(id).receiver] += w;
      }
      CHECK(std::abs(out[p.current] - p.weight) < 1e-9);
      CHECK(std::abs(in[p.goal] - p.weight) < 1e-9);
      for (const auto& [node, w] : in) {
        if (node == p.goal) continue;
        CHECK(std::abs(out[node] - w) < 1e-9);
      }
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("linear features") {
  CHECK(kLinearFeatures == 13);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MdpState s = reset(experiment_config(), seed);
    ParcelId pid = select_next(s, RoutingStrategy::kOneStep).parcel;
    auto actions = get_actions(s, pid, false);
    auto rows = linear_feature_rows(s, pid, actions);
    REQUIRE(rows.size() == actions.size());
    FeatureGraph fg = extract_feature_graph(s, pid, 1, actions);
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const auto& x = rows[i];
      CHECK(x[kActionFlag] == 1.0);
      CHECK(x == linear_features(fg, i));
      const FeatureEdge& fe = fg.edges[fg.action_edges[i]];
      CHECK(std::equal(fe.features.begin(), fe.features.end(), x.begin()));
      const FeatureNode& recv = fg.nodes[fe.receiver];
      CHECK(x[kEdgeFeatures] == recv.features[0]);
      CHECK(x[kEdgeFeatures + 1] == recv.features[1]);
      CHECK(recv.node == s.edge(actions[i]).receiver);
      CHECK(x[kEdgeFeatures] == s.resistance()(recv.node.hub, s.parcel(pid).goal.hub));
      // Alone, the action carries the same features except other actions' flags.
      CHECK(linear_features(s, pid, actions[i]) == x);
      // Edge blocks only see kind and capacity, so unit trucks can tie.
      for (std::size_t j = 0; j < i; ++j) {
        const EdgeRecord& a = s.edge(actions[i]);
        const EdgeRecord& b = s.edge(actions[j]);
        if (a.kind != b.kind || a.capacity != b.capacity) {
          CHECK(!std::equal(x.begin(), x.begin() + kEdgeFeatures, rows[j].begin()));
        }
        if (a.receiver != b.receiver) CHECK(x != rows[j]);
      }
    }
  }
  MdpState s = support::lattice(2, 4);
  s.add_parcel({0, 1.0, {0, 1}, {1, 3}, {}, ParcelStatus::kInTransit});
  FeatureGraph fg = extract_feature_graph(s, 0, 0);
  CHECK_THROWS_AS(linear_features(fg, 0), std::logic_error);
}

TEST_CASE("feature graph JSON") {
  MdpState s = reset(experiment_config(), 3);
  ParcelId pid = select_next(s, RoutingStrategy::kOneStep).parcel;
  FeatureGraph fg = extract_feature_graph(s, pid, 2);
  nlohmann::json doc = feature_graph_to_json(fg);
  CHECK(doc["format"] == "midmile-fg-v1");
  CHECK(doc["K"] == 2);
  CHECK(doc["nodes"].size() == fg.nodes.size());
  CHECK(doc["edges"].size() == fg.edges.size());
  CHECK(doc["edges"][0]["features"].size() == kEdgeFeatures);
  CHECK(doc["actions"].size() == fg.actions.size());
  CHECK(nlohmann::json::parse(doc.dump()) == doc);
}
