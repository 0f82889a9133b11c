#include <doctest.h>

#include "midmile/serialize.hpp"
#include "support.hpp"

using namespace midmile;

namespace {

// Expanded and populated, but never pruned.
MdpState unpruned(const EnvConfig& cfg, std::uint64_t seed) {
  ExpansionConfig ncfg = cfg.netgen;
  ParcelGenConfig pcfg = cfg.parcelgen;
  ncfg.unit_capacity = cfg.unit_mode;
  pcfg.unit_weight = cfg.unit_mode;
  auto net = std::make_shared<StaticNetwork>(
      gen_static(ncfg.num_hubs, derive_seed(seed, 1)));
  MdpState s = expand(net, ncfg, derive_seed(seed, 2));
  return populate(std::move(s), pcfg, derive_seed(seed, 4));
}

EdgeId forward_between(const MdpState& s, NodeRef a, NodeRef b) {
  for (EdgeId id : s.out_edges(a)) {
    const EdgeRecord& e = s.edge(id);
    if (is_forward(e.kind) && !is_parcel(e.kind) && e.receiver == b) return id;
  }
  return kNoEdge;
}

}  // namespace

TEST_CASE("skip prune merges a virtual chain") {
  MdpState s = support::lattice(1, 3);
  SkipMap delta = skip_prune(s);
  CHECK(!s.has_node({0, 2}));
  EdgeId merged = forward_between(s, {0, 1}, {0, 3});
  REQUIRE(merged != kNoEdge);
  CHECK(s.edge(merged).kind == EdgeKind::kVirtualFwd);
  CHECK(delta.count(merged) == 1);
  CHECK(expand_edge(s, merged).size() == 2);
  CHECK(validate_state(s).empty());
}

TEST_CASE("merged trucks take the smallest truck capacity") {
  auto net = std::make_shared<StaticNetwork>(
      3, std::vector<std::pair<HubId, HubId>>{{0, 1}, {1, 2}});
  MdpState s(net, 0.01, 4);
  for (NodeRef n : {NodeRef{0, 1}, NodeRef{1, 2}, NodeRef{1, 3}, NodeRef{2, 4}}) {
    s.add_node(n);
  }
  EdgeId a = s.add_edge_pair({0, 1}, {1, 2}, EdgeKind::kTruckFwd, 0.3, 0.0);
  EdgeId b = s.add_edge_pair({1, 2}, {1, 3}, EdgeKind::kVirtualFwd, 0.0, 0.0);
  EdgeId c = s.add_edge_pair({1, 3}, {2, 4}, EdgeKind::kTruckFwd, 0.7, 0.0);

  SUBCASE("chain collapses") {
    skip_prune(s);
    CHECK(s.num_nodes() == 2);
    EdgeId m = forward_between(s, {0, 1}, {2, 4});
    REQUIRE(m != kNoEdge);
    CHECK(s.edge(m).kind == EdgeKind::kTruckFwd);
    CHECK(s.edge(m).capacity == 0.3);
    CHECK(expand_edge(s, m) == std::vector<EdgeId>{a, b, c});
  }
  SUBCASE("a parcel goal is kept") {
    s.add_parcel({0, 0.2, {0, 1}, {1, 2}, {a}, ParcelStatus::kInTransit});
    skip_prune(s);
    CHECK(s.has_node({1, 2}));
    CHECK(!s.has_node({1, 3}));
    EdgeId m = forward_between(s, {1, 2}, {2, 4});
    REQUIRE(m != kNoEdge);
    CHECK(s.edge(m).capacity == 0.7);
  }
}

TEST_CASE("skip prune composes merged hops") {
  MdpState s = support::lattice(1, 6);
  s.add_parcel({0, 1.0, {0, 1}, {0, 3}, {}, ParcelStatus::kInTransit});
  skip_prune(s);
  CHECK(s.has_node({0, 3}));
  // Releasing the goal makes (0,3) skippable; the new merged edge expands
  // all the way to original hops.
  s.retire_parcel(0, ParcelStatus::kDelivered);
  skip_prune(s);
  EdgeId m = forward_between(s, {0, 1}, {0, 6});
  REQUIRE(m != kNoEdge);
  CHECK(expand_edge(s, m).size() == 5);
}

TEST_CASE("skip prune is a fixpoint on generated states") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MdpState s = reset(experiment_config(), seed);
    MdpState again = s;
    SkipMap delta = skip_prune(again);
    CHECK(delta.empty());
    CHECK(serialize_state(again) == serialize_state(s));
    prune_all(again);
    CHECK(serialize_state(again) == serialize_state(s));
  }
}

TEST_CASE("parcel reach sets match exhaustive path enumeration") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    EnvConfig cfg = support::fractional_config(15);
    MdpState s = unpruned(cfg, seed);
    REQUIRE(s.num_nodes() <= 200);
    // Consume some capacity so weights matter.
    for (EdgeId id : s.edge_ids()) {
      const EdgeRecord& e = s.edge(id);
      if (e.kind == EdgeKind::kTruckFwd && id % 3 == 0) s.set_capacity(id, 0.05);
    }
    for (const auto& [pid, p] : s.parcels()) {
      ReachSet r = parcel_prune(s, p);
      support::PathOracle o = support::enumerate_paths(s, p);
      CHECK(r.deliverable == o.deliverable);
      if (!o.deliverable) continue;
      CHECK(std::vector<NodeRef>(o.nodes.begin(), o.nodes.end()) == r.nodes);
      std::set<EdgeId> fwd;
      for (EdgeId id : r.edges) {
        const EdgeRecord& e = s.edge(id);
        if (is_forward(e.kind) && !is_parcel(e.kind)) fwd.insert(id);
        CHECK(r.contains(e.sender));
        CHECK(r.contains(e.receiver));
        CHECK(r.contains(mate_of(id)));
      }
      CHECK(fwd == o.edges);
      CHECK(r.contains(p.current));
      CHECK(r.contains(p.goal));
    }
  }
}

TEST_CASE("reach set of a one-hop parcel") {
  MdpState s = support::lattice(2, 4);
  s.add_parcel({3, 1.0, {0, 2}, {0, 3}, {}, ParcelStatus::kInTransit});
  ReachSet r = parcel_prune(s, 3);
  CHECK(r.deliverable);
  CHECK(r.nodes == std::vector<NodeRef>{{0, 2}, {0, 3}});
  EdgeId v = forward_between(s, {0, 2}, {0, 3});
  const EdgeId pe = s.parcel(3).edge;
  std::vector<EdgeId> expect{v, mate_of(v), pe, mate_of(pe)};
  std::sort(expect.begin(), expect.end());
  CHECK(r.edges == expect);
}

TEST_CASE("undeliverable parcels get the trivial reach set") {
  MdpState s = support::lattice(2, 4);
  s.add_parcel({0, 1.0, {0, 1}, {1, 4}, {}, ParcelStatus::kInTransit});
  ReachSet r = parcel_prune(s, 0);
  CHECK(!r.deliverable);
  CHECK(r.nodes == std::vector<NodeRef>{{0, 1}, {1, 4}});
  s.add_parcel({1, 1.0, {1, 2}, {1, 2}, {}, ParcelStatus::kInTransit});
  CHECK(parcel_prune(s, 1).nodes == std::vector<NodeRef>{{1, 2}});
}

TEST_CASE("prune_all keeps only what parcels can use") {
  SUBCASE("no parcels leaves an empty graph") {
    EnvConfig cfg = support::small_config(10, 20, 0, 5, 10);
    MdpState s = unpruned(cfg, 1);
    prune_all(s);
    CHECK(s.num_nodes() == 0);
    CHECK(s.num_edges() == 0);
  }
  SUBCASE("node count strictly decreases") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      EnvConfig cfg = support::small_config(10, 20, 50, 5, 10);
      MdpState s = unpruned(cfg, seed);
      const std::size_t before = s.num_nodes();
      prune_all(s);
      CHECK(s.num_nodes() < before);
      CHECK(validate_state(s).empty());
      for (const auto& [id, p] : s.parcels()) {
        CHECK(s.has_node(p.current));
        CHECK(s.has_node(p.goal));
      }
    }
  }
}

TEST_CASE("route replay survives every pruning stage") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (bool unit : {true, false}) {
      EnvConfig cfg = experiment_config();
      cfg.unit_mode = unit;
      MdpState raw = unpruned(cfg, seed);
      const int n = static_cast<int>(raw.parcels().size());
      CHECK(support::replay(raw, cfg).delivered == n);

      MdpState skipped = raw;
      skip_prune(skipped);
      CHECK(support::replay(skipped, cfg).delivered == n);

      MdpState pruned = skipped;
      prune_all(pruned);
      CHECK(support::replay(pruned, cfg).delivered == n);
      if (seed >= 2) continue;  // step pruning dominates the runtime

      EnvConfig stepping = cfg;
      stepping.prune_on_step = true;
      EpisodeStats st = support::replay(pruned, stepping);
      CHECK(st.delivered == n);
      CHECK(st.min_capacity >= -kCapacityEps);
    }
  }
}

TEST_CASE("step prune equals pruning from scratch") {
  int steps = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EnvConfig cfg = support::tiny_config();
    MdpState s = reset(cfg, seed);
    Rng rng = make_rng(seed, 77);
    std::size_t prev_nodes = s.num_nodes();
    while (!s.parcels().empty()) {
      Selection sel = select_next(s, cfg.strategy);
      const NodeRef vacated = s.parcel(sel.parcel).current;
      auto actions = get_actions(s, sel.parcel, false);
      if (actions.empty()) {
        fail_parcel(s, sel.parcel);
      } else {
        step(s, sel.parcel, actions[rng() % actions.size()]);
      }
      MdpState scratch = s;
      prune_all(scratch);
      step_prune(s, vacated);
      CHECK(support::content(s) == support::content(scratch));
      CHECK(s.num_nodes() <= prev_nodes);
      prev_nodes = s.num_nodes();
      ++steps;
    }
  }
  CHECK(steps > 20);
}

TEST_CASE("step prune keeps a vacated node another parcel needs") {
  MdpState s = support::lattice(1, 4);
  s.add_parcel({0, 1.0, {0, 1}, {0, 3}, {}, ParcelStatus::kInTransit});
  s.add_parcel({1, 1.0, {0, 2}, {0, 4}, {}, ParcelStatus::kInTransit});
  prune_all(s);
  const std::string before = serialize_state(s);
  // Node (0,2) hosts parcel 1, so pruning from it must change nothing.
  step_prune(s, {0, 2});
  CHECK(serialize_state(s) == before);
}
