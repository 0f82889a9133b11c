#include <doctest.h>

#include <algorithm>

#include "support.hpp"

using namespace midmile;

namespace {

double truncated_pareto_cdf(double w, const ParcelGenConfig& c) {
  const double a = c.pareto_shape, m = c.pareto_scale, top = c.max_weight;
  return (1.0 - std::pow(m / w, a)) / (1.0 - std::pow(m / top, a));
}

MdpState expanded(int hubs, int horizon, std::uint64_t seed,
                  bool unit = true) {
  auto net = std::make_shared<StaticNetwork>(gen_static(hubs, seed));
  ExpansionConfig cfg;
  cfg.num_hubs = hubs;
  cfg.horizon = horizon;
  cfg.unit_capacity = unit;
  return expand(net, cfg, derive_seed(seed, 2));
}

// Stage 1-3 state of the default pipeline, before parcels are placed.
MdpState pipeline_state(std::uint64_t seed) {
  EnvConfig cfg = experiment_config();
  ExpansionConfig ncfg = cfg.netgen;
  ncfg.unit_capacity = true;
  auto net = std::make_shared<StaticNetwork>(gen_static(10, derive_seed(seed, 1)));
  MdpState s = expand(net, ncfg, derive_seed(seed, 2));
  skip_prune(s);
  return s;
}

// Exact probability that one route attempt, from the start distribution,
// ends at its start hub. Mass is pushed down the time-expanded graph: each
// node splits its mass over feasible forward edges by the Boltzmann rule,
// and a hop of duration l stops with probability 1 - (1 - 1/L)^l.
double retry_probability(const MdpState& s, const ParcelGenConfig& cfg,
                         double weight) {
  const int last = s.horizon() - cfg.mean_route_length;
  std::vector<std::pair<HubId, std::vector<int>>> starts;
  std::vector<double> hub_p;
  for (HubId h = 0; h < s.num_hubs(); ++h) {
    std::vector<int> ts;
    for (int t = 1; t <= last; ++t) {
      if (s.has_node({h, t})) ts.push_back(t);
    }
    if (ts.empty()) continue;
    starts.push_back({h, ts});
    hub_p.push_back(std::exp(-cfg.beta2 * s.network().degree[h]));
  }
  double z = 0;
  for (double p : hub_p) z += p;
  const double keep = 1.0 - 1.0 / cfg.mean_route_length;
  double retry = 0;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const HubId h = starts[k].first;
    for (int t0 : starts[k].second) {
      std::map<NodeRef, double, TimeOrder> mass;
      mass[{h, t0}] = hub_p[k] / z / starts[k].second.size();
      while (!mass.empty()) {
        auto [u, m] = *mass.begin();
        mass.erase(mass.begin());
        std::vector<const EdgeRecord*> opts;
        for (EdgeId id : s.out_edges(u)) {
          const EdgeRecord& e = s.edge(id);
          if (e.kind == EdgeKind::kVirtualFwd ||
              (e.kind == EdgeKind::kTruckFwd && e.capacity >= weight - kCapacityEps)) {
            opts.push_back(&e);
          }
        }
        if (opts.empty()) {
          if (u.hub == h) retry += m;
          continue;
        }
        double zz = 0;
        for (auto* e : opts) zz += std::exp(cfg.beta3 * s.resistance()(h, e->receiver.hub));
        for (auto* e : opts) {
          double p = m * std::exp(cfg.beta3 * s.resistance()(h, e->receiver.hub)) / zz;
          double stop = 1.0 - std::pow(keep, e->receiver.time - e->sender.time);
          if (e->receiver.hub == h) retry += p * stop;
          mass[e->receiver] += p * (1.0 - stop);
        }
      }
    }
  }
  return retry;
}

}  // namespace

TEST_CASE("weights follow the truncated Pareto law") {
  ParcelGenConfig cfg;
  Rng rng = make_rng(11);
  const int n = 100000;
  std::vector<double> w(n);
  for (double& x : w) x = sample_weight(cfg, rng);
  CHECK(*std::min_element(w.begin(), w.end()) >= cfg.pareto_scale);
  CHECK(*std::max_element(w.begin(), w.end()) <= cfg.max_weight);
  std::sort(w.begin(), w.end());
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    double f = truncated_pareto_cdf(w[i], cfg);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n),
                   std::abs(f - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.01);

  cfg.unit_weight = true;
  for (int i = 0; i < 100; ++i) CHECK(sample_weight(cfg, rng) == 1.0);
}

TEST_CASE("start hubs favour minor hubs") {
  // Star: hub 0 has degree 5, the leaves degree 1.
  auto net = std::make_shared<StaticNetwork>(
      6, std::vector<std::pair<HubId, HubId>>{{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
  MdpState s(net, 0.01, 30);
  for (int h = 0; h < 6; ++h) {
    for (int t = 1; t <= 30; ++t) s.add_node({h, t});
  }
  ParcelGenConfig cfg;
  Rng rng = make_rng(5);
  int hub0 = 0, hub1 = 0;
  for (int i = 0; i < 60000; ++i) {
    NodeRef n = sample_start(s, cfg, rng);
    CHECK(n.time >= 1);
    CHECK(n.time <= 30 - cfg.mean_route_length);
    hub0 += n.hub == 0;
    hub1 += n.hub == 1;
  }
  const double expect = std::exp(-0.1) / (std::exp(-0.1) + std::exp(-0.5));
  const int pair = hub0 + hub1;
  double p = static_cast<double>(hub1) / pair;
  CHECK(std::abs(p - expect) < 4 * std::sqrt(expect * (1 - expect) / pair));

  cfg.beta2 = 0.0;
  std::vector<int> counts(6, 0);
  for (int i = 0; i < 30000; ++i) ++counts[sample_start(s, cfg, rng).hub];
  double chi = 0;
  for (int c : counts) chi += std::pow(c - 5000.0, 2) / 5000.0;
  CHECK(chi < 20.52);  // 5 dof, p = 0.001
}

TEST_CASE("sample_start skips hubs without early nodes") {
  MdpState s = support::lattice(2, 12);
  for (int t = 1; t <= 12; ++t) s.remove_node({0, t});
  ParcelGenConfig cfg;
  cfg.mean_route_length = 4;
  Rng rng = make_rng(1);
  for (int i = 0; i < 100; ++i) CHECK(sample_start(s, cfg, rng).hub == 1);
  for (int t = 1; t <= 12; ++t) s.remove_node({1, t});
  CHECK_THROWS_AS(sample_start(s, cfg, rng), std::runtime_error);
}

TEST_CASE("route termination after a unit-duration hop") {
  // Only virtual hops, all of duration one: the walk stops after the first
  // hop with probability 1/L.
  MdpState s = support::lattice(1, 60);
  ParcelGenConfig cfg;
  cfg.mean_route_length = 10;
  Rng rng = make_rng(3);
  const int n = 10000;
  int one = 0;
  for (int i = 0; i < n; ++i) {
    ShadowCapacities shadow = shadow_from_state(s);
    SampledRoute r = sample_route(s, 0.5, {0, 1}, cfg, shadow, rng);
    REQUIRE(!r.edges.empty());
    one += r.edges.size() == 1;
  }
  double p = static_cast<double>(one) / n;
  CHECK(std::abs(p - 0.1) < 4 * std::sqrt(0.09 / n));
}

TEST_CASE("routes respect shadow capacities") {
  MdpState s = expanded(10, 50, 21, false);
  ParcelGenConfig cfg;
  Rng rng = make_rng(4);
  ShadowCapacities shadow = shadow_from_state(s);
  for (int i = 0; i < 10000; ++i) {
    double w = sample_weight(cfg, rng);
    NodeRef start = sample_start(s, cfg, rng);
    ShadowCapacities before = shadow;
    SampledRoute r = sample_route(s, w, start, cfg, shadow, rng);
    NodeRef at = start;
    for (EdgeId id : r.edges) {
      const EdgeRecord& e = s.edge(id);
      CHECK(e.sender == at);
      at = e.receiver;
      if (is_truck(e.kind)) {
        CHECK(before.at(id) >= w - kCapacityEps);
        if (!r.retry) CHECK(shadow.at(id) == doctest::Approx(before.at(id) - w));
      }
    }
    CHECK(at == r.goal);
    if (r.retry) {
      CHECK(r.goal.hub == start.hub);
      CHECK(shadow == before);
    }
  }
  for (const auto& [id, c] : shadow) CHECK(c >= -kCapacityEps);
}

TEST_CASE("mean route duration matches L") {
  MdpState s = expanded(10, 200, 8);
  ParcelGenConfig cfg;
  cfg.mean_route_length = 10;
  Rng rng = make_rng(6);
  double total = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    ShadowCapacities shadow = shadow_from_state(s);
    NodeRef start = sample_start(s, cfg, rng);
    SampledRoute r = sample_route(s, 1.0, start, cfg, shadow, rng);
    total += r.goal.time - start.time;
  }
  double mean = total / n;
  CHECK(mean >= 9.0);
  CHECK(mean <= 11.0);
}

TEST_CASE("populate places jointly feasible parcels") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    MdpState base = expanded(10, 50, seed, false);
    ParcelGenConfig cfg;
    PopulateStats stats;
    MdpState s = populate(base, cfg, seed, &stats);
    CHECK(validate_state(s).empty());
    CHECK(s.parcels().size() == 200u);
    std::map<EdgeId, double> load;
    double prev = 2.0;
    for (const auto& [id, p] : s.parcels()) {
      CHECK(p.weight > 0.0);
      CHECK(p.weight <= 1.0);
      if (stats.retries == 0) CHECK(p.weight <= prev);
      prev = p.weight;
      if (p.goal.hub != p.current.hub) CHECK(p.goal.time > p.current.time);
      CHECK(p.goal.time >= p.current.time);
      for (EdgeId e : p.route) {
        if (is_truck(s.edge(e).kind)) load[e] += p.weight;
      }
    }
    // Shadow conservation: route loads never exceed the truck's capacity.
    for (const auto& [e, l] : load) {
      CHECK(l <= s.edge(e).capacity + 1e-9);
    }
    CHECK(populate(base, cfg, seed) == s);
  }
}

TEST_CASE("route attempts end at the start hub as often as the exact model predicts") {
  MdpState s = pipeline_state(0);
  ParcelGenConfig cfg;
  cfg.unit_weight = true;
  const double expect = retry_probability(s, cfg, 1.0);
  Rng rng = make_rng(17);
  const int n = 20000;
  int retries = 0;
  for (int i = 0; i < n; ++i) {
    ShadowCapacities shadow = shadow_from_state(s);
    NodeRef start = sample_start(s, cfg, rng);
    retries += sample_route(s, 1.0, start, cfg, shadow, rng).retry;
  }
  double p = static_cast<double>(retries) / n;
  CHECK(std::abs(p - expect) < 4 * std::sqrt(expect * (1 - expect) / n));
}

TEST_CASE("single-parcel retry rate at the default config") {
  // Count of seeds whose only parcel needed a weight reduction, against the
  // Poisson-binomial law given by the exact per-seed retry probabilities.
  ParcelGenConfig cfg;
  cfg.unit_weight = true;
  cfg.num_parcels = 1;
  double mean = 0, var = 0;
  int retried = 0;
  const int seeds = 100;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    MdpState base = pipeline_state(seed);
    double p = retry_probability(base, cfg, 1.0);
    mean += p;
    var += p * (1 - p);
    PopulateStats stats;
    populate(base, cfg, derive_seed(seed, 4), &stats);
    retried += stats.retries > 0;
  }
  MESSAGE("retried " << retried << " of " << seeds << ", expected " << mean);
  CHECK(std::abs(retried - mean) < 4 * std::sqrt(var));
}

TEST_CASE("commit_route decrements trucks only") {
  MdpState s = support::lattice(2, 4);
  EdgeId t = s.add_edge_pair({0, 1}, {1, 3}, EdgeKind::kTruckFwd, 0.8, 0.0);
  ShadowCapacities shadow = shadow_from_state(s);
  CHECK(shadow.at(t) == 0.8);
  EdgeId v = kNoEdge;
  for (EdgeId id : s.out_edges({1, 3})) {
    if (s.edge(id).kind == EdgeKind::kVirtualFwd) v = id;
  }
  commit_route(s, {t, v}, 0.3, shadow);
  CHECK(shadow.at(t) == doctest::Approx(0.5));
}
