#include "midmile/netgen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace midmile {

void validate(const ExpansionConfig& cfg) {
  if (cfg.num_hubs < 3) throw std::invalid_argument("netgen: H must be >= 3");
  if (cfg.horizon < 2) throw std::invalid_argument("netgen: T must be >= 2");
  if (cfg.effective_trucks_per_step() < 0) {
    throw std::invalid_argument("netgen: trucks_per_step must be >= 0");
  }
  if (cfg.max_duration < 1) {
    throw std::invalid_argument("netgen: max_duration must be >= 1");
  }
  if (!(cfg.beta1 > 0.0) || !std::isfinite(cfg.beta1)) {
    throw std::invalid_argument("netgen: beta1 must be positive");
  }
}

namespace {

// Uniform pick from a non-empty vector.
template <typename T>
const T& choice(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  return items[pick(rng)];
}

bool is_connected(const StaticNetwork& net) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(net.num_hubs));
  for (auto [a, b] : net.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(adj.size(), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  return reached == net.num_hubs;
}

StaticNetwork gen_static_attempt(int num_hubs, std::uint64_t seed,
                                 std::uint64_t attempt, int m, double p,
                                 double q) {
  Rng rng = make_rng(seed, 1 + 7919 * attempt);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::set<int>> adj(static_cast<std::size_t>(num_hubs));
  auto degree = [&adj](int v) { return static_cast<int>(adj[v].size()); };
  std::size_t num_edges = 0;
  auto add_edge = [&](int a, int b) {
    if (adj[a].insert(b).second) {
      adj[b].insert(a);
      ++num_edges;
    }
  };

  int size = m;  // hubs currently in the graph
  std::vector<int> attachment;
  for (int i = 0; i < m; ++i) attachment.push_back(i);

  while (size < num_hubs) {
    double roll = unit(rng);
    int clique_degree = size - 1;
    double clique_size = size * clique_degree / 2.0;

    if (roll < p && static_cast<double>(num_edges) <= clique_size - m) {
      // m new edges between existing hubs.
      std::vector<int> eligible;
      for (int v = 0; v < size; ++v) {
        if (degree(v) < clique_degree) eligible.push_back(v);
      }
      for (int i = 0; i < m && !eligible.empty(); ++i) {
        int src = choice(eligible, rng);
        std::vector<int> candidates;
        for (int v : attachment) {
          if (v != src && adj[src].count(v) == 0) candidates.push_back(v);
        }
        if (candidates.empty()) break;
        int dst = choice(candidates, rng);
        add_edge(src, dst);
        attachment.push_back(src);
        attachment.push_back(dst);
        if (degree(src) == clique_degree) {
          eligible.erase(std::find(eligible.begin(), eligible.end(), src));
        }
        auto it = std::find(eligible.begin(), eligible.end(), dst);
        if (degree(dst) == clique_degree && it != eligible.end()) {
          eligible.erase(it);
        }
      }
    } else if (roll >= p && roll < p + q &&
               static_cast<double>(num_edges) >= m &&
               static_cast<double>(num_edges) < clique_size) {
      // Rewire m edges (unused with the default q = 0).
      std::vector<int> eligible;
      for (int v = 0; v < size; ++v) {
        if (degree(v) > 0 && degree(v) < clique_degree) eligible.push_back(v);
      }
      for (int i = 0; i < m && !eligible.empty(); ++i) {
        int node = choice(eligible, rng);
        std::vector<int> nbrs(adj[node].begin(), adj[node].end());
        int old_nbr = choice(nbrs, rng);
        std::vector<int> candidates;
        for (int v : attachment) {
          if (v != node && adj[node].count(v) == 0) candidates.push_back(v);
        }
        if (candidates.empty()) break;
        int new_nbr = choice(candidates, rng);
        adj[node].erase(old_nbr);
        adj[old_nbr].erase(node);
        --num_edges;
        add_edge(node, new_nbr);
        attachment.erase(std::find(attachment.begin(), attachment.end(),
                                   old_nbr));
        attachment.push_back(new_nbr);
        auto old_it = std::find(eligible.begin(), eligible.end(), old_nbr);
        if (degree(old_nbr) == 0 && old_it != eligible.end()) {
          eligible.erase(old_it);
        }
        auto new_it = std::find(eligible.begin(), eligible.end(), new_nbr);
        if (new_it != eligible.end()) {
          if (degree(new_nbr) == clique_degree) eligible.erase(new_it);
        } else if (degree(new_nbr) == 1) {
          eligible.push_back(new_nbr);
        }
      }
    } else {
      // New hub attached to m distinct preferential targets.
      std::set<int> targets;
      while (static_cast<int>(targets.size()) < m) {
        targets.insert(choice(attachment, rng));
      }
      int fresh = size;
      for (int t : targets) add_edge(fresh, t);
      attachment.insert(attachment.end(), targets.begin(), targets.end());
      for (int i = 0; i < m + 1; ++i) attachment.push_back(fresh);
      ++size;
    }
  }

  std::vector<std::pair<HubId, HubId>> edges;
  for (int a = 0; a < num_hubs; ++a) {
    for (int b : adj[a]) {
      if (a < b) edges.emplace_back(a, b);
    }
  }
  return StaticNetwork(num_hubs, std::move(edges));
}

}  // namespace

StaticNetwork gen_static(int num_hubs, std::uint64_t seed, int m, double p,
                         double q) {
  if (m < 1) throw std::invalid_argument("gen_static: m must be >= 1");
  if (num_hubs < m + 1) {
    throw std::invalid_argument("gen_static: need H >= m + 1 (H=" +
                                std::to_string(num_hubs) + ")");
  }
  if (p < 0.0 || q < 0.0 || p + q >= 1.0) {
    throw std::invalid_argument("gen_static: need p, q >= 0 and p + q < 1");
  }
  // Rewiring can isolate hubs; such draws are rejected and redrawn.
  for (std::uint64_t attempt = 0;; ++attempt) {
    StaticNetwork net = gen_static_attempt(num_hubs, seed, attempt, m, p, q);
    if (is_connected(net)) return net;
    if (attempt > 1000) {
      throw std::invalid_argument("gen_static: cannot draw a connected graph");
    }
  }
}

std::size_t boltzmann_sample(std::span<const double> scores, double beta,
                             Rng& rng) {
  if (scores.empty()) throw std::invalid_argument("boltzmann: no items");
  double top = -INFINITY;
  for (double s : scores) top = std::max(top, beta * s);
  std::vector<double> w(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(beta * scores[i] - top);
  }
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return dist(rng);
}

std::vector<std::size_t> boltzmann_sample_without_replacement(
    std::span<const double> scores, double beta, std::size_t count, Rng& rng) {
  if (count > scores.size()) {
    throw std::invalid_argument("boltzmann: cannot draw " +
                                std::to_string(count) + " of " +
                                std::to_string(scores.size()) + " items");
  }
  std::vector<std::size_t> pool(scores.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  std::vector<std::size_t> out;
  out.reserve(count);
  std::vector<double> remaining;
  while (out.size() < count) {
    remaining.clear();
    for (std::size_t i : pool) remaining.push_back(scores[i]);
    std::size_t k = boltzmann_sample(remaining, beta, rng);
    out.push_back(pool[k]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

MdpState expand(std::shared_ptr<const StaticNetwork> network,
                const ExpansionConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (network->num_hubs != cfg.num_hubs) {
    throw std::invalid_argument("expand: hub count does not match network");
  }
  const auto trucks = static_cast<std::size_t>(cfg.effective_trucks_per_step());
  if (trucks > network->edges.size()) {
    throw std::invalid_argument(
        "expand: trucks_per_step exceeds static edge count (" +
        std::to_string(trucks) + " > " +
        std::to_string(network->edges.size()) + ")");
  }
  Rng rng = make_rng(seed, 2);
  const StaticNetwork& net = *network;
  MdpState state(network, cfg.beta1, cfg.horizon);
  const int horizon = cfg.horizon;

  for (HubId h = 0; h < net.num_hubs; ++h) {
    for (int t = 1; t <= horizon; ++t) state.add_node({h, t});
  }
  for (int t = 1; t < horizon; ++t) {
    for (HubId h = 0; h < net.num_hubs; ++h) {
      state.add_edge_pair({h, t}, {h, t + 1}, EdgeKind::kVirtualFwd, 0.0, 0.0);
    }
  }

  std::vector<double> scores;
  scores.reserve(net.edges.size());
  for (auto [a, b] : net.edges) {
    scores.push_back(static_cast<double>(net.degree[a] + net.degree[b]));
  }
  std::bernoulli_distribution flip(0.5);
  std::uniform_real_distribution<double> capacity(0.0, 1.0);
  for (int t = 1; t < horizon; ++t) {
    auto picks =
        boltzmann_sample_without_replacement(scores, cfg.beta1, trucks, rng);
    const int longest = std::min(cfg.max_duration, horizon - t);
    std::uniform_int_distribution<int> duration(1, longest);
    for (std::size_t k : picks) {
      auto [a, b] = net.edges[k];
      if (flip(rng)) std::swap(a, b);
      int d = duration(rng);
      double cap = cfg.unit_capacity ? 1.0 : capacity(rng);
      state.add_edge_pair({a, t}, {b, t + d}, EdgeKind::kTruckFwd, cap, 0.0);
    }
  }
  return state;
}

}  // namespace midmile
