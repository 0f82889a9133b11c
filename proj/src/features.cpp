#include "midmile/features.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "midmile/dynamics.hpp"
#include "midmile/serialize.hpp"

namespace midmile {

double relative_time(int t, int t_start, int t_goal) {
  if (t_goal <= t_start) return 0.0;
  return static_cast<double>(t - t_start) /
         static_cast<double>(t_goal - t_start);
}

int FeatureGraph::node_index(NodeRef node) const {
  auto it = std::lower_bound(
      nodes.begin(), nodes.end(), node,
      [](const FeatureNode& a, NodeRef b) { return a.node < b; });
  if (it == nodes.end() || it->node != node) return -1;
  return static_cast<int>(it - nodes.begin());
}

int FeatureGraph::edge_index(EdgeId source) const {
  if (source < 0) return -1;
  auto it = std::lower_bound(
      edges.begin(), edges.end(), source,
      [](const FeatureEdge& a, std::int64_t k) { return a.key < k; });
  if (it == edges.end() || it->key != source) return -1;
  return static_cast<int>(it - edges.begin());
}

namespace {

std::int64_t synthetic_key(const MdpState& state, NodeRef from, NodeRef to,
                           bool forward) {
  const std::int64_t span = state.horizon() + 1;
  std::int64_t k = (static_cast<std::int64_t>(from.hub) * span + from.time) *
                       span +
                   to.time;
  return -(2 * k + (forward ? 2 : 3));
}

}  // namespace

FeatureGraph extract_feature_graph(const MdpState& state, ParcelId parcel,
                                   int radius,
                                   const FeatureOptions& options) {
  std::vector<EdgeId> actions = get_actions(state, parcel, false);
  return extract_feature_graph(state, parcel, radius, actions, options);
}

FeatureGraph extract_feature_graph(const MdpState& state, ParcelId parcel,
                                   int radius, std::span<const EdgeId> actions,
                                   const FeatureOptions& options) {
  if (radius < 0) throw std::invalid_argument("feature graph radius < 0");
  const ParcelRecord& p = state.parcel(parcel);

  std::set<NodeRef> nodes{p.current, p.goal};
  std::set<EdgeId> edges;
  if (p.edge != kNoEdge) {
    edges.insert(p.edge);
    edges.insert(mate_of(p.edge));
  }
  std::vector<NodeRef> frontier(nodes.begin(), nodes.end());
  for (int round = 0; round < radius && !frontier.empty(); ++round) {
    std::vector<NodeRef> next;
    for (NodeRef n : frontier) {
      for (auto ids : {state.out_edges(n), state.in_edges(n)}) {
        for (EdgeId id : ids) {
          edges.insert(id);
          NodeRef other = state.edge(id).sender == n ? state.edge(id).receiver
                                                     : state.edge(id).sender;
          if (nodes.insert(other).second) next.push_back(other);
        }
      }
    }
    frontier = std::move(next);
  }

  FeatureGraph fg;
  fg.parcel = parcel;
  fg.radius = radius;
  fg.actions.assign(actions.begin(), actions.end());
  const ResistanceMatrix& r = state.resistance();
  for (NodeRef n : nodes) {
    FeatureNode fn;
    fn.node = n;
    fn.features = {r(n.hub, p.goal.hub),
                   relative_time(n.time, p.current.time, p.goal.time)};
    fg.nodes.push_back(fn);
  }

  std::set<std::pair<NodeRef, NodeRef>> virtual_links;
  for (EdgeId id : edges) {
    const EdgeRecord& e = state.edge(id);
    FeatureEdge fe;
    fe.source = id;
    fe.key = id;
    fe.sender = fg.node_index(e.sender);
    fe.receiver = fg.node_index(e.receiver);
    fe.kind = e.kind;
    auto base = encode_edge_features(e);
    std::copy(base.begin(), base.end(), fe.features.begin());
    if (id == p.edge || id == mate_of(p.edge)) fe.features[kRoutedFlag] = 1.0;
    fg.edges.push_back(fe);
    if (e.kind == EdgeKind::kVirtualFwd) {
      virtual_links.insert({e.sender, e.receiver});
    }
  }

  // Reconnect same-hub nodes whose stay-in-place edges were pruned or lie
  // outside the radius.
  std::vector<FeatureEdge> synthetic;
  for (std::size_t i = 0; i + 1 < fg.nodes.size(); ++i) {
    NodeRef a = fg.nodes[i].node;
    NodeRef b = fg.nodes[i + 1].node;
    if (a.hub != b.hub || virtual_links.count({a, b}) > 0) continue;
    for (bool forward : {true, false}) {
      FeatureEdge fe;
      fe.key = synthetic_key(state, a, b, forward);
      fe.sender = static_cast<int>(forward ? i : i + 1);
      fe.receiver = static_cast<int>(forward ? i + 1 : i);
      fe.kind = forward ? EdgeKind::kVirtualFwd : EdgeKind::kVirtualBwd;
      EdgeRecord proto;
      proto.kind = fe.kind;
      auto base = encode_edge_features(proto);
      std::copy(base.begin(), base.end(), fe.features.begin());
      synthetic.push_back(fe);
    }
  }
  fg.edges.insert(fg.edges.begin(), synthetic.begin(), synthetic.end());
  std::sort(fg.edges.begin(), fg.edges.end(),
            [](const FeatureEdge& a, const FeatureEdge& b) {
              return a.key < b.key;
            });

  for (EdgeId a : fg.actions) {
    int idx = fg.edge_index(a);
    fg.action_edges.push_back(idx);
    if (idx >= 0) fg.edges[static_cast<std::size_t>(idx)].features[kActionFlag] = 1.0;
  }

  if (options.phantom_weights) {
    for (const auto& [id, w] : phantom_weights(state, fg)) {
      for (EdgeId e : {id, mate_of(id)}) {
        int idx = fg.edge_index(e);
        if (idx >= 0) fg.edges[static_cast<std::size_t>(idx)].features[kPhantomWeight] = w;
      }
    }
  }
  return fg;
}

std::map<EdgeId, double> phantom_flow(const MdpState& state,
                                      const ParcelRecord& parcel,
                                      const ReachSet& reach) {
  std::map<EdgeId, double> flow;
  if (!reach.deliverable) return flow;
  std::map<NodeRef, double, TimeOrder> inflow;
  inflow[parcel.current] = parcel.weight;
  while (!inflow.empty()) {
    auto [node, w] = *inflow.begin();
    inflow.erase(inflow.begin());
    if (node == parcel.goal) continue;
    std::vector<EdgeId> outs;
    for (EdgeId id : state.out_edges(node)) {
      const EdgeRecord& e = state.edge(id);
      if ((e.kind == EdgeKind::kTruckFwd || e.kind == EdgeKind::kVirtualFwd) &&
          reach.contains(id)) {
        outs.push_back(id);
      }
    }
    if (outs.empty()) continue;
    const double share = w / static_cast<double>(outs.size());
    for (EdgeId id : outs) {
      flow[id] += share;
      inflow[state.edge(id).receiver] += share;
    }
  }
  return flow;
}

std::map<EdgeId, double> phantom_weights(const MdpState& state,
                                         const FeatureGraph& fg) {
  std::set<EdgeId> trucks;
  for (const FeatureEdge& fe : fg.edges) {
    if (fe.kind == EdgeKind::kTruckFwd) trucks.insert(fe.source);
  }
  std::map<EdgeId, double> total;
  for (const auto& [id, p] : state.parcels()) {
    if (id == fg.parcel) continue;
    if (p.edge != kNoEdge && fg.edge_index(p.edge) >= 0) continue;
    ReachSet reach = parcel_prune(state, p);
    bool touches = std::any_of(trucks.begin(), trucks.end(),
                               [&](EdgeId t) { return reach.contains(t); });
    if (!touches) continue;
    for (const auto& [e, w] : phantom_flow(state, p, reach)) {
      if (trucks.count(e) > 0) total[e] += w;
    }
  }
  return total;
}

std::array<double, kLinearFeatures> linear_features(const FeatureGraph& fg,
                                                    std::size_t action_index) {
  if (action_index >= fg.action_edges.size() ||
      fg.action_edges[action_index] < 0) {
    throw std::logic_error("linear_features: action outside feature graph");
  }
  const FeatureEdge& fe =
      fg.edges[static_cast<std::size_t>(fg.action_edges[action_index])];
  const FeatureNode& recv = fg.nodes[static_cast<std::size_t>(fe.receiver)];
  std::array<double, kLinearFeatures> x{};
  std::copy(fe.features.begin(), fe.features.end(), x.begin());
  std::copy(recv.features.begin(), recv.features.end(),
            x.begin() + kEdgeFeatures);
  return x;
}

std::array<double, kLinearFeatures> linear_features(const MdpState& state,
                                                    ParcelId parcel,
                                                    EdgeId action) {
  const EdgeId single[] = {action};
  FeatureGraph fg = extract_feature_graph(state, parcel, 1, single);
  return linear_features(fg, 0);
}

std::vector<std::array<double, kLinearFeatures>> linear_feature_rows(
    const MdpState& state, ParcelId parcel, std::span<const EdgeId> actions) {
  FeatureGraph fg = extract_feature_graph(state, parcel, 1, actions);
  std::vector<std::array<double, kLinearFeatures>> rows;
  rows.reserve(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    rows.push_back(linear_features(fg, i));
  }
  return rows;
}

nlohmann::json feature_graph_to_json(const FeatureGraph& fg) {
  using nlohmann::json;
  json doc;
  doc["format"] = "midmile-fg-v1";
  doc["parcel"] = fg.parcel;
  doc["K"] = fg.radius;
  json nodes = json::array();
  for (const FeatureNode& n : fg.nodes) {
    nodes.push_back(json{{"node", node_to_json(n.node)},
                         {"features", n.features}});
  }
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const FeatureEdge& e : fg.edges) {
    edges.push_back(
        json{{"id", e.source == kNoEdge ? json(nullptr) : json(e.source)},
             {"key", e.key},
             {"kind", to_string(e.kind)},
             {"sender", node_to_json(fg.nodes[static_cast<std::size_t>(e.sender)].node)},
             {"receiver", node_to_json(fg.nodes[static_cast<std::size_t>(e.receiver)].node)},
             {"features", e.features}});
  }
  doc["edges"] = std::move(edges);
  doc["actions"] = fg.actions;
  doc["action_edges"] = fg.action_edges;
  return doc;
}

}  // namespace midmile
