#pragma once

#include <array>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "midmile/graph.hpp"
#include "midmile/pruning.hpp"

namespace midmile {

inline constexpr std::size_t kNodeFeatures = 2;
inline constexpr std::size_t kEdgeFeatures = kBaseEdgeFeatures + 3;
inline constexpr std::size_t kLinearFeatures = kEdgeFeatures + kNodeFeatures;

// Feature slots following the 8 base entries.
inline constexpr std::size_t kRoutedFlag = kBaseEdgeFeatures;
inline constexpr std::size_t kActionFlag = kBaseEdgeFeatures + 1;
inline constexpr std::size_t kPhantomWeight = kBaseEdgeFeatures + 2;

// (t - t_s) / (t_g - t_s), or 0 when t_g <= t_s.
double relative_time(int t, int t_start, int t_goal);

struct FeatureNode {
  NodeRef node;
  std::array<double, kNodeFeatures> features{};
};

struct FeatureEdge {
  EdgeId source = kNoEdge;  // state edge, kNoEdge for synthetic links
  // Stable ordering key. Equals `source` for state edges; synthetic links get
  // negative keys derived from their endpoints.
  std::int64_t key = 0;
  int sender = 0;  // index into FeatureGraph::nodes
  int receiver = 0;
  EdgeKind kind = EdgeKind::kVirtualFwd;
  std::array<double, kEdgeFeatures> features{};
};

struct FeatureGraph {
  ParcelId parcel = 0;
  int radius = 0;
  std::vector<FeatureNode> nodes;  // sorted by node
  std::vector<FeatureEdge> edges;  // sorted by key
  std::vector<EdgeId> actions;     // as passed in
  // actions[i] -> index into edges, -1 if the action lies outside the graph
  // (only possible for radius 0).
  std::vector<int> action_edges;

  int node_index(NodeRef node) const;  // -1 if absent
  int edge_index(EdgeId source) const;  // -1 if absent
};

struct FeatureOptions {
  bool phantom_weights = false;
};

// Grows {current, goal} plus the parcel edge pair by `radius` rounds of
// adding every edge incident to the frontier, then links consecutive nodes
// of the same hub that have no virtual edge between them.
FeatureGraph extract_feature_graph(const MdpState& state, ParcelId parcel,
                                   int radius, std::span<const EdgeId> actions,
                                   const FeatureOptions& options = {});
FeatureGraph extract_feature_graph(const MdpState& state, ParcelId parcel,
                                   int radius,
                                   const FeatureOptions& options = {});

// Splits a parcel's weight down its reach set: the current node emits the
// full weight and every node divides its inflow evenly over its outgoing
// reach edges. Keys are forward edge ids.
std::map<EdgeId, double> phantom_flow(const MdpState& state,
                                      const ParcelRecord& parcel,
                                      const ReachSet& reach);

// Summed phantom flow per forward truck edge of `fg`, over every other
// parcel that is not part of `fg` but whose reach set touches its trucks.
std::map<EdgeId, double> phantom_weights(const MdpState& state,
                                         const FeatureGraph& fg);

// Edge features of the action followed by the node features of its
// receiver, read from a radius-1 graph.
std::array<double, kLinearFeatures> linear_features(const FeatureGraph& fg,
                                                    std::size_t action_index);
std::array<double, kLinearFeatures> linear_features(const MdpState& state,
                                                    ParcelId parcel,
                                                    EdgeId action);
// One row per action, in order.
std::vector<std::array<double, kLinearFeatures>> linear_feature_rows(
    const MdpState& state, ParcelId parcel, std::span<const EdgeId> actions);

nlohmann::json feature_graph_to_json(const FeatureGraph& fg);

}  // namespace midmile
