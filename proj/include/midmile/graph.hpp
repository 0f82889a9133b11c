#pragma once

// Time-expanded logistics state shared by every other module.

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "midmile/resistance.hpp"

namespace midmile {

using HubId = int;
using EdgeId = std::int64_t;
using ParcelId = int;

inline constexpr EdgeId kNoEdge = -1;
// Tolerance used by every capacity comparison.
inline constexpr double kCapacityEps = 1e-12;

struct NodeRef {
  HubId hub = 0;
  int time = 0;

  auto operator<=>(const NodeRef&) const = default;
};

std::string to_string(NodeRef node);

// Orders by time first, then hub.
struct TimeOrder {
  bool operator()(NodeRef a, NodeRef b) const {
    return a.time != b.time ? a.time < b.time : a.hub < b.hub;
  }
};

enum class EdgeKind {
  kTruckFwd,
  kTruckBwd,
  kParcelFwd,
  kParcelBwd,
  kVirtualFwd,
  kVirtualBwd,
};

inline constexpr int kNumEdgeKinds = 6;

bool is_forward(EdgeKind kind);
bool is_truck(EdgeKind kind);
bool is_parcel(EdgeKind kind);
bool is_virtual(EdgeKind kind);
EdgeKind mirror(EdgeKind kind);
std::string_view to_string(EdgeKind kind);
EdgeKind edge_kind_from_string(std::string_view name);

// Edge ids come in pairs: a forward edge has an even id and its backward
// mirror the following odd id.
inline constexpr EdgeId mate_of(EdgeId id) { return id ^ 1; }
inline constexpr EdgeId forward_id(EdgeId id) { return id & ~EdgeId{1}; }

struct EdgeRecord {
  EdgeId id = kNoEdge;
  NodeRef sender;
  NodeRef receiver;
  EdgeKind kind = EdgeKind::kVirtualFwd;
  double capacity = 0.0;  // remaining capacity, trucks only
  double weight = 0.0;    // parcel weight, parcel edges only

  bool operator==(const EdgeRecord&) const = default;
};

enum class ParcelStatus { kInTransit, kDelivered, kFailed };

std::string_view to_string(ParcelStatus status);
ParcelStatus parcel_status_from_string(std::string_view name);

struct ParcelRecord {
  ParcelId id = 0;
  double weight = 0.0;
  NodeRef current;
  NodeRef goal;
  std::vector<EdgeId> route;  // ground-truth route as sampled
  ParcelStatus status = ParcelStatus::kInTransit;
  EdgeId edge = kNoEdge;  // ParcelFwd edge while in transit

  bool operator==(const ParcelRecord&) const = default;
};

// One original hop hidden inside a merged edge.
struct SkipHop {
  EdgeId edge = kNoEdge;
  NodeRef sender;
  NodeRef receiver;
  EdgeKind kind = EdgeKind::kVirtualFwd;
  double capacity = 0.0;

  bool operator==(const SkipHop&) const = default;
};

// Merged forward edge id -> original hops, in time order. Entries are kept
// after the merged edge itself disappears so old routes stay expandable.
using SkipMap = std::map<EdgeId, std::vector<SkipHop>>;

struct StaticNetwork {
  int num_hubs = 0;
  std::vector<std::pair<HubId, HubId>> edges;  // a < b, sorted
  std::vector<int> degree;

  StaticNetwork() = default;
  StaticNetwork(int hubs, std::vector<std::pair<HubId, HubId>> edge_list);

  bool operator==(const StaticNetwork& other) const {
    return num_hubs == other.num_hubs && edges == other.edges;
  }
};

// The MDP state: a time-expanded graph plus the parcels living on it.
// Nodes are (hub, time) pairs with time in [1, horizon].
class MdpState {
 public:
  MdpState() = default;
  MdpState(std::shared_ptr<const StaticNetwork> network, double beta1,
           int horizon);

  int num_hubs() const { return network_ ? network_->num_hubs : 0; }
  int horizon() const { return horizon_; }
  double beta1() const { return beta1_; }
  const StaticNetwork& network() const { return *network_; }
  const ResistanceMatrix& resistance() const { return *resistance_; }
  const std::shared_ptr<const StaticNetwork>& network_ptr() const {
    return network_;
  }

  bool in_range(NodeRef node) const {
    return node.hub >= 0 && node.hub < num_hubs() && node.time >= 1 &&
           node.time <= horizon_;
  }
  bool has_node(NodeRef node) const {
    return in_range(node) && slots_[slot(node)].present;
  }
  void add_node(NodeRef node);
  // Removes the node together with every incident edge pair.
  void remove_node(NodeRef node);
  std::vector<NodeRef> nodes() const;  // sorted by (hub, time)
  std::size_t num_nodes() const { return num_nodes_; }

  bool has_edge(EdgeId id) const {
    return id >= 0 && id < static_cast<EdgeId>(edges_.size()) &&
           alive_[static_cast<std::size_t>(id)];
  }
  const EdgeRecord& edge(EdgeId id) const;
  // Creates a forward edge of `fwd_kind` and its backward mirror; returns the
  // forward id.
  EdgeId add_edge_pair(NodeRef sender, NodeRef receiver, EdgeKind fwd_kind,
                       double capacity, double weight);
  // Inserts a single record with an explicit id (deserialization).
  void insert_edge(const EdgeRecord& record);
  void remove_edge_pair(EdgeId id);
  // Sets the remaining capacity on both edges of a truck pair.
  void set_capacity(EdgeId id, double capacity);
  std::span<const EdgeId> out_edges(NodeRef node) const {
    return slots_[slot(node)].out;
  }
  std::span<const EdgeId> in_edges(NodeRef node) const {
    return slots_[slot(node)].in;
  }
  std::vector<EdgeId> edge_ids() const;  // ascending
  std::size_t num_edges() const { return num_edges_; }
  EdgeId next_edge_id() const { return static_cast<EdgeId>(edges_.size()); }
  void reserve_edge_ids(EdgeId next);

  const std::map<ParcelId, ParcelRecord>& parcels() const { return parcels_; }
  const ParcelRecord& parcel(ParcelId id) const;
  ParcelRecord& mutable_parcel(ParcelId id);
  bool has_parcel(ParcelId id) const { return parcels_.count(id) > 0; }
  // Places an in-transit parcel and its parcel edge pair current -> goal.
  void add_parcel(ParcelRecord parcel);
  // Re-inserts a live parcel whose edge pair is already present.
  void restore_parcel(ParcelRecord parcel);
  // Moves a parcel out of the live set into the episode log.
  void retire_parcel(ParcelId id, ParcelStatus status);
  const std::vector<ParcelRecord>& finished() const { return finished_; }
  void add_finished(ParcelRecord parcel) {
    finished_.push_back(std::move(parcel));
  }

  SkipMap& skip_map() { return skip_map_; }
  const SkipMap& skip_map() const { return skip_map_; }

  bool operator==(const MdpState& other) const;

 private:
  struct Slot {
    bool present = false;
    std::vector<EdgeId> out;
    std::vector<EdgeId> in;
  };

  std::size_t slot(NodeRef node) const {
    return static_cast<std::size_t>(node.hub) *
               static_cast<std::size_t>(horizon_ + 1) +
           static_cast<std::size_t>(node.time);
  }
  void link(const EdgeRecord& record);
  void unlink(const EdgeRecord& record);

  std::shared_ptr<const StaticNetwork> network_;
  std::shared_ptr<const ResistanceMatrix> resistance_;
  double beta1_ = 0.01;
  int horizon_ = 0;
  std::vector<Slot> slots_;
  std::size_t num_nodes_ = 0;
  std::vector<EdgeRecord> edges_;
  std::vector<char> alive_;
  std::size_t num_edges_ = 0;
  std::map<ParcelId, ParcelRecord> parcels_;
  std::vector<ParcelRecord> finished_;
  SkipMap skip_map_;
};

// Original (pre-merge) edge ids behind `id`, in time order.
std::vector<EdgeId> expand_edge(const MdpState& state, EdgeId id);
std::vector<EdgeId> expand_route(const MdpState& state,
                                 std::span<const EdgeId> route);

// ([truck+], [truck-], [parcel+], [parcel-], [virtual+], [virtual-],
//  capacity, weight)
inline constexpr std::size_t kBaseEdgeFeatures = 8;
std::array<double, kBaseEdgeFeatures> encode_edge_features(
    const EdgeRecord& edge);

// (hub, time); throws std::out_of_range if the node is not in the state.
std::array<double, 2> encode_node_features(const MdpState& state, NodeRef node);

struct Violation {
  std::string subject;  // e.g. "edge 12", "parcel 3", "node (1,4)"
  std::string message;
};

std::vector<Violation> validate_state(const MdpState& state);

}  // namespace midmile
