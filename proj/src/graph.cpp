#include "midmile/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace midmile {

std::string to_string(NodeRef node) {
  std::ostringstream os;
  os << "(" << node.hub << "," << node.time << ")";
  return os.str();
}

bool is_forward(EdgeKind kind) {
  return kind == EdgeKind::kTruckFwd || kind == EdgeKind::kParcelFwd ||
         kind == EdgeKind::kVirtualFwd;
}

bool is_truck(EdgeKind kind) {
  return kind == EdgeKind::kTruckFwd || kind == EdgeKind::kTruckBwd;
}

bool is_parcel(EdgeKind kind) {
  return kind == EdgeKind::kParcelFwd || kind == EdgeKind::kParcelBwd;
}

bool is_virtual(EdgeKind kind) {
  return kind == EdgeKind::kVirtualFwd || kind == EdgeKind::kVirtualBwd;
}

EdgeKind mirror(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::kTruckFwd: return EdgeKind::kTruckBwd;
    case EdgeKind::kTruckBwd: return EdgeKind::kTruckFwd;
    case EdgeKind::kParcelFwd: return EdgeKind::kParcelBwd;
    case EdgeKind::kParcelBwd: return EdgeKind::kParcelFwd;
    case EdgeKind::kVirtualFwd: return EdgeKind::kVirtualBwd;
    case EdgeKind::kVirtualBwd: return EdgeKind::kVirtualFwd;
  }
  return kind;
}

namespace {
constexpr std::array<std::string_view, kNumEdgeKinds> kKindNames = {
    "truck_fwd", "truck_bwd", "parcel_fwd",
    "parcel_bwd", "virtual_fwd", "virtual_bwd"};
constexpr std::array<std::string_view, 3> kStatusNames = {
    "in_transit", "delivered", "failed"};
}  // namespace

std::string_view to_string(EdgeKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}

EdgeKind edge_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<EdgeKind>(i);
  }
  throw std::invalid_argument("unknown edge kind '" + std::string(name) + "'");
}

std::string_view to_string(ParcelStatus status) {
  return kStatusNames[static_cast<std::size_t>(status)];
}

ParcelStatus parcel_status_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kStatusNames.size(); ++i) {
    if (kStatusNames[i] == name) return static_cast<ParcelStatus>(i);
  }
  throw std::invalid_argument("unknown parcel status '" + std::string(name) +
                              "'");
}

StaticNetwork::StaticNetwork(int hubs,
                             std::vector<std::pair<HubId, HubId>> edge_list)
    : num_hubs(hubs), degree(static_cast<std::size_t>(hubs), 0) {
  for (auto [a, b] : edge_list) {
    if (a == b || a < 0 || b < 0 || a >= hubs || b >= hubs) {
      throw std::invalid_argument("static network: bad edge");
    }
    edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("static network: duplicate edge");
  }
  for (auto [a, b] : edges) {
    ++degree[static_cast<std::size_t>(a)];
    ++degree[static_cast<std::size_t>(b)];
  }
}

MdpState::MdpState(std::shared_ptr<const StaticNetwork> network, double beta1,
                   int horizon)
    : network_(std::move(network)), beta1_(beta1), horizon_(horizon) {
  if (!network_ || network_->num_hubs <= 0) {
    throw std::invalid_argument("state needs a non-empty static network");
  }
  if (horizon_ < 1) throw std::invalid_argument("horizon must be >= 1");
  resistance_ = std::make_shared<const ResistanceMatrix>(
      resistance_matrix(*network_, beta1_));
  slots_.resize(static_cast<std::size_t>(network_->num_hubs) *
                static_cast<std::size_t>(horizon_ + 1));
}

void MdpState::add_node(NodeRef node) {
  if (!in_range(node)) {
    throw std::out_of_range("node " + to_string(node) + " outside grid");
  }
  Slot& s = slots_[slot(node)];
  if (!s.present) {
    s.present = true;
    ++num_nodes_;
  }
}

void MdpState::remove_node(NodeRef node) {
  if (!has_node(node)) return;
  Slot& s = slots_[slot(node)];
  std::vector<EdgeId> incident = s.out;
  incident.insert(incident.end(), s.in.begin(), s.in.end());
  for (EdgeId id : incident) {
    if (has_edge(id)) remove_edge_pair(id);
  }
  s.present = false;
  --num_nodes_;
}

std::vector<NodeRef> MdpState::nodes() const {
  std::vector<NodeRef> out;
  out.reserve(num_nodes_);
  for (HubId h = 0; h < num_hubs(); ++h) {
    for (int t = 1; t <= horizon_; ++t) {
      if (slots_[slot({h, t})].present) out.push_back({h, t});
    }
  }
  return out;
}

const EdgeRecord& MdpState::edge(EdgeId id) const {
  if (!has_edge(id)) {
    throw std::out_of_range("edge " + std::to_string(id) + " not in state");
  }
  return edges_[static_cast<std::size_t>(id)];
}

void MdpState::link(const EdgeRecord& record) {
  slots_[slot(record.sender)].out.push_back(record.id);
  slots_[slot(record.receiver)].in.push_back(record.id);
}

void MdpState::unlink(const EdgeRecord& record) {
  auto drop = [](std::vector<EdgeId>& v, EdgeId id) {
    v.erase(std::remove(v.begin(), v.end(), id), v.end());
  };
  drop(slots_[slot(record.sender)].out, record.id);
  drop(slots_[slot(record.receiver)].in, record.id);
}

EdgeId MdpState::add_edge_pair(NodeRef sender, NodeRef receiver,
                               EdgeKind fwd_kind, double capacity,
                               double weight) {
  if (!is_forward(fwd_kind)) {
    throw std::invalid_argument("add_edge_pair expects a forward kind");
  }
  if (!has_node(sender) || !has_node(receiver)) {
    throw std::out_of_range("edge endpoints " + to_string(sender) + " -> " +
                            to_string(receiver) + " not in state");
  }
  EdgeId fwd = next_edge_id();
  if (fwd % 2 != 0) ++fwd;
  EdgeRecord f{fwd, sender, receiver, fwd_kind, capacity, weight};
  EdgeRecord b{fwd + 1, receiver, sender, mirror(fwd_kind), capacity, weight};
  insert_edge(f);
  insert_edge(b);
  return fwd;
}

void MdpState::insert_edge(const EdgeRecord& record) {
  if (record.id < 0) throw std::invalid_argument("negative edge id");
  if (has_edge(record.id)) {
    throw std::invalid_argument("duplicate edge id " +
                                std::to_string(record.id));
  }
  if (!has_node(record.sender) || !has_node(record.receiver)) {
    throw std::out_of_range("edge " + std::to_string(record.id) +
                            " endpoints not in state");
  }
  auto idx = static_cast<std::size_t>(record.id);
  if (idx >= edges_.size()) {
    edges_.resize(idx + 1);
    alive_.resize(idx + 1, 0);
  }
  edges_[idx] = record;
  alive_[idx] = 1;
  ++num_edges_;
  link(record);
}

void MdpState::remove_edge_pair(EdgeId id) {
  for (EdgeId e : {id, mate_of(id)}) {
    if (!has_edge(e)) continue;
    unlink(edges_[static_cast<std::size_t>(e)]);
    alive_[static_cast<std::size_t>(e)] = 0;
    --num_edges_;
  }
}

void MdpState::set_capacity(EdgeId id, double capacity) {
  for (EdgeId e : {id, mate_of(id)}) {
    if (has_edge(e)) edges_[static_cast<std::size_t>(e)].capacity = capacity;
  }
}

std::vector<EdgeId> MdpState::edge_ids() const {
  std::vector<EdgeId> out;
  out.reserve(num_edges_);
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (alive_[i]) out.push_back(static_cast<EdgeId>(i));
  }
  return out;
}

void MdpState::reserve_edge_ids(EdgeId next) {
  if (next > next_edge_id()) {
    edges_.resize(static_cast<std::size_t>(next));
    alive_.resize(static_cast<std::size_t>(next), 0);
  }
}

const ParcelRecord& MdpState::parcel(ParcelId id) const {
  auto it = parcels_.find(id);
  if (it == parcels_.end()) {
    throw std::out_of_range("parcel " + std::to_string(id) + " not live");
  }
  return it->second;
}

ParcelRecord& MdpState::mutable_parcel(ParcelId id) {
  auto it = parcels_.find(id);
  if (it == parcels_.end()) {
    throw std::out_of_range("parcel " + std::to_string(id) + " not live");
  }
  return it->second;
}

void MdpState::add_parcel(ParcelRecord parcel) {
  if (parcels_.count(parcel.id) > 0) {
    throw std::invalid_argument("duplicate parcel id " +
                                std::to_string(parcel.id));
  }
  parcel.status = ParcelStatus::kInTransit;
  parcel.edge = add_edge_pair(parcel.current, parcel.goal,
                              EdgeKind::kParcelFwd, 0.0, parcel.weight);
  parcels_.emplace(parcel.id, std::move(parcel));
}

void MdpState::restore_parcel(ParcelRecord parcel) {
  if (parcels_.count(parcel.id) > 0) {
    throw std::invalid_argument("duplicate parcel id " +
                                std::to_string(parcel.id));
  }
  parcels_.emplace(parcel.id, std::move(parcel));
}

void MdpState::retire_parcel(ParcelId id, ParcelStatus status) {
  auto it = parcels_.find(id);
  if (it == parcels_.end()) return;
  ParcelRecord record = std::move(it->second);
  parcels_.erase(it);
  if (record.edge != kNoEdge) remove_edge_pair(record.edge);
  record.edge = kNoEdge;
  record.status = status;
  finished_.push_back(std::move(record));
}

bool MdpState::operator==(const MdpState& other) const {
  if (horizon_ != other.horizon_ || beta1_ != other.beta1_) return false;
  if ((network_ == nullptr) != (other.network_ == nullptr)) return false;
  if (network_ && !(*network_ == *other.network_)) return false;
  if (nodes() != other.nodes()) return false;
  if (edge_ids() != other.edge_ids()) return false;
  for (EdgeId id : edge_ids()) {
    if (!(edge(id) == other.edge(id))) return false;
  }
  return parcels_ == other.parcels_ && finished_ == other.finished_ &&
         skip_map_ == other.skip_map_;
}

std::vector<EdgeId> expand_edge(const MdpState& state, EdgeId id) {
  EdgeId fwd = forward_id(id);
  auto it = state.skip_map().find(fwd);
  if (it == state.skip_map().end()) return {fwd};
  std::vector<EdgeId> out;
  out.reserve(it->second.size());
  for (const SkipHop& hop : it->second) out.push_back(hop.edge);
  return out;
}

std::vector<EdgeId> expand_route(const MdpState& state,
                                 std::span<const EdgeId> route) {
  std::vector<EdgeId> out;
  for (EdgeId id : route) {
    auto hops = expand_edge(state, id);
    out.insert(out.end(), hops.begin(), hops.end());
  }
  return out;
}

std::array<double, kBaseEdgeFeatures> encode_edge_features(
    const EdgeRecord& edge) {
  std::array<double, kBaseEdgeFeatures> out{};
  out[static_cast<std::size_t>(edge.kind)] = 1.0;
  out[6] = is_truck(edge.kind) ? edge.capacity : 0.0;
  out[7] = is_parcel(edge.kind) ? edge.weight : 0.0;
  return out;
}

std::array<double, 2> encode_node_features(const MdpState& state,
                                           NodeRef node) {
  if (!state.has_node(node)) {
    throw std::out_of_range("node " + to_string(node) + " not in state");
  }
  return {static_cast<double>(node.hub), static_cast<double>(node.time)};
}

std::vector<Violation> validate_state(const MdpState& state) {
  std::vector<Violation> out;
  auto report = [&out](std::string subject, std::string message) {
    out.push_back({std::move(subject), std::move(message)});
  };

  for (EdgeId id : state.edge_ids()) {
    const EdgeRecord& e = state.edge(id);
    std::string subject = "edge " + std::to_string(id);
    if (!state.has_node(e.sender) || !state.has_node(e.receiver)) {
      report(subject, "endpoint missing");
      continue;
    }
    if (is_forward(e.kind) != (id % 2 == 0)) {
      report(subject, "direction does not match id parity");
      continue;
    }
    if (is_forward(e.kind) && e.receiver.time <= e.sender.time) {
      report(subject, "forward edge does not increase time");
    }
    if (!is_truck(e.kind) && e.capacity != 0.0) {
      report(subject, "capacity set on non-truck edge");
    }
    if (!is_parcel(e.kind) && e.weight != 0.0) {
      report(subject, "weight set on non-parcel edge");
    }
    if (is_truck(e.kind) && !(e.capacity >= -kCapacityEps)) {
      report(subject, "negative capacity");
    }
    // Pairing is checked once per pair, from the forward side, and for
    // orphaned backward edges.
    EdgeId mate = mate_of(id);
    if (!state.has_edge(mate)) {
      report(subject, "unpaired edge");
      continue;
    }
    if (is_forward(e.kind)) {
      const EdgeRecord& b = state.edge(mate);
      if (b.kind != mirror(e.kind) || b.sender != e.receiver ||
          b.receiver != e.sender || b.capacity != e.capacity ||
          b.weight != e.weight) {
        report(subject, "mate " + std::to_string(mate) + " does not mirror");
      }
    }
  }

  for (const auto& [pid, p] : state.parcels()) {
    std::string subject = "parcel " + std::to_string(pid);
    if (p.status != ParcelStatus::kInTransit) {
      report(subject, "live parcel not in transit");
    } else if (!state.has_node(p.current)) {
      report(subject, "current node " + to_string(p.current) + " missing");
    } else if (!state.has_node(p.goal)) {
      report(subject, "goal node " + to_string(p.goal) + " missing");
    } else if (p.goal.time < p.current.time) {
      report(subject, "goal earlier than current node");
    } else if (!(p.weight > 0.0 && p.weight <= 1.0)) {
      report(subject, "weight outside (0, 1]");
    } else {
      int own = 0;
      bool stray = false;
      for (EdgeId id : state.out_edges(p.current)) {
        const EdgeRecord& e = state.edge(id);
        if (e.kind != EdgeKind::kParcelFwd) continue;
        if (id == p.edge) {
          ++own;
          if (e.receiver != p.goal || e.weight != p.weight) stray = true;
        }
      }
      if (own != 1 || stray) {
        report(subject, "parcel edge does not connect current to goal");
      }
    }
  }
  return out;
}

}  // namespace midmile
