#include "midmile/serialize.hpp"

#include <memory>
#include <set>

namespace midmile {

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& key,
                    const std::string& field) {
  if (!obj.is_object()) throw ParseError(field + ": expected object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(field + "." + key + ": missing");
  return *it;
}

template <typename T>
T get_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ParseError(field + ": wrong type");
  }
}

json hop_to_json(const SkipHop& hop) {
  return json{{"edge", hop.edge},
              {"kind", std::string(to_string(hop.kind))},
              {"sender", node_to_json(hop.sender)},
              {"receiver", node_to_json(hop.receiver)},
              {"capacity", hop.capacity}};
}

json parcel_to_json(const ParcelRecord& p) {
  return json{{"id", p.id},
              {"weight", p.weight},
              {"current", node_to_json(p.current)},
              {"goal", node_to_json(p.goal)},
              {"route", p.route},
              {"status", std::string(to_string(p.status))},
              {"edge", p.edge}};
}

EdgeKind kind_field(const json& j, const std::string& field) {
  try {
    return edge_kind_from_string(get_as<std::string>(j, field));
  } catch (const std::invalid_argument& e) {
    throw ParseError(field + ": " + e.what());
  }
}

}  // namespace

json node_to_json(NodeRef node) { return json::array({node.hub, node.time}); }

NodeRef node_from_json(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() ||
      !j[1].is_number_integer()) {
    throw ParseError(field + ": expected [hub, time]");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

json state_to_json(const MdpState& state) {
  json doc;
  doc["format"] = std::string(kStateFormat);
  doc["hubs"] = state.num_hubs();
  doc["horizon"] = state.horizon();
  json static_edges = json::array();
  for (auto [a, b] : state.network().edges) {
    static_edges.push_back(json::array({a, b}));
  }
  doc["static"] = json{{"edges", static_edges}, {"beta1", state.beta1()}};

  json nodes = json::array();
  for (NodeRef n : state.nodes()) nodes.push_back(node_to_json(n));
  doc["nodes"] = std::move(nodes);

  json edges = json::array();
  for (EdgeId id : state.edge_ids()) {
    const EdgeRecord& e = state.edge(id);
    edges.push_back(json{{"id", e.id},
                         {"kind", std::string(to_string(e.kind))},
                         {"sender", node_to_json(e.sender)},
                         {"receiver", node_to_json(e.receiver)},
                         {"capacity", e.capacity},
                         {"weight", e.weight}});
  }
  doc["edges"] = std::move(edges);
  doc["next_edge_id"] = state.next_edge_id();

  json parcels = json::array();
  for (const auto& [id, p] : state.parcels()) parcels.push_back(parcel_to_json(p));
  for (const ParcelRecord& p : state.finished()) {
    parcels.push_back(parcel_to_json(p));
  }
  doc["parcels"] = std::move(parcels);

  json skip = json::array();
  for (const auto& [id, hops] : state.skip_map()) {
    json hj = json::array();
    for (const SkipHop& hop : hops) hj.push_back(hop_to_json(hop));
    skip.push_back(json{{"id", id}, {"hops", hj}});
  }
  doc["skip_map"] = std::move(skip);
  return doc;
}

MdpState state_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("document: expected object");
  auto format = get_as<std::string>(require(doc, "format", "document"), "format");
  if (format != kStateFormat) {
    throw ParseError("format: unsupported '" + format + "'");
  }
  int hubs = get_as<int>(require(doc, "hubs", "document"), "hubs");
  int horizon = get_as<int>(require(doc, "horizon", "document"), "horizon");
  if (hubs <= 0) throw ParseError("hubs: must be positive");
  if (horizon <= 0) throw ParseError("horizon: must be positive");

  const json& st = require(doc, "static", "document");
  const json& sedges = require(st, "edges", "static");
  double beta1 = get_as<double>(require(st, "beta1", "static"), "static.beta1");
  if (!sedges.is_array()) throw ParseError("static.edges: expected array");
  std::vector<std::pair<HubId, HubId>> static_list;
  for (std::size_t i = 0; i < sedges.size(); ++i) {
    std::string f = "static.edges[" + std::to_string(i) + "]";
    const json& e = sedges[i];
    if (!e.is_array() || e.size() != 2) throw ParseError(f + ": expected [a, b]");
    static_list.emplace_back(get_as<int>(e[0], f), get_as<int>(e[1], f));
  }
  std::shared_ptr<const StaticNetwork> net;
  try {
    net = std::make_shared<const StaticNetwork>(hubs, std::move(static_list));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("static.edges: ") + e.what());
  }

  std::unique_ptr<MdpState> state;
  try {
    state = std::make_unique<MdpState>(net, beta1, horizon);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("static: ") + e.what());
  }

  const json& nodes = require(doc, "nodes", "document");
  if (!nodes.is_array()) throw ParseError("nodes: expected array");
  std::set<NodeRef> seen_nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::string f = "nodes[" + std::to_string(i) + "]";
    NodeRef n = node_from_json(nodes[i], f);
    if (!state->in_range(n)) throw ParseError(f + ": outside grid");
    if (!seen_nodes.insert(n).second) throw ParseError(f + ": duplicate node");
    state->add_node(n);
  }

  const json& edges = require(doc, "edges", "document");
  if (!edges.is_array()) throw ParseError("edges: expected array");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    std::string f = "edges[" + std::to_string(i) + "]";
    const json& e = edges[i];
    EdgeRecord r;
    r.id = get_as<EdgeId>(require(e, "id", f), f + ".id");
    r.kind = kind_field(require(e, "kind", f), f + ".kind");
    r.sender = node_from_json(require(e, "sender", f), f + ".sender");
    r.receiver = node_from_json(require(e, "receiver", f), f + ".receiver");
    r.capacity = get_as<double>(require(e, "capacity", f), f + ".capacity");
    r.weight = get_as<double>(require(e, "weight", f), f + ".weight");
    if (r.id < 0) throw ParseError(f + ".id: negative");
    if (state->has_edge(r.id)) throw ParseError(f + ".id: duplicate edge id");
    if (!state->has_node(r.sender)) throw ParseError(f + ".sender: unknown node");
    if (!state->has_node(r.receiver)) {
      throw ParseError(f + ".receiver: unknown node");
    }
    state->insert_edge(r);
  }
  auto next = get_as<EdgeId>(require(doc, "next_edge_id", "document"),
                             "next_edge_id");
  if (next < state->next_edge_id()) {
    throw ParseError("next_edge_id: smaller than an existing edge id");
  }
  state->reserve_edge_ids(next);

  const json& parcels = require(doc, "parcels", "document");
  if (!parcels.is_array()) throw ParseError("parcels: expected array");
  std::set<ParcelId> seen_parcels;
  for (std::size_t i = 0; i < parcels.size(); ++i) {
    std::string f = "parcels[" + std::to_string(i) + "]";
    const json& pj = parcels[i];
    ParcelRecord p;
    p.id = get_as<int>(require(pj, "id", f), f + ".id");
    p.weight = get_as<double>(require(pj, "weight", f), f + ".weight");
    p.current = node_from_json(require(pj, "current", f), f + ".current");
    p.goal = node_from_json(require(pj, "goal", f), f + ".goal");
    p.route = get_as<std::vector<EdgeId>>(require(pj, "route", f), f + ".route");
    p.edge = get_as<EdgeId>(require(pj, "edge", f), f + ".edge");
    try {
      p.status = parcel_status_from_string(
          get_as<std::string>(require(pj, "status", f), f + ".status"));
    } catch (const std::invalid_argument& e) {
      throw ParseError(f + ".status: " + e.what());
    }
    if (!seen_parcels.insert(p.id).second) {
      throw ParseError(f + ".id: duplicate parcel id");
    }
    if (p.status == ParcelStatus::kInTransit) {
      if (p.edge != kNoEdge && !state->has_edge(p.edge)) {
        throw ParseError(f + ".edge: unknown edge");
      }
      // Parcel edges are already part of the edge list.
      state->restore_parcel(std::move(p));
    } else {
      state->add_finished(p);
    }
  }

  const json& skip = require(doc, "skip_map", "document");
  if (!skip.is_array()) throw ParseError("skip_map: expected array");
  for (std::size_t i = 0; i < skip.size(); ++i) {
    std::string f = "skip_map[" + std::to_string(i) + "]";
    const json& entry = skip[i];
    auto id = get_as<EdgeId>(require(entry, "id", f), f + ".id");
    const json& hops = require(entry, "hops", f);
    if (!hops.is_array()) throw ParseError(f + ".hops: expected array");
    std::vector<SkipHop> list;
    for (std::size_t k = 0; k < hops.size(); ++k) {
      std::string hf = f + ".hops[" + std::to_string(k) + "]";
      const json& hj = hops[k];
      SkipHop hop;
      hop.edge = get_as<EdgeId>(require(hj, "edge", hf), hf + ".edge");
      hop.kind = kind_field(require(hj, "kind", hf), hf + ".kind");
      hop.sender = node_from_json(require(hj, "sender", hf), hf + ".sender");
      hop.receiver = node_from_json(require(hj, "receiver", hf), hf + ".receiver");
      hop.capacity = get_as<double>(require(hj, "capacity", hf), hf + ".capacity");
      list.push_back(hop);
    }
    if (!state->skip_map().emplace(id, std::move(list)).second) {
      throw ParseError(f + ".id: duplicate skip-map entry");
    }
  }
  return std::move(*state);
}

std::string serialize_state(const MdpState& state) {
  return state_to_json(state).dump();
}

MdpState deserialize_state(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("document: ") + e.what());
  }
  return state_from_json(doc);
}

std::uint64_t state_hash(const MdpState& state) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : serialize_state(state)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace midmile
