#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "midmile/graph.hpp"

namespace midmile {

inline constexpr std::string_view kStateFormat = "midmile-v1";

// Raised for malformed instance documents; what() names the offending field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json state_to_json(const MdpState& state);
MdpState state_from_json(const nlohmann::json& doc);

// Canonical text: sorted keys, arrays in id order, no whitespace.
std::string serialize_state(const MdpState& state);
MdpState deserialize_state(std::string_view text);

// FNV-1a over the canonical serialization.
std::uint64_t state_hash(const MdpState& state);

nlohmann::json node_to_json(NodeRef node);
NodeRef node_from_json(const nlohmann::json& j, const std::string& field);

}  // namespace midmile
