#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "midmile/dynamics.hpp"

namespace midmile {

// Missing keys keep their experiment_config() values.
EnvConfig env_config_from_json(const nlohmann::json& doc);
nlohmann::json env_config_to_json(const EnvConfig& cfg);

struct StepResult {
  nlohmann::json observation;
  int reward = 0;
  bool done = false;
  nlohmann::json info;
};

// Reset/step handle with the routing loop of run_episode turned inside out:
// parcels are selected by the configured strategy, parcels without actions
// fail automatically, and every observation carries at least one action
// unless the episode is done.
class Env {
 public:
  explicit Env(EnvConfig cfg, int radius = 2);

  nlohmann::json reset(std::uint64_t seed);
  // Throws InvalidAction for an out-of-range index, leaving the state as is.
  StepResult step(std::size_t action_index);

  bool done() const { return state_.parcels().empty(); }
  const MdpState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  std::optional<ParcelId> parcel() const { return parcel_; }
  const std::vector<EdgeId>& actions() const { return actions_; }
  int episode_return() const { return return_; }

 private:
  void advance(nlohmann::json& info);
  nlohmann::json observe() const;

  EnvConfig cfg_;
  int radius_;
  MdpState state_;
  bool started_ = false;
  std::optional<ParcelId> parcel_;
  int remaining_ = 0;
  std::vector<EdgeId> actions_;
  int return_ = 0;
};

}  // namespace midmile
