#include "midmile/env.hpp"

#include <cstring>
#include <memory>
#include <string>

#include "midmile/c_api.h"
#include "midmile/features.hpp"
#include "midmile/pruning.hpp"
#include "midmile/serialize.hpp"

namespace midmile {

using nlohmann::json;

EnvConfig env_config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config: expected object");
  EnvConfig cfg = experiment_config();
  auto get = [&](const char* key, auto& field) {
    if (doc.contains(key)) {
      try {
        doc.at(key).get_to(field);
      } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config.") + key + ": " + e.what());
      }
    }
  };
  get("hubs", cfg.netgen.num_hubs);
  get("horizon", cfg.netgen.horizon);
  if (doc.contains("trucks_per_step") && !doc["trucks_per_step"].is_null()) {
    cfg.netgen.trucks_per_step = doc["trucks_per_step"].get<int>();
  }
  get("max_duration", cfg.netgen.max_duration);
  get("beta1", cfg.netgen.beta1);
  get("parcels", cfg.parcelgen.num_parcels);
  get("pareto_shape", cfg.parcelgen.pareto_shape);
  get("pareto_scale", cfg.parcelgen.pareto_scale);
  get("max_weight", cfg.parcelgen.max_weight);
  get("beta2", cfg.parcelgen.beta2);
  get("beta3", cfg.parcelgen.beta3);
  get("mean_route_length", cfg.parcelgen.mean_route_length);
  get("max_retries", cfg.parcelgen.max_retries);
  get("unit_mode", cfg.unit_mode);
  get("prune_on_step", cfg.prune_on_step);
  get("parcel_prune_actions", cfg.parcel_prune_actions);
  get("seed", cfg.seed);
  if (doc.contains("strategy")) {
    cfg.strategy = routing_strategy_from_string(doc["strategy"].get<std::string>());
  }
  validate(cfg);
  return cfg;
}

json env_config_to_json(const EnvConfig& cfg) {
  json doc;
  doc["hubs"] = cfg.netgen.num_hubs;
  doc["horizon"] = cfg.netgen.horizon;
  doc["trucks_per_step"] = cfg.netgen.trucks_per_step
                               ? json(*cfg.netgen.trucks_per_step)
                               : json(nullptr);
  doc["max_duration"] = cfg.netgen.max_duration;
  doc["beta1"] = cfg.netgen.beta1;
  doc["parcels"] = cfg.parcelgen.num_parcels;
  doc["pareto_shape"] = cfg.parcelgen.pareto_shape;
  doc["pareto_scale"] = cfg.parcelgen.pareto_scale;
  doc["max_weight"] = cfg.parcelgen.max_weight;
  doc["beta2"] = cfg.parcelgen.beta2;
  doc["beta3"] = cfg.parcelgen.beta3;
  doc["mean_route_length"] = cfg.parcelgen.mean_route_length;
  doc["max_retries"] = cfg.parcelgen.max_retries;
  doc["unit_mode"] = cfg.unit_mode;
  doc["prune_on_step"] = cfg.prune_on_step;
  doc["parcel_prune_actions"] = cfg.parcel_prune_actions;
  doc["strategy"] = to_string(cfg.strategy);
  doc["seed"] = cfg.seed;
  return doc;
}

Env::Env(EnvConfig cfg, int radius) : cfg_(std::move(cfg)), radius_(radius) {
  validate(cfg_);
  if (radius_ < 1) throw std::invalid_argument("env: radius must be >= 1");
}

json Env::reset(std::uint64_t seed) {
  state_ = midmile::reset(cfg_, seed);
  started_ = true;
  parcel_.reset();
  remaining_ = 0;
  return_ = 0;
  json info = json::object();
  advance(info);
  return observe();
}

void Env::advance(json& info) {
  while (!state_.parcels().empty()) {
    if (!parcel_ || !state_.has_parcel(*parcel_) || remaining_ <= 0) {
      Selection sel = select_next(state_, cfg_.strategy);
      parcel_ = sel.parcel;
      remaining_ = sel.steps;
    }
    actions_ = get_actions(state_, *parcel_, cfg_.parcel_prune_actions);
    if (!actions_.empty()) return;
    fail_parcel(state_, *parcel_);
    info["auto_failed"].push_back(*parcel_);
    parcel_.reset();
  }
  parcel_.reset();
  actions_.clear();
}

json Env::observe() const {
  json obs;
  obs["actions"] = actions_;
  obs["num_actions"] = actions_.size();
  obs["state_hash"] = state_hash(state_);
  if (parcel_) {
    obs["parcel"] = *parcel_;
    obs["feature_graph"] = feature_graph_to_json(
        extract_feature_graph(state_, *parcel_, radius_, actions_));
  } else {
    obs["parcel"] = nullptr;
    obs["feature_graph"] = nullptr;
  }
  return obs;
}

StepResult Env::step(std::size_t action_index) {
  if (!started_) throw std::logic_error("env: step before reset");
  if (!parcel_ || action_index >= actions_.size()) {
    throw InvalidAction("env: action index " + std::to_string(action_index) +
                        " out of range (" + std::to_string(actions_.size()) +
                        " actions)");
  }
  const NodeRef vacated = state_.parcel(*parcel_).current;
  Transition tr = midmile::step(state_, *parcel_, actions_[action_index], false);
  if (cfg_.prune_on_step) step_prune(state_, vacated);
  if (remaining_ != kUntilDone) --remaining_;
  if (tr.removed) parcel_.reset();
  return_ += tr.reward;

  StepResult out;
  out.reward = tr.reward;
  out.info = json{{"parcel", tr.parcel},
                  {"edge", tr.action},
                  {"delivered", tr.delivered},
                  {"removed", tr.removed}};
  advance(out.info);
  out.done = done();
  out.observation = observe();
  return out;
}

}  // namespace midmile

// C surface -------------------------------------------------------------

using nlohmann::json;

struct midmile_env {
  std::unique_ptr<midmile::Env> env;
  std::string buffer;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
auto guarded(Fn fn, decltype(fn()) fallback) -> decltype(fn()) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return fallback;
  }
}

}  // namespace

extern "C" {

midmile_env* midmile_env_create(const char* config_json) {
  return guarded(
      [&]() -> midmile_env* {
        auto doc = config_json == nullptr || std::strlen(config_json) == 0
                       ? json::object()
                       : json::parse(config_json);
        auto* h = new midmile_env;
        h->env = std::make_unique<midmile::Env>(
            midmile::env_config_from_json(doc), doc.value("K", 2));
        return h;
      },
      nullptr);
}

const char* midmile_env_reset(midmile_env* h, uint64_t seed) {
  return guarded(
      [&]() -> const char* {
        if (h == nullptr) throw std::invalid_argument("closed handle");
        h->buffer = h->env->reset(seed).dump();
        return h->buffer.c_str();
      },
      nullptr);
}

const char* midmile_env_step(midmile_env* h, size_t action_index) {
  return guarded(
      [&]() -> const char* {
        if (h == nullptr) throw std::invalid_argument("closed handle");
        midmile::StepResult r = h->env->step(action_index);
        h->buffer = json{{"observation", r.observation},
                         {"reward", r.reward},
                         {"done", r.done},
                         {"info", r.info}}
                        .dump();
        return h->buffer.c_str();
      },
      nullptr);
}

const char* midmile_env_state(midmile_env* h) {
  return guarded(
      [&]() -> const char* {
        if (h == nullptr) throw std::invalid_argument("closed handle");
        h->buffer = midmile::serialize_state(h->env->state());
        return h->buffer.c_str();
      },
      nullptr);
}

uint64_t midmile_env_state_hash(midmile_env* h) {
  return guarded(
      [&]() -> uint64_t {
        if (h == nullptr) throw std::invalid_argument("closed handle");
        return midmile::state_hash(h->env->state());
      },
      uint64_t{0});
}

void midmile_env_close(midmile_env* h) { delete h; }

const char* midmile_last_error(void) { return g_last_error.c_str(); }

}  // extern "C"
