#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "midmile/dynamics.hpp"
#include "midmile/features.hpp"
#include "midmile/gnn.hpp"

namespace midmile {

// Exp(alpha * logits) normalized; stable under constant shifts.
std::vector<double> softmax(std::span<const double> logits, double alpha);

std::size_t sample_index(std::span<const double> probs, Rng& rng);
std::size_t argmax_index(std::span<const double> values);

class RandomPolicy : public Policy {
 public:
  std::size_t choose(const Decision& decision, Rng& rng) override;
};

// Lowest resistance distance from the receiving hub to the goal hub; ties to
// the lowest edge id.
class GreedyPolicy : public Policy {
 public:
  std::size_t choose(const Decision& decision, Rng& rng) override;
};

std::size_t greedy_choice(const MdpState& state, ParcelId parcel,
                          std::span<const EdgeId> actions);

// Follows each parcel's ground-truth route. Throws std::logic_error when the
// route cannot be continued from the parcel's node.
class ReplayPolicy : public Policy {
 public:
  std::size_t choose(const Decision& decision, Rng& rng) override;
};

std::size_t replay_choice(const MdpState& state, ParcelId parcel,
                          std::span<const EdgeId> actions);

using LinearVector = std::array<double, kLinearFeatures>;

struct LinearParams {
  LinearVector theta{};  // actor
  LinearVector phi{};    // critic
  double alpha = 0.1;
};

double linear_q(const LinearParams& params, const LinearVector& x);
double linear_logit(const LinearParams& params, const LinearVector& x);
std::vector<double> linear_distribution(const LinearParams& params,
                                        std::span<const LinearVector> rows);

nlohmann::json linear_to_json(const LinearParams& params);
LinearParams linear_from_json(const nlohmann::json& doc);

// Samples from the softmax, or takes the argmax when `greedy`.
class LinearPolicy : public Policy {
 public:
  explicit LinearPolicy(LinearParams params, bool greedy = false)
      : params_(params), greedy_(greedy) {}
  std::size_t choose(const Decision& decision, Rng& rng) override;
  const LinearParams& params() const { return params_; }

 private:
  LinearParams params_;
  bool greedy_;
};

struct GnnPolicyParams {
  GnnParams actor;
  GnnParams critic;
  double alpha = 0.1;
  int radius = 2;
};

std::vector<double> gnn_distribution(const GnnPolicyParams& params,
                                     const GraphInput& g);

nlohmann::json gnn_policy_to_json(const GnnPolicyParams& params);
GnnPolicyParams gnn_policy_from_json(const nlohmann::json& doc);

class GnnPolicy : public Policy {
 public:
  explicit GnnPolicy(GnnPolicyParams params, bool greedy = false)
      : params_(std::move(params)), greedy_(greedy) {}
  std::size_t choose(const Decision& decision, Rng& rng) override;
  const GnnPolicyParams& params() const { return params_; }

 private:
  GnnPolicyParams params_;
  bool greedy_;
};

// "random", "greedy", "replay", "linear:<file>", "gnn:<file>".
std::unique_ptr<Policy> make_policy(const std::string& spec);

}  // namespace midmile
