#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "midmile/dynamics.hpp"
#include "midmile/policies.hpp"

namespace midmile {

enum class Parameterization { kLinear, kGnn };

std::string_view to_string(Parameterization p);
Parameterization parameterization_from_string(std::string_view name);

enum class OptimizerKind { kSgd, kAdam };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view name);

// First-order optimizer over a flat parameter vector. `step` ascends when
// `gradient` is a gradient of an objective to maximize; pass the negated
// gradient of a loss.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double rate, Eigen::Index size);
  void ascend(Eigen::VectorXd& params, const Eigen::VectorXd& gradient);
  double rate() const { return rate_; }

 private:
  OptimizerKind kind_;
  double rate_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

// One policy decision, stored in the form the model consumes.
struct Sample {
  std::vector<LinearVector> rows;            // linear
  std::shared_ptr<const GraphInput> graph;   // gnn
  std::size_t action = 0;
  std::vector<double> behavior;  // full behavior distribution
  int reward = 0;
  double return_to_go = 0.0;  // undiscounted deliveries from here on
  int episode = 0;

  std::size_t num_actions() const { return behavior.size(); }
};

struct RolloutBatch {
  std::vector<Sample> samples;
  std::vector<EpisodeStats> episodes;

  double mean_return() const;
};

// Actor logits and critic values over a chosen parameterization. Gradients
// are returned as flat vectors aligned with actor_flat()/critic_flat().
class Model {
 public:
  virtual ~Model() = default;
  virtual Parameterization kind() const = 0;
  virtual double alpha() const = 0;
  virtual Sample featurize(const Decision& decision) const = 0;
  virtual std::vector<double> logits(const Sample& s) const = 0;
  virtual std::vector<double> q_values(const Sample& s) const = 0;
  // d(sum_k upstream[k] * logit_k) / d(actor params)
  virtual Eigen::VectorXd actor_gradient(
      const Sample& s, const std::vector<double>& upstream) const = 0;
  // d q(s, action) / d(critic params)
  virtual Eigen::VectorXd critic_gradient(const Sample& s,
                                          std::size_t action) const = 0;
  virtual Eigen::VectorXd actor_flat() const = 0;
  virtual Eigen::VectorXd critic_flat() const = 0;
  virtual void set_actor_flat(const Eigen::VectorXd& v) = 0;
  virtual void set_critic_flat(const Eigen::VectorXd& v) = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual std::unique_ptr<Policy> make_policy(bool greedy) const = 0;

  std::vector<double> distribution(const Sample& s) const;
};

class LinearModel : public Model {
 public:
  explicit LinearModel(LinearParams params = {}) : params_(params) {}
  Parameterization kind() const override { return Parameterization::kLinear; }
  double alpha() const override { return params_.alpha; }
  Sample featurize(const Decision& decision) const override;
  std::vector<double> logits(const Sample& s) const override;
  std::vector<double> q_values(const Sample& s) const override;
  Eigen::VectorXd actor_gradient(
      const Sample& s, const std::vector<double>& upstream) const override;
  Eigen::VectorXd critic_gradient(const Sample& s,
                                  std::size_t action) const override;
  Eigen::VectorXd actor_flat() const override;
  Eigen::VectorXd critic_flat() const override;
  void set_actor_flat(const Eigen::VectorXd& v) override;
  void set_critic_flat(const Eigen::VectorXd& v) override;
  nlohmann::json to_json() const override { return linear_to_json(params_); }
  std::unique_ptr<Policy> make_policy(bool greedy) const override;
  const LinearParams& params() const { return params_; }

 private:
  LinearParams params_;
};

class GnnModel : public Model {
 public:
  explicit GnnModel(GnnPolicyParams params) : params_(std::move(params)) {}
  Parameterization kind() const override { return Parameterization::kGnn; }
  double alpha() const override { return params_.alpha; }
  Sample featurize(const Decision& decision) const override;
  std::vector<double> logits(const Sample& s) const override;
  std::vector<double> q_values(const Sample& s) const override;
  Eigen::VectorXd actor_gradient(
      const Sample& s, const std::vector<double>& upstream) const override;
  Eigen::VectorXd critic_gradient(const Sample& s,
                                  std::size_t action) const override;
  Eigen::VectorXd actor_flat() const override { return params_.actor.flat(); }
  Eigen::VectorXd critic_flat() const override { return params_.critic.flat(); }
  void set_actor_flat(const Eigen::VectorXd& v) override {
    params_.actor.set_flat(v);
  }
  void set_critic_flat(const Eigen::VectorXd& v) override {
    params_.critic.set_flat(v);
  }
  nlohmann::json to_json() const override {
    return gnn_policy_to_json(params_);
  }
  std::unique_ptr<Policy> make_policy(bool greedy) const override;
  const GnnPolicyParams& params() const { return params_; }

 private:
  GnnPolicyParams params_;
};

// Zero linear model, or a GNN with random actor/critic weights.
std::unique_ptr<Model> make_model(Parameterization p, int radius,
                                  std::uint64_t seed);

// Samples from the model and records one Sample per decision.
class RecordingPolicy : public Policy {
 public:
  RecordingPolicy(const Model& model, bool greedy = false)
      : model_(model), greedy_(greedy) {}
  std::size_t choose(const Decision& decision, Rng& rng) override;
  std::vector<Sample>& samples() { return samples_; }

 private:
  const Model& model_;
  bool greedy_;
  std::vector<Sample> samples_;
};

// Fills return_to_go from the rewards of one episode (gamma = 1).
void assign_returns(std::span<Sample> episode);

// Runs `episodes` fresh environments; each seed is drawn from `seeds`.
RolloutBatch collect_rollouts(const EnvConfig& cfg, const Model& model,
                              int episodes, Rng& seeds);

struct PpoConfig {
  double epsilon = 0.2;
  double kl_threshold = 0.1;
  int rollouts_per_epoch = 1;   // N_r
  int updates = 50;             // N_u
  double eta_actor = 0.01;
  double eta_critic = 0.01;
  int total_rollouts = 1000;
  int radius = 2;
  int minibatch = 256;
  OptimizerKind optimizer = OptimizerKind::kAdam;
};

PpoConfig ppo_defaults(Parameterization p);
void validate(const PpoConfig& cfg);

// q(s,a) - sum_a' pi(a'|s) q(s,a').
std::vector<double> advantages(std::span<const double> q,
                               std::span<const double> pi);

// Clipped surrogate term and its derivative with respect to the ratio.
struct Surrogate {
  double value = 0.0;
  double d_ratio = 0.0;
};
Surrogate clipped_surrogate(double ratio, double advantage, double epsilon);

struct EpochDiagnostics {
  double mean_kl = 0.0;  // last estimate before stopping or finishing
  bool early_stopped = false;
  int actor_steps = 0;
  double actor_loss = 0.0;   // negative surrogate on the last minibatch
  double critic_loss = 0.0;  // mse on the last minibatch
  // max over states of |sum_a pi(a|s) A(s,a)|
  double advantage_residual = 0.0;
};

class PpoTrainer {
 public:
  PpoTrainer(Model& model, const PpoConfig& cfg, std::uint64_t seed);
  EpochDiagnostics epoch(const RolloutBatch& batch);

 private:
  std::vector<std::size_t> minibatch(std::size_t n);

  Model& model_;
  PpoConfig cfg_;
  Rng rng_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
};

struct CurveRow {
  int epoch = 0;
  int rollouts_consumed = 0;
  double mean_return = 0.0;
  double kl = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  bool early_stopped = false;
  double advantage_residual = 0.0;
};

struct TrainResult {
  std::unique_ptr<Model> model;
  std::vector<CurveRow> curve;
};

TrainResult train_ppo(const EnvConfig& env, const PpoConfig& cfg,
                      Parameterization p, std::uint64_t seed);

struct SlConfig {
  int radius = 3;
  int rollouts = 100;
  int epochs = 5;
  int minibatch = 256;
  double eta = 0.01;
  OptimizerKind optimizer = OptimizerKind::kAdam;
};

SlConfig sl_defaults(Parameterization p);

struct SlReport {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
  double initial_loss = 0.0;       // first minibatch before any update
  double initial_log_actions = 0.0;  // mean ln(#actions) of that minibatch
  int samples = 0;
  int skipped = 0;
};

struct SlResult {
  std::unique_ptr<Model> model;
  SlReport report;
};

// Ground-truth actions from replayed routes as cross-entropy targets.
SlResult train_supervised(const EnvConfig& env, const SlConfig& cfg,
                          Parameterization p, std::uint64_t seed);

}  // namespace midmile
