#include "midmile/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace midmile {

using Eigen::VectorXd;

std::string_view to_string(Parameterization p) {
  return p == Parameterization::kLinear ? "linear" : "gnn";
}

Parameterization parameterization_from_string(std::string_view name) {
  if (name == "linear") return Parameterization::kLinear;
  if (name == "gnn") return Parameterization::kGnn;
  throw std::invalid_argument("unknown parameterization '" + std::string(name) +
                              "'");
}

std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double rate, Eigen::Index size)
    : kind_(kind),
      rate_(rate),
      m_(VectorXd::Zero(size)),
      v_(VectorXd::Zero(size)) {}

void Optimizer::ascend(VectorXd& params, const VectorXd& gradient) {
  if (kind_ == OptimizerKind::kSgd) {
    params += rate_ * gradient;
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ++t_;
  m_ = b1 * m_ + (1.0 - b1) * gradient;
  v_ = b2 * v_ + (1.0 - b2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  params.array() +=
      rate_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

double RolloutBatch::mean_return() const {
  if (episodes.empty()) return 0.0;
  double total = 0.0;
  for (const EpisodeStats& e : episodes) total += e.episode_return;
  return total / static_cast<double>(episodes.size());
}

std::vector<double> Model::distribution(const Sample& s) const {
  return softmax(logits(s), alpha());
}

// Linear ---------------------------------------------------------------

Sample LinearModel::featurize(const Decision& d) const {
  Sample s;
  s.rows = linear_feature_rows(d.state, d.parcel, d.actions);
  return s;
}

std::vector<double> LinearModel::logits(const Sample& s) const {
  std::vector<double> out;
  for (const LinearVector& x : s.rows) out.push_back(linear_logit(params_, x));
  return out;
}

std::vector<double> LinearModel::q_values(const Sample& s) const {
  std::vector<double> out;
  for (const LinearVector& x : s.rows) out.push_back(linear_q(params_, x));
  return out;
}

VectorXd LinearModel::actor_gradient(const Sample& s,
                                     const std::vector<double>& upstream) const {
  VectorXd g = VectorXd::Zero(kLinearFeatures);
  for (std::size_t k = 0; k < s.rows.size(); ++k) {
    for (std::size_t i = 0; i < kLinearFeatures; ++i) {
      g(static_cast<Eigen::Index>(i)) += upstream[k] * s.rows[k][i];
    }
  }
  return g;
}

VectorXd LinearModel::critic_gradient(const Sample& s,
                                      std::size_t action) const {
  VectorXd g(kLinearFeatures);
  for (std::size_t i = 0; i < kLinearFeatures; ++i) {
    g(static_cast<Eigen::Index>(i)) = s.rows[action][i];
  }
  return g;
}

VectorXd LinearModel::actor_flat() const {
  return Eigen::Map<const VectorXd>(params_.theta.data(), kLinearFeatures);
}

VectorXd LinearModel::critic_flat() const {
  return Eigen::Map<const VectorXd>(params_.phi.data(), kLinearFeatures);
}

void LinearModel::set_actor_flat(const VectorXd& v) {
  Eigen::Map<VectorXd>(params_.theta.data(), kLinearFeatures) = v;
}

void LinearModel::set_critic_flat(const VectorXd& v) {
  Eigen::Map<VectorXd>(params_.phi.data(), kLinearFeatures) = v;
}

std::unique_ptr<Policy> LinearModel::make_policy(bool greedy) const {
  return std::make_unique<LinearPolicy>(params_, greedy);
}

// GNN ------------------------------------------------------------------

Sample GnnModel::featurize(const Decision& d) const {
  Sample s;
  FeatureGraph fg = extract_feature_graph(d.state, d.parcel,
                                          std::max(1, params_.radius), d.actions);
  s.graph = std::make_shared<const GraphInput>(to_graph_input(fg));
  return s;
}

namespace {

std::vector<double> to_std(const VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

std::vector<double> GnnModel::logits(const Sample& s) const {
  return to_std(gnn_forward(params_.actor, *s.graph));
}

std::vector<double> GnnModel::q_values(const Sample& s) const {
  return to_std(gnn_forward(params_.critic, *s.graph));
}

VectorXd GnnModel::actor_gradient(const Sample& s,
                                  const std::vector<double>& upstream) const {
  GnnCache cache;
  gnn_forward(params_.actor, *s.graph, &cache);
  VectorXd up = Eigen::Map<const VectorXd>(
      upstream.data(), static_cast<Eigen::Index>(upstream.size()));
  return gnn_backward(params_.actor, *s.graph, cache, up).flat();
}

VectorXd GnnModel::critic_gradient(const Sample& s, std::size_t action) const {
  GnnCache cache;
  gnn_forward(params_.critic, *s.graph, &cache);
  VectorXd up = VectorXd::Zero(
      static_cast<Eigen::Index>(s.graph->action_edges.size()));
  up(static_cast<Eigen::Index>(action)) = 1.0;
  return gnn_backward(params_.critic, *s.graph, cache, up).flat();
}

std::unique_ptr<Policy> GnnModel::make_policy(bool greedy) const {
  return std::make_unique<GnnPolicy>(params_, greedy);
}

std::unique_ptr<Model> make_model(Parameterization p, int radius,
                                  std::uint64_t seed) {
  if (p == Parameterization::kLinear) return std::make_unique<LinearModel>();
  GnnPolicyParams params;
  params.radius = radius;
  params.actor = init_gnn(GnnConfig{}, derive_seed(seed, 31));
  params.critic = init_gnn(GnnConfig{}, derive_seed(seed, 32));
  // Start from the uniform policy.
  params.actor.dec_edge.w2.setZero();
  return std::make_unique<GnnModel>(std::move(params));
}

// Rollouts ---------------------------------------------------------------

std::size_t RecordingPolicy::choose(const Decision& decision, Rng& rng) {
  Sample s = model_.featurize(decision);
  s.behavior = model_.distribution(s);
  s.action = greedy_ ? argmax_index(s.behavior) : sample_index(s.behavior, rng);
  samples_.push_back(std::move(s));
  return samples_.back().action;
}

void assign_returns(std::span<Sample> episode) {
  double running = 0.0;
  for (auto it = episode.rbegin(); it != episode.rend(); ++it) {
    running += it->reward;
    it->return_to_go = running;
  }
}

RolloutBatch collect_rollouts(const EnvConfig& cfg, const Model& model,
                              int episodes, Rng& seeds) {
  RolloutBatch batch;
  EnvConfig env = cfg;
  env.strategy = RoutingStrategy::kOneStep;
  for (int ep = 0; ep < episodes; ++ep) {
    const std::uint64_t seed = seeds();
    RecordingPolicy policy(model);
    Rng rng = make_rng(seed, 5);
    const std::size_t before = policy.samples().size();
    auto observer = [&](const Decision&, std::size_t, const Transition& t) {
      policy.samples().back().reward = t.reward;
    };
    EpisodeStats stats = run_episode(reset(env, seed), env, policy, rng, observer);
    std::span<Sample> span(policy.samples().data() + before,
                           policy.samples().size() - before);
    assign_returns(span);
    for (Sample& s : policy.samples()) {
      s.episode = static_cast<int>(batch.episodes.size());
      batch.samples.push_back(std::move(s));
    }
    batch.episodes.push_back(stats);
  }
  return batch;
}

// PPO --------------------------------------------------------------------

PpoConfig ppo_defaults(Parameterization p) {
  PpoConfig cfg;
  if (p == Parameterization::kGnn) {
    cfg.rollouts_per_epoch = 5;
    cfg.eta_actor = 1e-4;
    cfg.eta_critic = 1e-3;
  }
  return cfg;
}

void validate(const PpoConfig& cfg) {
  if (!(cfg.epsilon >= 0.0) || !(cfg.kl_threshold > 0.0) ||
      cfg.rollouts_per_epoch < 1 || cfg.updates < 0 || !(cfg.eta_actor >= 0.0) ||
      !(cfg.eta_critic >= 0.0) || cfg.total_rollouts < 1 || cfg.radius < 1 ||
      cfg.minibatch < 1) {
    throw std::invalid_argument("ppo config: values must be positive");
  }
}

std::vector<double> advantages(std::span<const double> q,
                               std::span<const double> pi) {
  double baseline = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) baseline += pi[i] * q[i];
  std::vector<double> a(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) a[i] = q[i] - baseline;
  return a;
}

Surrogate clipped_surrogate(double ratio, double advantage, double epsilon) {
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  const double plain = ratio * advantage;
  const double bounded = clipped * advantage;
  if (plain <= bounded) return {plain, advantage};
  return {bounded, 0.0};
}

PpoTrainer::PpoTrainer(Model& model, const PpoConfig& cfg, std::uint64_t seed)
    : model_(model),
      cfg_(cfg),
      rng_(make_rng(seed, 41)),
      actor_opt_(cfg.optimizer, cfg.eta_actor, model.actor_flat().size()),
      critic_opt_(cfg.optimizer, cfg.eta_critic, model.critic_flat().size()) {
  validate(cfg);
}

std::vector<std::size_t> PpoTrainer::minibatch(std::size_t n) {
  const auto want = static_cast<std::size_t>(cfg_.minibatch);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= want) return idx;
  std::shuffle(idx.begin(), idx.end(), rng_);
  idx.resize(want);
  return idx;
}

EpochDiagnostics PpoTrainer::epoch(const RolloutBatch& batch) {
  if (batch.samples.empty()) {
    throw std::invalid_argument("ppo epoch: empty batch");
  }
  const auto& samples = batch.samples;
  EpochDiagnostics diag;

  // Critic first: regress q(s, a) onto the Monte-Carlo return.
  VectorXd phi = model_.critic_flat();
  for (int u = 0; u < cfg_.updates; ++u) {
    auto mb = minibatch(samples.size());
    VectorXd grad = VectorXd::Zero(phi.size());
    double loss = 0.0;
    for (std::size_t i : mb) {
      const Sample& s = samples[i];
      const double err = model_.q_values(s)[s.action] - s.return_to_go;
      loss += err * err;
      grad -= 2.0 * err * model_.critic_gradient(s, s.action);
    }
    const double scale = 1.0 / static_cast<double>(mb.size());
    diag.critic_loss = loss * scale;
    if (!std::isfinite(diag.critic_loss)) {
      throw std::runtime_error("ppo epoch: critic loss is not finite");
    }
    critic_opt_.ascend(phi, grad * scale);
    model_.set_critic_flat(phi);
  }

  // Advantages with the critic held fixed.
  std::vector<double> adv(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    auto q = model_.q_values(s);
    auto a = advantages(q, s.behavior);
    double residual = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) residual += s.behavior[k] * a[k];
    diag.advantage_residual = std::max(diag.advantage_residual, std::abs(residual));
    adv[i] = a[s.action];
  }

  const double alpha = model_.alpha();
  VectorXd theta = model_.actor_flat();
  for (int u = 0; u < cfg_.updates; ++u) {
    auto mb = minibatch(samples.size());
    VectorXd grad = VectorXd::Zero(theta.size());
    double objective = 0.0;
    for (std::size_t i : mb) {
      const Sample& s = samples[i];
      auto pi = model_.distribution(s);
      const double ratio = pi[s.action] / s.behavior[s.action];
      Surrogate sur = clipped_surrogate(ratio, adv[i], cfg_.epsilon);
      objective += sur.value;
      if (sur.d_ratio == 0.0) continue;
      std::vector<double> up(pi.size());
      for (std::size_t k = 0; k < pi.size(); ++k) {
        up[k] = sur.d_ratio * ratio * alpha *
                ((k == s.action ? 1.0 : 0.0) - pi[k]);
      }
      grad += model_.actor_gradient(s, up);
    }
    const double scale = 1.0 / static_cast<double>(mb.size());
    diag.actor_loss = -objective * scale;
    if (!std::isfinite(diag.actor_loss)) {
      throw std::runtime_error("ppo epoch: actor loss is not finite");
    }
    actor_opt_.ascend(theta, grad * scale);
    model_.set_actor_flat(theta);
    ++diag.actor_steps;

    auto probe = minibatch(samples.size());
    double kl = 0.0;
    for (std::size_t i : probe) {
      const Sample& s = samples[i];
      kl += std::log(s.behavior[s.action] / model_.distribution(s)[s.action]);
    }
    diag.mean_kl = kl / static_cast<double>(probe.size());
    if (diag.mean_kl > cfg_.kl_threshold) {
      diag.early_stopped = true;
      break;
    }
  }
  return diag;
}

TrainResult train_ppo(const EnvConfig& env, const PpoConfig& cfg,
                      Parameterization p, std::uint64_t seed) {
  validate(cfg);
  TrainResult result;
  result.model = make_model(p, cfg.radius, seed);
  PpoTrainer trainer(*result.model, cfg, derive_seed(seed, 42));
  Rng seeds = make_rng(seed, 43);
  int consumed = 0;
  int epoch = 0;
  while (consumed < cfg.total_rollouts) {
    const int n = std::min(cfg.rollouts_per_epoch, cfg.total_rollouts - consumed);
    RolloutBatch batch = collect_rollouts(env, *result.model, n, seeds);
    consumed += n;
    CurveRow row;
    row.epoch = epoch++;
    row.rollouts_consumed = consumed;
    row.mean_return = batch.mean_return();
    if (!batch.samples.empty()) {
      EpochDiagnostics d = trainer.epoch(batch);
      row.kl = d.mean_kl;
      row.actor_loss = d.actor_loss;
      row.critic_loss = d.critic_loss;
      row.early_stopped = d.early_stopped;
      row.advantage_residual = d.advantage_residual;
    }
    spdlog::info("ppo {} epoch {}: return {:.2f} kl {:.4f}", to_string(p),
                 row.epoch, row.mean_return, row.kl);
    result.curve.push_back(row);
  }
  return result;
}

// Supervised -------------------------------------------------------------

SlConfig sl_defaults(Parameterization p) {
  SlConfig cfg;
  if (p == Parameterization::kGnn) cfg.eta = 1e-3;
  return cfg;
}

namespace {

// Replays ground-truth routes and records (features, label) pairs.
class LabelPolicy : public Policy {
 public:
  explicit LabelPolicy(const Model& model) : model_(model) {}
  std::size_t choose(const Decision& decision, Rng&) override {
    std::size_t label;
    try {
      label = replay_choice(decision.state, decision.parcel, decision.actions);
    } catch (const std::logic_error& e) {
      spdlog::warn("sl: skipping sample ({})", e.what());
      ++skipped;
      return greedy_choice(decision.state, decision.parcel, decision.actions);
    }
    Sample s = model_.featurize(decision);
    s.action = label;
    s.behavior.assign(decision.actions.size(), 1.0 / static_cast<double>(decision.actions.size()));
    samples.push_back(std::move(s));
    return label;
  }

  std::vector<Sample> samples;
  int skipped = 0;

 private:
  const Model& model_;
};

}  // namespace

SlResult train_supervised(const EnvConfig& env_in, const SlConfig& cfg,
                          Parameterization p, std::uint64_t seed) {
  if (cfg.rollouts < 1 || cfg.epochs < 1 || cfg.minibatch < 1 ||
      cfg.radius < 1 || !(cfg.eta > 0.0)) {
    throw std::invalid_argument("sl config: values must be positive");
  }
  EnvConfig env = env_in;
  env.strategy = RoutingStrategy::kOneStep;
  SlResult result;
  result.model = make_model(p, cfg.radius, seed);
  Model& model = *result.model;
  Optimizer opt(cfg.optimizer, cfg.eta, model.actor_flat().size());
  VectorXd theta = model.actor_flat();

  Rng seed_stream = make_rng(seed, 51);
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg.rollouts));
  for (auto& s : seeds) s = seed_stream();
  Rng rng = make_rng(seed, 52);
  const double alpha = model.alpha();
  bool first = true;

  // Episodes are regenerated each epoch instead of cached, so memory stays
  // bounded by one episode's samples.
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(seeds.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double total_loss = 0.0;
    long count = 0;
    for (std::size_t ep : order) {
      LabelPolicy labels(model);
      Rng ep_rng = make_rng(seeds[ep], 5);
      run_episode(reset(env, seeds[ep]), env, labels, ep_rng);
      if (epoch == 0) {
        result.report.samples += static_cast<int>(labels.samples.size());
        result.report.skipped += labels.skipped;
      }
      auto& data = labels.samples;
      std::shuffle(data.begin(), data.end(), rng);
      for (std::size_t start = 0; start < data.size();
           start += static_cast<std::size_t>(cfg.minibatch)) {
        const std::size_t end =
            std::min(data.size(), start + static_cast<std::size_t>(cfg.minibatch));
        VectorXd grad = VectorXd::Zero(theta.size());
        double loss = 0.0;
        double log_n = 0.0;
        for (std::size_t i = start; i < end; ++i) {
          const Sample& s = data[i];
          auto pi = model.distribution(s);
          loss -= std::log(pi[s.action]);
          log_n += std::log(static_cast<double>(pi.size()));
          std::vector<double> up(pi.size());
          for (std::size_t k = 0; k < pi.size(); ++k) {
            up[k] = alpha * ((k == s.action ? 1.0 : 0.0) - pi[k]);
          }
          grad += model.actor_gradient(s, up);
        }
        const double n = static_cast<double>(end - start);
        if (first) {
          result.report.initial_loss = loss / n;
          result.report.initial_log_actions = log_n / n;
          first = false;
        }
        total_loss += loss;
        count += static_cast<long>(end - start);
        opt.ascend(theta, grad / n);
        model.set_actor_flat(theta);
      }
    }
    const double mean = count > 0 ? total_loss / static_cast<double>(count) : 0.0;
    result.report.epoch_loss.push_back(mean);
    spdlog::info("sl {} epoch {}: loss {:.4f}", to_string(p), epoch, mean);
  }
  return result;
}

}  // namespace midmile
