#include "midmile/policies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace midmile {

std::vector<double> softmax(std::span<const double> logits, double alpha) {
  if (logits.empty()) throw std::invalid_argument("softmax of empty logits");
  double top = -std::numeric_limits<double>::infinity();
  for (double l : logits) top = std::max(top, alpha * l);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(alpha * logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
  return pick(rng);
}

std::size_t argmax_index(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty list");
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

std::size_t RandomPolicy::choose(const Decision& decision, Rng& rng) {
  if (decision.actions.empty()) {
    throw std::invalid_argument("random policy: no actions");
  }
  std::uniform_int_distribution<std::size_t> pick(0,
                                                  decision.actions.size() - 1);
  return pick(rng);
}

std::size_t greedy_choice(const MdpState& state, ParcelId parcel,
                          std::span<const EdgeId> actions) {
  if (actions.empty()) throw std::invalid_argument("greedy policy: no actions");
  const HubId goal = state.parcel(parcel).goal.hub;
  const ResistanceMatrix& r = state.resistance();
  std::size_t best = 0;
  double best_r = std::numeric_limits<double>::infinity();
  EdgeId best_id = std::numeric_limits<EdgeId>::max();
  for (std::size_t i = 0; i < actions.size(); ++i) {
    double d = r(state.edge(actions[i]).receiver.hub, goal);
    // Symmetric hubs give equal distances up to rounding; treat as ties.
    const double tol = 1e-9 * std::max(std::abs(d), std::abs(best_r));
    const bool tie = std::isfinite(best_r) && std::abs(d - best_r) <= tol;
    if ((!tie && d < best_r) || (tie && actions[i] < best_id)) {
      best = i;
      best_r = d;
      best_id = actions[i];
    }
  }
  return best;
}

std::size_t GreedyPolicy::choose(const Decision& decision, Rng&) {
  return greedy_choice(decision.state, decision.parcel, decision.actions);
}

std::size_t replay_choice(const MdpState& state, ParcelId parcel,
                          std::span<const EdgeId> actions) {
  const ParcelRecord& p = state.parcel(parcel);
  const std::vector<EdgeId> route = expand_route(state, p.route);
  for (std::size_t k = 0; k < actions.size(); ++k) {
    std::vector<EdgeId> hops = expand_edge(state, actions[k]);
    auto at = std::find(route.begin(), route.end(), hops.front());
    if (at == route.end() || route.end() - at < std::ssize(hops)) continue;
    if (std::equal(hops.begin(), hops.end(), at)) return k;
  }
  throw std::logic_error("replay: no action continues the route of parcel " +
                         std::to_string(parcel) + " at " +
                         to_string(p.current));
}

std::size_t ReplayPolicy::choose(const Decision& decision, Rng&) {
  return replay_choice(decision.state, decision.parcel, decision.actions);
}

double linear_q(const LinearParams& params, const LinearVector& x) {
  double q = 0.0;
  for (std::size_t i = 0; i < kLinearFeatures; ++i) q += params.phi[i] * x[i];
  return q;
}

double linear_logit(const LinearParams& params, const LinearVector& x) {
  double l = 0.0;
  for (std::size_t i = 0; i < kLinearFeatures; ++i) l += params.theta[i] * x[i];
  return l;
}

std::vector<double> linear_distribution(const LinearParams& params,
                                        std::span<const LinearVector> rows) {
  std::vector<double> logits;
  logits.reserve(rows.size());
  for (const LinearVector& x : rows) logits.push_back(linear_logit(params, x));
  return softmax(logits, params.alpha);
}

nlohmann::json linear_to_json(const LinearParams& params) {
  return nlohmann::json{{"format", "midmile-linear-v1"},
                        {"theta", params.theta},
                        {"phi", params.phi},
                        {"alpha", params.alpha}};
}

LinearParams linear_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "midmile-linear-v1") {
    throw std::invalid_argument("linear params: format must be midmile-linear-v1");
  }
  LinearParams p;
  auto theta = doc.at("theta").get<std::vector<double>>();
  auto phi = doc.at("phi").get<std::vector<double>>();
  if (theta.size() != kLinearFeatures || phi.size() != kLinearFeatures) {
    throw std::invalid_argument("linear params: theta and phi need " +
                                std::to_string(kLinearFeatures) + " entries");
  }
  std::copy(theta.begin(), theta.end(), p.theta.begin());
  std::copy(phi.begin(), phi.end(), p.phi.begin());
  p.alpha = doc.value("alpha", 0.1);
  return p;
}

std::size_t LinearPolicy::choose(const Decision& decision, Rng& rng) {
  auto rows =
      linear_feature_rows(decision.state, decision.parcel, decision.actions);
  auto probs = linear_distribution(params_, rows);
  return greedy_ ? argmax_index(probs) : sample_index(probs, rng);
}

std::vector<double> gnn_distribution(const GnnPolicyParams& params,
                                     const GraphInput& g) {
  Eigen::VectorXd logits = gnn_forward(params.actor, g);
  return softmax(std::span<const double>(logits.data(),
                                         static_cast<std::size_t>(logits.size())),
                 params.alpha);
}

nlohmann::json gnn_policy_to_json(const GnnPolicyParams& params) {
  return nlohmann::json{{"format", "midmile-gnn-v1"},
                        {"alpha", params.alpha},
                        {"K", params.radius},
                        {"actor", gnn_to_json(params.actor)},
                        {"critic", gnn_to_json(params.critic)}};
}

GnnPolicyParams gnn_policy_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "midmile-gnn-v1") {
    throw std::invalid_argument("gnn params: format must be midmile-gnn-v1");
  }
  GnnPolicyParams p;
  if (!doc.contains("actor")) {
    p.actor = gnn_from_json(doc);
    p.critic = GnnParams(p.actor.config);
    return p;
  }
  p.actor = gnn_from_json(doc.at("actor"));
  p.critic = gnn_from_json(doc.at("critic"));
  p.alpha = doc.value("alpha", 0.1);
  p.radius = doc.value("K", 2);
  return p;
}

std::size_t GnnPolicy::choose(const Decision& decision, Rng& rng) {
  FeatureGraph fg = extract_feature_graph(decision.state, decision.parcel,
                                          std::max(1, params_.radius),
                                          decision.actions);
  auto probs = gnn_distribution(params_, to_graph_input(fg));
  return greedy_ ? argmax_index(probs) : sample_index(probs, rng);
}

namespace {

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

}  // namespace

std::unique_ptr<Policy> make_policy(const std::string& spec) {
  if (spec == "random") return std::make_unique<RandomPolicy>();
  if (spec == "greedy") return std::make_unique<GreedyPolicy>();
  if (spec == "replay") return std::make_unique<ReplayPolicy>();
  auto colon = spec.find(':');
  if (colon != std::string::npos) {
    std::string kind = spec.substr(0, colon);
    std::string path = spec.substr(colon + 1);
    if (kind == "linear" || kind == "linear-argmax") {
      return std::make_unique<LinearPolicy>(linear_from_json(read_json(path)),
                                            kind == "linear-argmax");
    }
    if (kind == "gnn" || kind == "gnn-argmax") {
      return std::make_unique<GnnPolicy>(gnn_policy_from_json(read_json(path)),
                                         kind == "gnn-argmax");
    }
  }
  throw std::invalid_argument("unknown policy '" + spec + "'");
}

}  // namespace midmile
