#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "midmile/features.hpp"

namespace midmile {

// Two-layer perceptron: out = W2 relu(W1 x + b1) + b2.
struct Mlp {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  Mlp() = default;
  Mlp(int in, int hidden, int out);

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int out_dim() const { return static_cast<int>(w2.rows()); }
  std::size_t size() const;
};

struct GnnConfig {
  int latent = 16;
  int hidden = 16;
  int steps = 3;
};

// Encode-process-decode network over feature graphs. The processor weights
// are shared across steps.
struct GnnParams {
  GnnConfig config;
  Mlp enc_edge;
  Mlp enc_node;
  Mlp proc_edge;  // [e, v_send, v_recv] -> delta e
  Mlp proc_node;  // [v, sum of incoming e] -> delta v
  Mlp dec_edge;   // e -> scalar

  GnnParams() : GnnParams(GnnConfig{}) {}
  explicit GnnParams(const GnnConfig& config);  // all zeros

  std::size_t size() const;
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& values);
};

// Uniform Glorot initialization.
GnnParams init_gnn(const GnnConfig& config, std::uint64_t seed);

// Compact network input; the feature graph minus bookkeeping.
struct GraphInput {
  Eigen::MatrixXd nodes;  // kNodeFeatures x N
  Eigen::MatrixXd edges;  // kEdgeFeatures x M
  std::vector<int> senders;
  std::vector<int> receivers;
  std::vector<std::int64_t> keys;  // aggregation order
  std::vector<int> action_edges;   // edge index per action
};

// Throws std::invalid_argument if an action has no edge in the graph.
GraphInput to_graph_input(const FeatureGraph& fg);

struct GnnCache {
  struct MlpTrace {
    Eigen::MatrixXd in;      // one column per item
    Eigen::MatrixXd hidden;  // post-activation
  };
  MlpTrace enc_edge, enc_node, dec_edge;
  std::vector<MlpTrace> proc_edge, proc_node;
  std::vector<int> order;  // edge indices sorted by key
};

// One output per action. Throws if there are no actions.
Eigen::VectorXd gnn_forward(const GnnParams& params, const GraphInput& g,
                            GnnCache* cache = nullptr);

// Gradient of sum_i upstream[i] * output[i] with respect to every parameter.
GnnParams gnn_backward(const GnnParams& params, const GraphInput& g,
                       const GnnCache& cache, const Eigen::VectorXd& upstream);

nlohmann::json gnn_to_json(const GnnParams& params);
GnnParams gnn_from_json(const nlohmann::json& doc);

}  // namespace midmile
