#include "midmile/gnn.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "midmile/rng.hpp"

namespace midmile {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Mlp::Mlp(int in, int hidden, int out)
    : w1(MatrixXd::Zero(hidden, in)),
      b1(VectorXd::Zero(hidden)),
      w2(MatrixXd::Zero(out, hidden)),
      b2(VectorXd::Zero(out)) {}

std::size_t Mlp::size() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() +
                                  b2.size());
}

GnnParams::GnnParams(const GnnConfig& cfg)
    : config(cfg),
      enc_edge(static_cast<int>(kEdgeFeatures), cfg.hidden, cfg.latent),
      enc_node(static_cast<int>(kNodeFeatures), cfg.hidden, cfg.latent),
      proc_edge(3 * cfg.latent, cfg.hidden, cfg.latent),
      proc_node(2 * cfg.latent, cfg.hidden, cfg.latent),
      dec_edge(cfg.latent, cfg.hidden, 1) {
  if (cfg.latent < 1 || cfg.hidden < 1 || cfg.steps < 0) {
    throw std::invalid_argument("gnn: latent, hidden >= 1 and steps >= 0");
  }
}

namespace {

template <typename Fn>
void for_each_mlp(GnnParams& p, Fn fn) {
  fn("enc_edge", p.enc_edge);
  fn("enc_node", p.enc_node);
  fn("proc_edge", p.proc_edge);
  fn("proc_node", p.proc_node);
  fn("dec_edge", p.dec_edge);
}

template <typename Fn>
void for_each_tensor(Mlp& m, Fn fn) {
  fn("w1", m.w1);
  fn("b1", m.b1);
  fn("w2", m.w2);
  fn("b2", m.b2);
}

}  // namespace

std::size_t GnnParams::size() const {
  return enc_edge.size() + enc_node.size() + proc_edge.size() +
         proc_node.size() + dec_edge.size();
}

VectorXd GnnParams::flat() const {
  VectorXd out(static_cast<Eigen::Index>(size()));
  Eigen::Index at = 0;
  GnnParams& self = const_cast<GnnParams&>(*this);
  for_each_mlp(self, [&](const char*, Mlp& m) {
    for_each_tensor(m, [&](const char*, auto& t) {
      out.segment(at, t.size()) = t.reshaped();
      at += t.size();
    });
  });
  return out;
}

void GnnParams::set_flat(const VectorXd& values) {
  if (values.size() != static_cast<Eigen::Index>(size())) {
    throw std::invalid_argument("gnn: flat parameter size mismatch");
  }
  Eigen::Index at = 0;
  for_each_mlp(*this, [&](const char*, Mlp& m) {
    for_each_tensor(m, [&](const char*, auto& t) {
      t.reshaped() = values.segment(at, t.size());
      at += t.size();
    });
  });
}

GnnParams init_gnn(const GnnConfig& config, std::uint64_t seed) {
  GnnParams p(config);
  Rng rng = make_rng(seed, 11);
  for_each_mlp(p, [&](const char*, Mlp& m) {
    for (MatrixXd* w : {&m.w1, &m.w2}) {
      double a = std::sqrt(6.0 / static_cast<double>(w->rows() + w->cols()));
      std::uniform_real_distribution<double> u(-a, a);
      for (Eigen::Index i = 0; i < w->size(); ++i) w->data()[i] = u(rng);
    }
  });
  return p;
}

GraphInput to_graph_input(const FeatureGraph& fg) {
  GraphInput g;
  const auto n = static_cast<Eigen::Index>(fg.nodes.size());
  const auto m = static_cast<Eigen::Index>(fg.edges.size());
  g.nodes.resize(static_cast<Eigen::Index>(kNodeFeatures), n);
  g.edges.resize(static_cast<Eigen::Index>(kEdgeFeatures), m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = fg.nodes[static_cast<std::size_t>(i)].features;
    for (std::size_t k = 0; k < kNodeFeatures; ++k) {
      g.nodes(static_cast<Eigen::Index>(k), i) = f[k];
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const FeatureEdge& e = fg.edges[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < kEdgeFeatures; ++k) {
      g.edges(static_cast<Eigen::Index>(k), j) = e.features[k];
    }
    g.senders.push_back(e.sender);
    g.receivers.push_back(e.receiver);
    g.keys.push_back(e.key);
  }
  for (int idx : fg.action_edges) {
    if (idx < 0) {
      throw std::invalid_argument("gnn: action outside feature graph");
    }
    g.action_edges.push_back(idx);
  }
  return g;
}

namespace {

using Trace = GnnCache::MlpTrace;

// Column-at-a-time so every item follows the same arithmetic path no matter
// where it is stored.
MatrixXd mlp_forward(const Mlp& m, const MatrixXd& x, Trace* trace) {
  MatrixXd out(m.out_dim(), x.cols());
  MatrixXd hidden(m.w1.rows(), x.cols());
  VectorXd col(x.rows());
  VectorXd h(m.w1.rows());
  VectorXd y(m.w2.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    col = x.col(j);
    h.noalias() = m.w1 * col;
    h = (h + m.b1).cwiseMax(0.0);
    y.noalias() = m.w2 * h;
    out.col(j) = y + m.b2;
    hidden.col(j) = h;
  }
  if (trace != nullptr) {
    trace->in = x;
    trace->hidden = std::move(hidden);
  }
  return out;
}

// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
MatrixXd mlp_backward(const Mlp& m, const Trace& trace, const MatrixXd& dy,
                      Mlp& grad) {
  grad.b2 += dy.rowwise().sum();
  grad.w2.noalias() += dy * trace.hidden.transpose();
  MatrixXd dh = m.w2.transpose() * dy;
  dh = dh.cwiseProduct((trace.hidden.array() > 0.0).cast<double>().matrix());
  grad.b1 += dh.rowwise().sum();
  grad.w1.noalias() += dh * trace.in.transpose();
  return m.w1.transpose() * dh;
}

VectorXd forward_impl(const GnnParams& p, const GraphInput& g,
                      GnnCache* cache) {
  if (g.action_edges.empty()) {
    throw std::invalid_argument("gnn: forward needs at least one action");
  }
  const int latent = p.config.latent;
  const Eigen::Index m = g.edges.cols();
  const Eigen::Index n = g.nodes.cols();

  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return g.keys[static_cast<std::size_t>(a)] <
           g.keys[static_cast<std::size_t>(b)];
  });

  Trace t_ee, t_en;
  MatrixXd e = mlp_forward(p.enc_edge, g.edges, cache ? &t_ee : nullptr);
  MatrixXd v = mlp_forward(p.enc_node, g.nodes, cache ? &t_en : nullptr);

  std::vector<Trace> t_pe(static_cast<std::size_t>(p.config.steps));
  std::vector<Trace> t_pn(static_cast<std::size_t>(p.config.steps));
  MatrixXd ze(3 * latent, m);
  MatrixXd zv(2 * latent, n);
  for (int s = 0; s < p.config.steps; ++s) {
    for (Eigen::Index j = 0; j < m; ++j) {
      ze.col(j).head(latent) = e.col(j);
      ze.col(j).segment(latent, latent) = v.col(g.senders[static_cast<std::size_t>(j)]);
      ze.col(j).tail(latent) = v.col(g.receivers[static_cast<std::size_t>(j)]);
    }
    e += mlp_forward(p.proc_edge, ze,
                     cache ? &t_pe[static_cast<std::size_t>(s)] : nullptr);
    MatrixXd agg = MatrixXd::Zero(latent, n);
    for (int j : order) agg.col(g.receivers[static_cast<std::size_t>(j)]) += e.col(j);
    zv.topRows(latent) = v;
    zv.bottomRows(latent) = agg;
    v += mlp_forward(p.proc_node, zv,
                     cache ? &t_pn[static_cast<std::size_t>(s)] : nullptr);
  }

  MatrixXd picked(latent, static_cast<Eigen::Index>(g.action_edges.size()));
  for (std::size_t i = 0; i < g.action_edges.size(); ++i) {
    picked.col(static_cast<Eigen::Index>(i)) = e.col(g.action_edges[i]);
  }
  Trace t_dec;
  MatrixXd out = mlp_forward(p.dec_edge, picked, cache ? &t_dec : nullptr);
  if (cache != nullptr) {
    cache->enc_edge = std::move(t_ee);
    cache->enc_node = std::move(t_en);
    cache->dec_edge = std::move(t_dec);
    cache->proc_edge = std::move(t_pe);
    cache->proc_node = std::move(t_pn);
    cache->order = std::move(order);
  }
  return out.row(0).transpose();
}

}  // namespace

VectorXd gnn_forward(const GnnParams& params, const GraphInput& g,
                     GnnCache* cache) {
  return forward_impl(params, g, cache);
}

GnnParams gnn_backward(const GnnParams& p, const GraphInput& g,
                       const GnnCache& cache, const VectorXd& upstream) {
  const int latent = p.config.latent;
  const Eigen::Index m = g.edges.cols();
  const Eigen::Index n = g.nodes.cols();
  if (upstream.size() != static_cast<Eigen::Index>(g.action_edges.size())) {
    throw std::invalid_argument("gnn: upstream size mismatch");
  }
  GnnParams grad(p.config);

  MatrixXd de = MatrixXd::Zero(latent, m);
  MatrixXd dv = MatrixXd::Zero(latent, n);
  MatrixXd dpicked = mlp_backward(p.dec_edge, cache.dec_edge,
                                  upstream.transpose(), grad.dec_edge);
  for (std::size_t i = 0; i < g.action_edges.size(); ++i) {
    de.col(g.action_edges[i]) += dpicked.col(static_cast<Eigen::Index>(i));
  }

  for (int s = p.config.steps - 1; s >= 0; --s) {
    const auto su = static_cast<std::size_t>(s);
    MatrixXd dzv =
        mlp_backward(p.proc_node, cache.proc_node[su], dv, grad.proc_node);
    dv += dzv.topRows(latent);
    for (Eigen::Index j = 0; j < m; ++j) {
      de.col(j) += dzv.bottomRows(latent).col(g.receivers[static_cast<std::size_t>(j)]);
    }
    MatrixXd dze =
        mlp_backward(p.proc_edge, cache.proc_edge[su], de, grad.proc_edge);
    de += dze.topRows(latent);
    for (Eigen::Index j = 0; j < m; ++j) {
      dv.col(g.senders[static_cast<std::size_t>(j)]) +=
          dze.middleRows(latent, latent).col(j);
      dv.col(g.receivers[static_cast<std::size_t>(j)]) +=
          dze.bottomRows(latent).col(j);
    }
  }
  mlp_backward(p.enc_edge, cache.enc_edge, de, grad.enc_edge);
  mlp_backward(p.enc_node, cache.enc_node, dv, grad.enc_node);
  return grad;
}

nlohmann::json gnn_to_json(const GnnParams& params) {
  using nlohmann::json;
  json doc;
  doc["format"] = "midmile-gnn-v1";
  doc["latent"] = params.config.latent;
  doc["hidden"] = params.config.hidden;
  doc["steps"] = params.config.steps;
  json layers = json::object();
  GnnParams& p = const_cast<GnnParams&>(params);
  for_each_mlp(p, [&](const char* name, Mlp& m) {
    json layer = json::object();
    for_each_tensor(m, [&](const char* tname, auto& t) {
      std::vector<double> data;
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) data.push_back(t(r, c));
      }
      layer[tname] = json{{"shape", {t.rows(), t.cols()}}, {"data", data}};
    });
    layers[name] = std::move(layer);
  });
  doc["layers"] = std::move(layers);
  return doc;
}

GnnParams gnn_from_json(const nlohmann::json& doc) {
  if (doc.value("format", "") != "midmile-gnn-v1") {
    throw std::invalid_argument("gnn params: format must be midmile-gnn-v1");
  }
  GnnConfig cfg;
  cfg.latent = doc.at("latent").get<int>();
  cfg.hidden = doc.at("hidden").get<int>();
  cfg.steps = doc.at("steps").get<int>();
  GnnParams p(cfg);
  const auto& layers = doc.at("layers");
  for_each_mlp(p, [&](const char* name, Mlp& m) {
    const auto& layer = layers.at(name);
    for_each_tensor(m, [&](const char* tname, auto& t) {
      const auto& entry = layer.at(tname);
      auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
      auto data = entry.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != t.rows() || shape[1] != t.cols() ||
          static_cast<Eigen::Index>(data.size()) != t.size()) {
        throw std::invalid_argument(std::string("gnn params: bad shape for ") +
                                    name + "." + tname);
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = data[k++];
      }
    });
  });
  return p;
}

}  // namespace midmile
