#include <doctest.h>

#include <numeric>

#include "midmile/gnn.hpp"
#include "support.hpp"

using namespace midmile;

namespace {

GraphInput random_input(Rng& rng) {
  std::uniform_int_distribution<int> nodes_d(2, 6), edges_d(1, 10);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = nodes_d(rng), m = edges_d(rng);
  GraphInput g;
  g.nodes = Eigen::MatrixXd::NullaryExpr(kNodeFeatures, n, [&] { return normal(rng); });
  g.edges = Eigen::MatrixXd::NullaryExpr(kEdgeFeatures, m, [&] { return normal(rng); });
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int e = 0; e < m; ++e) {
    g.senders.push_back(pick(rng));
    g.receivers.push_back(pick(rng));
    g.keys.push_back(3 * e + 1);
  }
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int actions = std::uniform_int_distribution<int>(1, m)(rng);
  g.action_edges.assign(idx.begin(), idx.begin() + actions);
  return g;
}

// Same graph with node and edge storage shuffled.
GraphInput permuted(const GraphInput& g, Rng& rng) {
  const int n = static_cast<int>(g.nodes.cols()), m = static_cast<int>(g.edges.cols());
  std::vector<int> pn(n), pe(m);  // old index -> new index
  std::iota(pn.begin(), pn.end(), 0);
  std::iota(pe.begin(), pe.end(), 0);
  std::shuffle(pn.begin(), pn.end(), rng);
  std::shuffle(pe.begin(), pe.end(), rng);
  GraphInput out;
  out.nodes.resize(g.nodes.rows(), n);
  out.edges.resize(g.edges.rows(), m);
  out.senders.resize(m);
  out.receivers.resize(m);
  out.keys.resize(m);
  for (int i = 0; i < n; ++i) out.nodes.col(pn[i]) = g.nodes.col(i);
  for (int e = 0; e < m; ++e) {
    out.edges.col(pe[e]) = g.edges.col(e);
    out.senders[pe[e]] = pn[g.senders[e]];
    out.receivers[pe[e]] = pn[g.receivers[e]];
    out.keys[pe[e]] = g.keys[e];
  }
  for (int a : g.action_edges) out.action_edges.push_back(pe[a]);
  return out;
}

double objective(const GnnParams& p, const GraphInput& g, const Eigen::VectorXd& up) {
  return up.dot(gnn_forward(p, g));
}

}  // namespace

TEST_CASE("parameter shapes and flattening") {
  GnnParams p = init_gnn({}, 1);
  CHECK(p.enc_edge.in_dim() == static_cast<int>(kEdgeFeatures));
  CHECK(p.enc_node.in_dim() == static_cast<int>(kNodeFeatures));
  CHECK(p.proc_edge.in_dim() == 3 * p.config.latent);
  CHECK(p.proc_node.in_dim() == 2 * p.config.latent);
  CHECK(p.dec_edge.out_dim() == 1);
  Eigen::VectorXd flat = p.flat();
  CHECK(static_cast<std::size_t>(flat.size()) == p.size());
  CHECK(flat.allFinite());
  CHECK(flat.cwiseAbs().maxCoeff() > 0.0);
  GnnParams q(p.config);
  CHECK(q.flat().isZero());
  q.set_flat(flat);
  CHECK(q.flat() == flat);
  CHECK(init_gnn({}, 1).flat() == flat);
  CHECK(init_gnn({}, 2).flat() != flat);
  CHECK_THROWS(q.set_flat(Eigen::VectorXd::Zero(3)));
}

TEST_CASE("backward matches central finite differences") {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    GnnConfig cfg;
    if (trial % 2 == 1) cfg = {4, 5, 2};
    GnnParams p = init_gnn(cfg, 100 + trial);
    // Nonzero biases exercise every term.
    Eigen::VectorXd flat = p.flat();
    std::normal_distribution<double> normal(0.0, 0.1);
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] += normal(rng);
    p.set_flat(flat);

    GraphInput g = random_input(rng);
    Eigen::VectorXd up = Eigen::VectorXd::NullaryExpr(
        static_cast<Eigen::Index>(g.action_edges.size()), [&] { return normal(rng) * 10; });
    GnnCache cache;
    Eigen::VectorXd out = gnn_forward(p, g, &cache);
    CHECK(out.size() == static_cast<Eigen::Index>(g.action_edges.size()));
    Eigen::VectorXd grad = gnn_backward(p, g, cache, up).flat();

    const double h = 1e-6;
    Eigen::VectorXd fd(flat.size());
    GnnParams probe = p;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Eigen::VectorXd x = flat;
      x[i] += h;
      probe.set_flat(x);
      double plus = objective(probe, g, up);
      x[i] -= 2 * h;
      probe.set_flat(x);
      double minus = objective(probe, g, up);
      fd[i] = (plus - minus) / (2 * h);
    }
    const double scale = std::max({grad.norm(), fd.norm(), 1e-12});
    CHECK((grad - fd).norm() / scale < 1e-4);
  }
}

TEST_CASE("zero parameters give equal outputs") {
  Rng rng = make_rng(8);
  GnnParams zero(GnnConfig{});
  for (int trial = 0; trial < 10; ++trial) {
    GraphInput g = random_input(rng);
    Eigen::VectorXd out = gnn_forward(zero, g);
    CHECK(out.size() == static_cast<Eigen::Index>(g.action_edges.size()));
    CHECK((out.array() == out[0]).all());
  }
}

TEST_CASE("zero upstream gives zero gradient") {
  Rng rng = make_rng(9);
  GnnParams p = init_gnn({}, 3);
  GraphInput g = random_input(rng);
  GnnCache cache;
  gnn_forward(p, g, &cache);
  Eigen::VectorXd up = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.action_edges.size()));
  CHECK(gnn_backward(p, g, cache, up).flat().isZero(0.0));
}

TEST_CASE("permutation equivariance is exact") {
  Rng rng = make_rng(10);
  GnnParams p = init_gnn({}, 4);
  for (int trial = 0; trial < 20; ++trial) {
    GraphInput g = random_input(rng);
    GraphInput h = permuted(g, rng);
    CHECK(gnn_forward(p, g) == gnn_forward(p, h));
  }
}

TEST_CASE("processor residual is the identity when its MLPs output zero") {
  Rng rng = make_rng(11);
  GnnParams p = init_gnn({}, 5);
  for (Mlp* m : {&p.proc_edge, &p.proc_node}) {
    m->w2.setZero();
    m->b2.setZero();
  }
  GnnParams none = p;
  none.config.steps = 0;
  for (int trial = 0; trial < 5; ++trial) {
    GraphInput g = random_input(rng);
    CHECK(gnn_forward(p, g) == gnn_forward(none, g));
  }
}

TEST_CASE("forward is deterministic and validates input") {
  Rng rng = make_rng(12);
  GnnParams p = init_gnn({}, 6);
  GraphInput g = random_input(rng);
  CHECK(gnn_forward(p, g) == gnn_forward(p, g));
  GraphInput empty = g;
  empty.action_edges.clear();
  CHECK_THROWS(gnn_forward(p, empty));

  MdpState s = support::lattice(2, 4);
  s.add_parcel({0, 1.0, {0, 1}, {1, 3}, {}, ParcelStatus::kInTransit});
  CHECK_THROWS_AS(to_graph_input(extract_feature_graph(s, 0, 0)), std::invalid_argument);
  GraphInput real = to_graph_input(extract_feature_graph(s, 0, 1));
  CHECK(real.nodes.rows() == static_cast<Eigen::Index>(kNodeFeatures));
  CHECK(real.edges.rows() == static_cast<Eigen::Index>(kEdgeFeatures));
  CHECK(gnn_forward(p, real).size() == 1);
}

TEST_CASE("parameters round trip through JSON") {
  GnnParams p = init_gnn({8, 6, 2}, 7);
  nlohmann::json doc = gnn_to_json(p);
  CHECK(doc["format"] == "midmile-gnn-v1");
  GnnParams q = gnn_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(q.config.latent == 8);
  CHECK(q.config.hidden == 6);
  CHECK(q.config.steps == 2);
  CHECK(q.flat() == p.flat());
  nlohmann::json bad = doc;
  bad["format"] = "other";
  CHECK_THROWS(gnn_from_json(bad));
}
