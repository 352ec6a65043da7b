#include <doctest.h>

#include "ccmia/gnn.hpp"
#include "ccmia/rng.hpp"

using namespace ccmia;

namespace {

Graph random_graph(int n, int d, int c, double p_edge, std::uint64_t seed) {
  Graph g;
  g.num_nodes = n;
  g.num_features = d;
  g.num_classes = c;
  Rng rng(seed);
  g.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < d; ++f) g.features(i, f) = rng.normal();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < p_edge) g.edges.emplace_back(i, j);
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) g.labels[i] = static_cast<int>(rng.uniform_int(c));
  g.train_mask.assign(n, 1);
  g.val_mask.assign(n, 0);
  g.test_mask.assign(n, 0);
  return g;
}

}  // namespace

TEST_SUITE("gnn") {

TEST_CASE("zero network predicts the uniform distribution") {
  Graph g = random_graph(6, 3, 4, 0.4, 1);
  ModelParams p = init_params(3, 5, 4, PropagationMode::sym_norm_adj_self_loops, 2);
  p.W1.setZero();
  p.b1.setZero();
  p.W2.setZero();
  p.b2.setZero();
  ForwardResult f = forward(p, g);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int c = 0; c < 4; ++c)
      CHECK(f.probs(i, c) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("an isolated node reduces to a plain two-layer mlp") {
  Graph g;
  g.num_nodes = 1;
  g.num_features = 2;
  g.num_classes = 2;
  g.features.resize(1, 2);
  g.features << 0.7, -1.3;
  g.labels = {1};
  g.train_mask = {1};
  g.val_mask = {0};
  g.test_mask = {0};

  ModelParams p;
  p.mode = PropagationMode::sym_norm_adj_self_loops;
  p.hidden = 2;
  p.W1.resize(2, 2);
  p.W1 << 0.5, -0.25, 1.0, 0.75;
  p.b1.resize(2);
  p.b1 << 0.1, -0.2;
  p.W2.resize(2, 2);
  p.W2 << 0.3, -0.6, 0.2, 0.4;
  p.b2.resize(2);
  p.b2 << 0.05, -0.05;

  // hand computation with P = [[1]]
  double z1a = 0.7 * 0.5 + (-1.3) * 1.0 + 0.1;
  double z1b = 0.7 * (-0.25) + (-1.3) * 0.75 + (-0.2);
  double e1a = std::max(z1a, 0.0), e1b = std::max(z1b, 0.0);
  double l0 = e1a * 0.3 + e1b * 0.2 + 0.05;
  double l1 = e1a * (-0.6) + e1b * 0.4 - 0.05;

  ForwardResult f = forward(p, g);
  CHECK(f.logits(0, 0) == doctest::Approx(l0).epsilon(1e-12));
  CHECK(f.logits(0, 1) == doctest::Approx(l1).epsilon(1e-12));
}

TEST_CASE("forward is equivariant under node permutation") {
  Graph g = random_graph(7, 3, 3, 0.5, 5);
  ModelParams p = init_params(3, 4, 3, PropagationMode::sym_norm_adj_self_loops, 6);
  ForwardResult f = forward(p, g);

  int n = g.num_nodes;
  Graph h = g;
  for (int i = 0; i < n; ++i) {
    h.features.row(i) = g.features.row(n - 1 - i);
    h.labels[i] = g.labels[n - 1 - i];
  }
  h.edges.clear();
  for (auto [a, b] : g.edges) {
    int pa = n - 1 - a, pb = n - 1 - b;
    h.edges.emplace_back(std::min(pa, pb), std::max(pa, pb));
  }
  std::sort(h.edges.begin(), h.edges.end());
  ForwardResult fh = forward(p, h);
  for (int i = 0; i < n; ++i)
    CHECK((fh.probs.row(i) - f.probs.row(n - 1 - i)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("saturated one-hot logits drive the loss to zero") {
  Graph g;
  g.num_nodes = 1;
  g.num_features = 1;
  g.num_classes = 2;
  g.features.resize(1, 1);
  g.features << 1.0;
  g.labels = {0};
  g.train_mask = {1};
  g.val_mask = {0};
  g.test_mask = {0};
  ModelParams p;
  p.mode = PropagationMode::sym_norm_adj_self_loops;
  p.hidden = 1;
  p.W1.resize(1, 1);
  p.W1 << 50.0;
  p.b1 = Eigen::VectorXd::Zero(1);
  p.W2.resize(1, 2);
  p.W2 << 1.0, -1.0;  // logits (50, -50)
  p.b2 = Eigen::VectorXd::Zero(2);
  LossGrads lg = loss_and_grads(p, g, g.train_mask);
  CHECK(lg.loss < 1e-6);
  CHECK(lg.loss >= 0.0);
}

TEST_CASE("zero parameters on a binary task give ln 2") {
  Graph g = random_graph(5, 2, 2, 0.3, 8);
  ModelParams p = init_params(2, 3, 2, PropagationMode::sym_norm_adj_self_loops, 9);
  p.W1.setZero();
  p.b1.setZero();
  p.W2.setZero();
  p.b2.setZero();
  LossGrads lg = loss_and_grads(p, g, g.train_mask);
  CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("analytic gradients match central differences on a 12-node graph") {
  Graph g = random_graph(12, 4, 3, 0.3, 13);
  ModelParams p = init_params(4, 5, 3, PropagationMode::sym_norm_adj_self_loops, 14);
  CHECK(grad_check(p, g, g.train_mask, 1e-4) < 1e-4);
}

TEST_CASE("gradient agreement holds for both propagation modes") {
  for (auto mode : {PropagationMode::sym_norm_adj_self_loops,
                    PropagationMode::normalized_laplacian}) {
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
      Graph g = random_graph(9, 3, 3, 0.4, 20 + seed);
      ModelParams p = init_params(3, 4, 3, mode, 30 + seed);
      CHECK(grad_check(p, g, g.train_mask, 1e-5) < 1e-4);
    }
  }
}

TEST_CASE("grad_check rejects a zero step size") {
  Graph g = random_graph(4, 2, 2, 0.5, 40);
  ModelParams p = init_params(2, 3, 2, PropagationMode::sym_norm_adj_self_loops, 41);
  CHECK_THROWS_AS(grad_check(p, g, g.train_mask, 0.0), ConfigError);
}

TEST_CASE("flat loss surface: analytic and numeric gradients vanish together") {
  Graph g = random_graph(6, 2, 2, 0.4, 50);
  g.features.setZero();
  for (int i = 0; i < 6; ++i) g.labels[i] = 0;
  ModelParams p = init_params(2, 3, 2, PropagationMode::sym_norm_adj_self_loops, 51);
  p.W1.setZero();
  p.b1.setConstant(-1.0);  // embeddings all zero, so logits are constant in W2
  LossGrads lg = loss_and_grads(p, g, g.train_mask);
  CHECK(lg.grads.W2.cwiseAbs().maxCoeff() < 1e-12);
  // numeric route over every W2 entry agrees: the surface is flat there
  double eps = 1e-5;
  for (Eigen::Index i = 0; i < p.W2.size(); ++i) {
    ModelParams q = p;
    q.W2(i) += eps;
    double up = loss_and_grads(q, g, g.train_mask).loss;
    q.W2(i) -= 2 * eps;
    double dn = loss_and_grads(q, g, g.train_mask).loss;
    CHECK(std::abs((up - dn) / (2 * eps)) < 1e-9);
  }
}

TEST_CASE("first layer embedding equals the forward pass block bit for bit") {
  Graph g = random_graph(8, 3, 2, 0.4, 60);
  ModelParams p = init_params(3, 4, 2, PropagationMode::normalized_laplacian, 61);
  ForwardResult f = forward(p, g);
  CHECK(first_layer_embedding(p, g) == f.first_layer);
}

TEST_CASE("all-negative preactivations give a zero embedding") {
  Graph g = random_graph(5, 2, 2, 0.4, 70);
  ModelParams p = init_params(2, 3, 2, PropagationMode::sym_norm_adj_self_loops, 71);
  p.b1.setConstant(-1e6);
  CHECK(first_layer_embedding(p, g).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("softmax rows sum to one and the loss is nonnegative") {
  Graph g = random_graph(10, 3, 4, 0.3, 80);
  ModelParams p = init_params(3, 6, 4, PropagationMode::sym_norm_adj_self_loops, 81);
  ForwardResult f = forward(p, g);
  for (int i = 0; i < g.num_nodes; ++i)
    CHECK(f.probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(loss_and_grads(p, g, g.train_mask).loss >= 0.0);
}

TEST_CASE("a disconnected unmasked node changes neither loss nor gradients") {
  Graph g = random_graph(6, 3, 2, 0.5, 90);
  ModelParams p = init_params(3, 4, 2, PropagationMode::sym_norm_adj_self_loops, 91);
  LossGrads base = loss_and_grads(p, g, g.train_mask);

  Graph h = g;
  h.num_nodes += 1;
  h.features.conservativeResize(h.num_nodes, Eigen::NoChange);
  h.features.row(h.num_nodes - 1).setConstant(5.0);
  h.labels.push_back(0);
  h.train_mask.push_back(0);
  h.val_mask.push_back(0);
  h.test_mask.push_back(0);
  LossGrads ext = loss_and_grads(p, h, h.train_mask);
  CHECK(std::abs(ext.loss - base.loss) < 1e-12);
  CHECK((ext.grads.W1 - base.grads.W1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ext.grads.W2 - base.grads.W2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("empty mask is rejected") {
  Graph g = random_graph(4, 2, 2, 0.4, 100);
  ModelParams p = init_params(2, 3, 2, PropagationMode::sym_norm_adj_self_loops, 101);
  Mask empty(4, 0);
  CHECK_THROWS_AS(loss_and_grads(p, g, empty), Error);
}

TEST_CASE("checkpoints round trip bit for bit") {
  ModelParams p = init_params(3, 4, 2, PropagationMode::normalized_laplacian, 111);
  auto path = std::filesystem::temp_directory_path() / "ccmia_test_params.ckpt";
  save_params(p, path);
  ModelParams q = load_params(path);
  CHECK(q.W1 == p.W1);
  CHECK(q.b1 == p.b1);
  CHECK(q.W2 == p.W2);
  CHECK(q.b2 == p.b2);
  CHECK(q.mode == p.mode);
  CHECK(q.hidden == p.hidden);
}

}  // TEST_SUITE
