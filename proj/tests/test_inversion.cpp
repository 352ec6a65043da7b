#include <doctest.h>

#include "ccmia/inversion.hpp"
#include "ccmia/metrics.hpp"
#include "ccmia/rng.hpp"

using namespace ccmia;

namespace {

Graph client_graph(int n, int d, int c, double p_edge, std::uint64_t seed,
                   double sep = 2.5) {
  Graph g;
  g.num_nodes = n;
  g.num_features = d;
  g.num_classes = c;
  Rng rng(seed);
  g.features.resize(n, d);
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    g.labels[i] = i % c;
    for (int f = 0; f < d; ++f)
      g.features(i, f) = (f == g.labels[i] ? sep : 0.0) + 0.3 * rng.normal();
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform01() < p_edge) g.edges.emplace_back(i, j);
  g.train_mask.assign(n, 1);
  g.val_mask.assign(n, 0);
  g.test_mask.assign(n, 0);
  return g;
}

InversionConfig quick_cfg(int n, double rho, std::uint64_t seed) {
  InversionConfig cfg;
  cfg.n_nodes = n;
  cfg.rho = rho;
  cfg.seed = seed;
  return cfg;
}

// Independent evaluation of the pairwise smoothness expansion.
double smoothness_expansion(const Eigen::MatrixXd& x, const Eigen::MatrixXd& a) {
  Eigen::VectorXd d = a.rowwise().sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) == 0.0) continue;
      Eigen::VectorXd diff = x.row(i).transpose() / std::sqrt(d(i) + kDegreeEps) -
                             x.row(j).transpose() / std::sqrt(d(j) + kDegreeEps);
      acc += 0.5 * a(i, j) * diff.squaredNorm();
    }
  return acc;
}

}  // namespace

TEST_SUITE("inversion") {

TEST_CASE("cosine gradient loss worked values") {
  Eigen::MatrixXd g(1, 2);
  g << 1.0, 0.0;
  Eigen::MatrixXd same = g;
  Eigen::MatrixXd anti = -g;
  Eigen::MatrixXd diag(1, 2);
  diag << 1.0, 1.0;
  CHECK(cosine_grad_loss(g, same) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(cosine_grad_loss(g, anti) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(cosine_grad_loss(g, diag) == doctest::Approx(1.0 - 1.0 / std::sqrt(2.0)));
  CHECK(cosine_grad_loss(g, Eigen::MatrixXd::Zero(1, 2)) == 1.0);
  CHECK_THROWS_AS(cosine_grad_loss(Eigen::MatrixXd::Zero(1, 2), g), Error);
}

TEST_CASE("smoothness worked values") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 1, 1, 0;
  SUBCASE("equal features on an edge are perfectly smooth") {
    Eigen::MatrixXd x(2, 2);
    x << 1, 2, 1, 2;
    CHECK(smoothness(x, a) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("unit edge with one active feature costs 1/2 per direction") {
    Eigen::MatrixXd x(2, 2);
    x << 1, 0, 0, 0;
    CHECK(smoothness(x, a) == doctest::Approx(1.0).epsilon(1e-9));
    // matches the half-sum expansion too
    CHECK(smoothness(x, a) == doctest::Approx(smoothness_expansion(x, a)));
  }
  SUBCASE("empty adjacency has zero smoothness") {
    Eigen::MatrixXd x(2, 2);
    x << 3, -1, 2, 5;
    CHECK(smoothness(x, Eigen::MatrixXd::Zero(2, 2)) == 0.0);
  }
}

TEST_CASE("trace form equals the pairwise expansion on random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 5;
    Eigen::MatrixXd x(n, 3);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int f = 0; f < 3; ++f) x(i, f) = rng.normal();
      for (int j = i + 1; j < n; ++j) {
        double v = rng.uniform01() < 0.5 ? rng.uniform01() : 0.0;
        a(i, j) = v;
        a(j, i) = v;
      }
    }
    CHECK(smoothness(x, a) ==
          doctest::Approx(smoothness_expansion(x, a)).epsilon(1e-9));
  }
}

TEST_CASE("projection clamps entrywise and is idempotent") {
  Eigen::MatrixXd a(1, 3);
  a << 1.3, -0.2, 0.6;
  Eigen::MatrixXd p = project_unit_interval(a);
  CHECK(p(0, 0) == 1.0);
  CHECK(p(0, 1) == 0.0);
  CHECK(p(0, 2) == 0.6);
  CHECK(project_unit_interval(p) == p);
}

TEST_CASE("top-edge sampling keeps exactly n_edges with deterministic ties") {
  Eigen::MatrixXd a(3, 3);
  a << 0, 0.9, 0.6, 0.9, 0, 0.6, 0.6, 0.6, 0;
  SUBCASE("zero edges requested") {
    CHECK(sample_top_edges(a, 0) == Eigen::MatrixXd::Zero(3, 3));
  }
  SUBCASE("two edges with a tie broken toward the smallest pair") {
    Eigen::MatrixXd b = sample_top_edges(a, 2);
    CHECK(b(0, 1) == 1.0);
    CHECK(b(0, 2) == 1.0);  // ties at 0.6: (0,2) < (1,2)
    CHECK(b(1, 2) == 0.0);
    CHECK(b == b.transpose().eval());
    CHECK(b.diagonal().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("random matrices keep the exact count") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      int n = 6;
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          m(i, j) = rng.uniform01();
          m(j, i) = m(i, j);
        }
      double rho = rng.uniform(0.2, 2.0);
      int want = static_cast<int>(std::floor(rho * n));
      want = std::min(want, n * (n - 1) / 2);
      Eigen::MatrixXd s = sample_top_edges(m, want);
      int count = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) count += (s(i, j) == 1.0);
      CHECK(count == want);
      CHECK(s == s.transpose().eval());
    }
  }
}

TEST_CASE("total loss vanishes at the true data and decomposes linearly") {
  Graph g = client_graph(6, 3, 2, 0.5, 9);
  ModelParams params =
      init_params(3, 4, 2, PropagationMode::sym_norm_adj_self_loops, 10);
  Eigen::MatrixXd p = propagation_matrix(g, params.mode);
  LossGrads lg = loss_and_grads(params, g.features, p, g.labels, g.train_mask);

  Eigen::MatrixXd true_adj = dense_adjacency(g);
  InversionConfig cfg = quick_cfg(6, 1.0, 0);
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  TotalLossParts at_truth =
      total_loss(params, lg.grads.W1, g.features, true_adj, g.labels, cfg);
  CHECK(at_truth.cos <= 1e-10);
  CHECK(at_truth.total == doctest::Approx(at_truth.cos));

  cfg.alpha = 1e-3;
  cfg.beta = 1e-4;
  TotalLossParts full =
      total_loss(params, lg.grads.W1, g.features, true_adj, g.labels, cfg);
  CHECK(full.total == doctest::Approx(full.cos + 1e-3 * full.smooth +
                                      1e-4 * full.frob));
  InversionConfig cfg2 = cfg;
  cfg2.beta = 2e-4;
  TotalLossParts doubled =
      total_loss(params, lg.grads.W1, g.features, true_adj, g.labels, cfg2);
  CHECK(doubled.total - full.total == doctest::Approx(1e-4 * full.frob));
}

TEST_CASE("objective gradients match finite differences on a 6-node instance") {
  Graph g = client_graph(6, 3, 2, 0.5, 21);
  for (auto mode : {PropagationMode::sym_norm_adj_self_loops,
                    PropagationMode::normalized_laplacian}) {
    ModelParams params = init_params(3, 4, 2, mode, 22);
    Eigen::MatrixXd p = propagation_matrix(g, mode);
    LossGrads lg = loss_and_grads(params, g.features, p, g.labels, g.train_mask);

    Rng rng(23);
    Eigen::MatrixXd x(6, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = 0.5 * rng.normal();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) {
        a(i, j) = rng.uniform01();
        a(j, i) = a(i, j);
      }

    InversionConfig cfg = quick_cfg(6, 1.0, 0);
    TotalLossGrads tg = total_loss_grads(params, lg.grads.W1, x, a, g.labels, cfg);

    auto loss_at = [&](const Eigen::MatrixXd& xx, const Eigen::MatrixXd& aa) {
      return total_loss(params, lg.grads.W1, xx, aa, g.labels, cfg).total;
    };

    double eps = 1e-5;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Eigen::MatrixXd xp = x, xm = x;
      xp(i) += eps;
      xm(i) -= eps;
      double numeric = (loss_at(xp, a) - loss_at(xm, a)) / (2 * eps);
      double denom = std::max({std::abs(numeric), std::abs(tg.dX(i)), 1e-3});
      worst = std::max(worst, std::abs(numeric - tg.dX(i)) / denom);
    }
    CHECK(worst < 1e-3);

    worst = 0.0;
    for (int i = 0; i < 6; ++i)
      for (int j = i + 1; j < 6; ++j) {
        Eigen::MatrixXd ap = a, am = a;
        ap(i, j) += eps;
        ap(j, i) += eps;
        am(i, j) -= eps;
        am(j, i) -= eps;
        double numeric = (loss_at(x, ap) - loss_at(x, am)) / (2 * eps);
        double denom = std::max({std::abs(numeric), std::abs(tg.dA(i, j)), 1e-3});
        worst = std::max(worst, std::abs(numeric - tg.dA(i, j)) / denom);
      }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("one gradient step from the truth does not lift the cosine term") {
  Graph g = client_graph(5, 3, 2, 0.6, 31);
  ModelParams params =
      init_params(3, 4, 2, PropagationMode::sym_norm_adj_self_loops, 34);
  Eigen::MatrixXd p = propagation_matrix(g, params.mode);
  LossGrads lg = loss_and_grads(params, g.features, p, g.labels, g.train_mask);
  Eigen::MatrixXd true_adj = dense_adjacency(g);
  InversionConfig cfg = quick_cfg(5, 1.0, 0);
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  TotalLossGrads tg =
      total_loss_grads(params, lg.grads.W1, g.features, true_adj, g.labels, cfg);
  Eigen::MatrixXd x2 = g.features - 0.01 * tg.dX;
  Eigen::MatrixXd a2 = project_unit_interval(true_adj - 0.01 * tg.dA);
  TotalLossParts after = total_loss(params, lg.grads.W1, x2, a2, g.labels, cfg);
  CHECK(after.cos <= tg.parts.cos + 1e-8);
}

TEST_CASE("inversion lowers its loss and beats a random baseline on features") {
  Graph g = client_graph(8, 4, 2, 0.4, 41);
  ModelParams params =
      init_params(4, 16, 2, PropagationMode::sym_norm_adj_self_loops, 42);
  LossGrads lg = loss_and_grads(params, g.features,
                                propagation_matrix(g, params.mode), g.labels,
                                g.train_mask);

  InversionConfig cfg = quick_cfg(8, static_cast<double>(g.edges.size()) / 8, 43);
  cfg.epochs = 300;
  Reconstruction rec = invert(params, lg.grads.W1, g.labels, cfg);

  REQUIRE(rec.trace.size() == 300);
  CHECK(rec.trace.back().total < rec.trace.front().total);

  // random re-initialization baseline, same shapes, fresh seed
  Rng rng(44);
  Eigen::MatrixXd x_rand(8, 4);
  for (Eigen::Index i = 0; i < x_rand.size(); ++i) x_rand(i) = 0.1 * rng.normal();
  CHECK(rnmse(g.features, rec.X) < rnmse(g.features, x_rand));

  // adjacency invariants
  CHECK((rec.A_cont.array() >= 0.0).all());
  CHECK((rec.A_cont.array() <= 1.0).all());
  int ones = 0;
  for (int i = 0; i < 8; ++i)
    for (int j = i + 1; j < 8; ++j) ones += (rec.A_bin(i, j) == 1.0);
  CHECK(ones == static_cast<int>(std::floor(cfg.rho * 8)));
}

TEST_CASE("invert validates its configuration") {
  ModelParams params =
      init_params(3, 4, 2, PropagationMode::sym_norm_adj_self_loops, 50);
  Eigen::MatrixXd g_w1 = Eigen::MatrixXd::Ones(3, 4);
  InversionConfig cfg = quick_cfg(4, 0.0, 0);  // rho * n < 1
  std::vector<int> labels{0, 1, 0, 1};
  CHECK_THROWS_AS(invert(params, g_w1, labels, cfg), ConfigError);
}

}  // TEST_SUITE
