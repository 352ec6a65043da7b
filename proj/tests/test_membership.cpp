#include <doctest.h>

#include "ccmia/membership.hpp"
#include "ccmia/metrics.hpp"
#include "ccmia/rng.hpp"

using namespace ccmia;

namespace {

Graph shadow_sbm(std::uint64_t seed, int per_block = 30) {
  SbmParams p;
  p.blocks = {per_block, per_block};
  p.p_in = 0.25;
  p.p_out = 0.02;
  p.feature_centers = Eigen::MatrixXd::Zero(2, 3);
  p.feature_centers << 2.0, 0.0, 0.0, 0.0, 2.0, 0.0;
  p.feature_noise = 0.4;
  return gen_sbm(p, seed);
}

AttackDataset separable_dataset(int n_per_class, std::uint64_t seed) {
  Rng rng(seed);
  AttackDataset ds;
  ds.embeddings.resize(2 * n_per_class, 2);
  ds.member.resize(2 * n_per_class);
  for (int i = 0; i < 2 * n_per_class; ++i) {
    bool member = i < n_per_class;
    ds.member[i] = member;
    ds.embeddings(i, 0) = (member ? 2.0 : -2.0) + 0.2 * rng.normal();
    ds.embeddings(i, 1) = 0.3 * rng.normal();
  }
  return ds;
}

}  // namespace

TEST_SUITE("membership") {

TEST_CASE("member split takes ceil(frac * n) nodes deterministically") {
  auto m = member_split(10, 0.4, 1);
  int count = 0;
  for (auto v : m) count += v;
  CHECK(count == 4);
  CHECK(member_split(10, 0.4, 1) == m);
  auto m2 = member_split(25, 0.41, 2);
  count = 0;
  for (auto v : m2) count += v;
  CHECK(count == 11);  // ceil(10.25)
}

TEST_CASE("attacker gnn training is seeded and reduces its loss") {
  Graph shadow = shadow_sbm(3);
  GnnTrainConfig cfg;
  cfg.hidden = 8;
  cfg.lr = 0.05;

  GnnTrainConfig zero = cfg;
  zero.epochs = 0;
  ModelParams w0a = train_attacker_gnn(shadow, 0.4, zero, 9);
  ModelParams w0b = train_attacker_gnn(shadow, 0.4, zero, 9);
  CHECK(w0a.W1 == w0b.W1);  // epochs=0 returns the (seeded) initialization

  auto members = member_split(shadow.num_nodes, 0.4, 9);
  Eigen::MatrixXd p = propagation_matrix(shadow, cfg.mode);

  GnnTrainConfig one = cfg;
  one.epochs = 1;
  GnnTrainConfig hundred = cfg;
  hundred.epochs = 100;
  double loss1 = loss_only(train_attacker_gnn(shadow, 0.4, one, 9), shadow.features,
                           p, shadow.labels, members);
  double loss100 = loss_only(train_attacker_gnn(shadow, 0.4, hundred, 9),
                             shadow.features, p, shadow.labels, members);
  CHECK(loss100 < loss1);
}

TEST_CASE("attack dataset rows are the attacker's first-layer embeddings") {
  Graph shadow = shadow_sbm(4);
  GnnTrainConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 5;
  ModelParams attacker = train_attacker_gnn(shadow, 0.4, cfg, 11);
  auto members = member_split(shadow.num_nodes, 0.4, 11);
  AttackDataset ds = build_attack_dataset(attacker, shadow, members);
  CHECK(ds.embeddings == first_layer_embedding(attacker, shadow));
  CHECK(ds.embeddings.rows() == shadow.num_nodes);
  int count = 0;
  for (auto v : ds.member) count += v;
  CHECK(count == static_cast<int>(std::ceil(0.4 * shadow.num_nodes)));
}

TEST_CASE("mlp separates a linearly separable toy set") {
  AttackDataset ds = separable_dataset(40, 21);
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 16;
  cfg.keep_prob = 1.0;
  cfg.batchnorm = true;
  cfg.lr = 0.05;
  cfg.steps = 500;
  MlpParams clf = train_mlp(ds, cfg, 22);
  Eigen::VectorXd scores = mlp_scores(clf, ds.embeddings);
  int correct = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    correct += ((scores(i) > 0.5) == (ds.member[i] != 0));
  CHECK(static_cast<double>(correct) / scores.size() >= 0.99);
}

TEST_CASE("without hidden layers the mlp is a softmax regression; gradients check out") {
  AttackDataset ds = separable_dataset(10, 31);
  MlpConfig cfg;
  cfg.hidden_layers = 0;
  cfg.keep_prob = 1.0;
  cfg.batchnorm = false;
  MlpParams p = init_mlp(2, cfg, 32);
  std::vector<Eigen::MatrixXd> no_masks;

  MlpGrads g;
  mlp_loss_and_grads(p, ds.embeddings, ds.member, no_masks, 0.1, false, &g);

  double eps = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.Wout.size(); ++i) {
    MlpParams q = p;
    q.Wout(i) += eps;
    double up = mlp_loss(q, ds.embeddings, ds.member, no_masks);
    q.Wout(i) -= 2 * eps;
    double dn = mlp_loss(q, ds.embeddings, ds.member, no_masks);
    double numeric = (up - dn) / (2 * eps);
    double denom = std::max({std::abs(numeric), std::abs(g.Wout(i)), 1e-4});
    worst = std::max(worst, std::abs(numeric - g.Wout(i)) / denom);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("batchnorm training-mode gradients match finite differences") {
  AttackDataset ds = separable_dataset(12, 41);
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 5;
  cfg.keep_prob = 1.0;
  cfg.batchnorm = true;
  MlpParams p = init_mlp(2, cfg, 42);
  std::vector<Eigen::MatrixXd> ones_mask{
      Eigen::MatrixXd::Ones(ds.embeddings.rows(), 5)};

  MlpGrads g;
  mlp_loss_and_grads(p, ds.embeddings, ds.member, ones_mask, 0.1, false, &g);

  double eps = 1e-6;
  auto probe = [&](double* v, double analytic) {
    double save = *v;
    *v = save + eps;
    double up = mlp_loss(p, ds.embeddings, ds.member, ones_mask);
    *v = save - eps;
    double dn = mlp_loss(p, ds.embeddings, ds.member, ones_mask);
    *v = save;
    double numeric = (up - dn) / (2 * eps);
    double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
    return std::abs(numeric - analytic) / denom;
  };
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.hidden[0].W.size(); ++i)
    worst = std::max(worst, probe(p.hidden[0].W.data() + i, g.hidden[0].W(i)));
  for (Eigen::Index i = 0; i < p.hidden[0].gamma.size(); ++i)
    worst = std::max(worst, probe(p.hidden[0].gamma.data() + i, g.hidden[0].gamma(i)));
  for (Eigen::Index i = 0; i < p.hidden[0].beta.size(); ++i)
    worst = std::max(worst, probe(p.hidden[0].beta.data() + i, g.hidden[0].beta(i)));
  CHECK(worst < 1e-4);
}

TEST_CASE("flipped labels complement the auc") {
  AttackDataset ds = separable_dataset(25, 51);
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 8;
  cfg.keep_prob = 1.0;
  cfg.steps = 100;
  MlpParams clf = train_mlp(ds, cfg, 52);
  Eigen::VectorXd s = mlp_scores(clf, ds.embeddings);
  std::vector<double> scores(s.data(), s.data() + s.size());
  std::vector<std::uint8_t> flipped(ds.member.size());
  for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = !ds.member[i];
  CHECK(auc(scores, ds.member) + auc(scores, flipped) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-class datasets are rejected") {
  AttackDataset ds = separable_dataset(5, 61);
  std::fill(ds.member.begin(), ds.member.end(), 1);
  MlpConfig cfg;
  CHECK_THROWS_AS(train_mlp(ds, cfg, 62), ConfigError);
}

TEST_CASE("inference-mode activations equal the training-mode expectation") {
  // frozen single hidden layer, dropout keep 0.5, batchnorm off
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 6;
  cfg.keep_prob = 0.5;
  cfg.batchnorm = false;
  MlpParams p = init_mlp(3, cfg, 71);
  Rng rng(72);
  Eigen::MatrixXd x(40, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();

  // inference-mode hidden activations = relu(u)
  Eigen::MatrixXd u = x * p.hidden[0].W;
  u.rowwise() += p.hidden[0].b.transpose();
  Eigen::MatrixXd inference = u.cwiseMax(0.0);

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(40, 6);
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    Eigen::MatrixXd mask(40, 6);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask(i) = rng.uniform01() < cfg.keep_prob ? 1.0 : 0.0;
    mean += mlp_hidden_train(p, x, {mask}) / draws;
  }
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    if (inference(i) > 0.1)
      CHECK(mean(i) == doctest::Approx(inference(i)).epsilon(0.02));
}

TEST_CASE("an untrained classifier scores like chance on balanced data") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    Eigen::MatrixXd emb(500, 8);
    for (Eigen::Index i = 0; i < emb.size(); ++i) emb(i) = rng.normal();
    std::vector<std::uint8_t> truth(500);
    for (int i = 0; i < 500; ++i) truth[i] = i < 250;

    MlpConfig cfg;
    cfg.hidden_layers = 2;
    cfg.width = 16;
    cfg.steps = 0;  // untrained
    AttackDataset ds;
    ds.embeddings = emb;
    ds.member = truth;
    MlpParams clf = train_mlp(ds, cfg, 200 + seed);
    Eigen::VectorXd s = mlp_scores(clf, emb);
    std::vector<double> scores(s.data(), s.data() + s.size());
    double a = auc(scores, truth);
    CHECK(a >= 0.4);
    CHECK(a <= 0.6);
  }
}

TEST_CASE("membership scores ignore query order") {
  Graph shadow = shadow_sbm(81);
  GnnTrainConfig gnn_cfg;
  gnn_cfg.hidden = 8;
  gnn_cfg.epochs = 20;
  gnn_cfg.lr = 0.05;
  ModelParams attacker = train_attacker_gnn(shadow, 0.4, gnn_cfg, 82);
  auto members = member_split(shadow.num_nodes, 0.4, 82);
  AttackDataset ds = build_attack_dataset(attacker, shadow, members);
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 8;
  cfg.steps = 50;
  MlpParams clf = train_mlp(ds, cfg, 83);

  Graph target = shadow_sbm(84);
  ModelParams global = attacker;  // same width
  std::vector<int> nodes{5, 17, 40};
  std::vector<int> rev{40, 17, 5};
  Eigen::VectorXd a = infer_membership(clf, global, target, nodes);
  Eigen::VectorXd b = infer_membership(clf, global, target, rev);
  CHECK(a(0) == b(2));
  CHECK(a(1) == b(1));
  CHECK(a(2) == b(0));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    CHECK(a(i) >= 0.0);
    CHECK(a(i) <= 1.0);
  }
}

TEST_CASE("classifier checkpoints round trip bit for bit") {
  AttackDataset ds = separable_dataset(15, 95);
  MlpConfig cfg;
  cfg.hidden_layers = 2;
  cfg.width = 6;
  cfg.steps = 30;
  MlpParams p = train_mlp(ds, cfg, 96);
  auto path = std::filesystem::temp_directory_path() / "ccmia_test_mlp.ckpt";
  save_mlp(p, path);
  MlpParams q = load_mlp(path);
  CHECK(q.keep_prob == p.keep_prob);
  CHECK(q.batchnorm == p.batchnorm);
  REQUIRE(q.hidden.size() == p.hidden.size());
  for (std::size_t l = 0; l < p.hidden.size(); ++l) {
    CHECK(q.hidden[l].W == p.hidden[l].W);
    CHECK(q.hidden[l].run_var == p.hidden[l].run_var);
  }
  CHECK(q.Wout == p.Wout);
  CHECK(mlp_scores(q, ds.embeddings) == mlp_scores(p, ds.embeddings));
}

TEST_CASE("classifier width must match the global embedding width") {
  Graph shadow = shadow_sbm(91);
  MlpConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 4;
  AttackDataset ds;
  ds.embeddings = Eigen::MatrixXd::Random(20, 6);
  ds.member.assign(20, 0);
  for (int i = 0; i < 10; ++i) ds.member[i] = 1;
  MlpParams clf = train_mlp(ds, cfg, 92);  // input width 6
  ModelParams global = init_params(shadow.num_features, 8, shadow.num_classes,
                                   PropagationMode::sym_norm_adj_self_loops, 93);
  std::vector<int> nodes{0, 1};
  CHECK_THROWS_AS(infer_membership(clf, global, shadow, nodes), ConfigError);
}

}  // TEST_SUITE
