#pragma once

#include <vector>

#include "ccmia/gnn.hpp"

namespace ccmia {

// Shadow embeddings with member/non-member labels (Definition-1 training set
// for the attack classifier).
struct AttackDataset {
  Eigen::MatrixXd embeddings;        // M x H
  std::vector<std::uint8_t> member;  // 1 = attacker-GNN training member
};

struct GnnTrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  int hidden = 128;
  PropagationMode mode = PropagationMode::sym_norm_adj_self_loops;
};

// Deterministic member mask: ceil(frac * n) nodes drawn by seeded shuffle.
std::vector<std::uint8_t> member_split(int num_nodes, double frac, std::uint64_t seed);

// Trains the attacker GNN on the shadow graph with plain full-batch gradient
// descent over the member split derived from (train_fraction, seed).
// warm_start, when given, seeds the weights from an existing model (the
// adversarial client fine-tunes the distributed global model, which keeps the
// shadow embedding basis aligned with the global one); otherwise Glorot.
ModelParams train_attacker_gnn(const Graph& shadow, double train_fraction,
                               const GnnTrainConfig& cfg, std::uint64_t seed,
                               const ModelParams* warm_start = nullptr);

AttackDataset build_attack_dataset(const ModelParams& attacker, const Graph& shadow,
                                   const std::vector<std::uint8_t>& member);

struct MlpConfig {
  int hidden_layers = 2;
  int width = 128;
  double keep_prob = 0.5;  // dropout keep probability
  bool batchnorm = true;
  double lr = 1e-3;
  int steps = 300;
  double bn_momentum = 0.1;
};

struct MlpLayer {
  Eigen::MatrixXd W;  // in x out
  Eigen::VectorXd b;
  Eigen::VectorXd gamma, beta;          // batchnorm affine
  Eigen::VectorXd run_mean, run_var;    // inference statistics
};

struct MlpParams {
  std::vector<MlpLayer> hidden;
  Eigen::MatrixXd Wout;  // width x 2
  Eigen::VectorXd bout;
  double keep_prob = 1.0;
  bool batchnorm = true;
};

constexpr double kBnEps = 1e-5;

MlpParams init_mlp(int input_width, const MlpConfig& cfg, std::uint64_t seed);

struct MlpGrads {
  std::vector<MlpLayer> hidden;  // same shapes; run_* unused
  Eigen::MatrixXd Wout;
  Eigen::VectorXd bout;
};

// Training-mode loss and exact gradients through dropout (inverted scaling),
// batch normalization (batch statistics) and relu. One all-ones mask per
// hidden layer disables dropout. Updates running stats when update_stats.
double mlp_loss_and_grads(MlpParams& p, const Eigen::MatrixXd& X,
                          const std::vector<std::uint8_t>& labels,
                          const std::vector<Eigen::MatrixXd>& dropout_masks,
                          double bn_momentum, bool update_stats, MlpGrads* grads);

// Value-only twin used by finite-difference tests.
double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& X,
                const std::vector<std::uint8_t>& labels,
                const std::vector<Eigen::MatrixXd>& dropout_masks);

// Training-mode activations after the last hidden layer (post-dropout).
// Used to check the dropout expectation contract.
Eigen::MatrixXd mlp_hidden_train(const MlpParams& p, const Eigen::MatrixXd& X,
                                 const std::vector<Eigen::MatrixXd>& dropout_masks);

// Full-batch gradient descent per the config; dropout masks resampled every
// step; deterministic per seed. Throws on a single-class dataset.
MlpParams train_mlp(const AttackDataset& ds, const MlpConfig& cfg, std::uint64_t seed);

// Inference mode: running stats, no dropout. Returns P(member) per row.
Eigen::VectorXd mlp_scores(const MlpParams& p, const Eigen::MatrixXd& X);

// Scores target nodes through the global model's first layer.
Eigen::VectorXd infer_membership(const MlpParams& clf, const ModelParams& global,
                                 const Graph& target, const std::vector<int>& nodes);

// Classifier checkpoint in the shared tensor format.
void save_mlp(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_mlp(const std::filesystem::path& path);

}  // namespace ccmia
