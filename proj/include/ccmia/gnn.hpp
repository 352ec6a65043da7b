#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "ccmia/graph.hpp"

namespace ccmia {

using Mask = std::vector<std::uint8_t>;

// Two-layer GCN parameters. Propagation mode travels with the weights so a
// checkpoint reproduces the forward pass exactly.
struct ModelParams {
  Eigen::MatrixXd W1;  // D_in x H
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd W2;  // H x C
  Eigen::VectorXd b2;  // C
  PropagationMode mode = PropagationMode::sym_norm_adj_self_loops;
  int hidden = 0;
};

struct Gradients {
  Eigen::MatrixXd W1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd W2;
  Eigen::VectorXd b2;
};

Gradients zeros_like(const ModelParams& p);
bool same_shape(const Gradients& a, const Gradients& b);
// y += alpha * x, over all four tensors
void axpy(Gradients& y, double alpha, const Gradients& x);
void scale(Gradients& g, double alpha);
double squared_norm(const Gradients& g);

struct ForwardResult {
  Eigen::MatrixXd first_layer;  // N x H, post-relu
  Eigen::MatrixXd logits;       // N x C
  Eigen::MatrixXd probs;        // N x C, rows sum to 1
};

// Glorot-uniform initialization, deterministic per seed.
ModelParams init_params(int num_features, int hidden, int num_classes,
                        PropagationMode mode, std::uint64_t seed);

ForwardResult forward(const ModelParams& p, const Graph& g);
ForwardResult forward(const ModelParams& p, const Eigen::MatrixXd& X,
                      const Eigen::MatrixXd& P);

Eigen::MatrixXd first_layer_embedding(const ModelParams& p, const Graph& g);

struct LossGrads {
  double loss = 0.0;
  Gradients grads;
};

// Mean cross-entropy over masked nodes plus exact analytic gradients
// (backprop through softmax, P*E1*W2, relu, P*X*W1). Throws on empty mask.
LossGrads loss_and_grads(const ModelParams& p, const Graph& g, const Mask& mask);
LossGrads loss_and_grads(const ModelParams& p, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& P, const std::vector<int>& labels,
                         const Mask& mask);

// Distillation variant: soft target rows instead of one-hot labels.
LossGrads loss_and_grads_soft(const ModelParams& p, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& soft_targets, const Mask& mask);

double loss_only(const ModelParams& p, const Eigen::MatrixXd& X,
                 const Eigen::MatrixXd& P, const std::vector<int>& labels,
                 const Mask& mask);

// Max relative error between analytic gradients and central finite
// differences over every parameter entry. Throws if eps == 0.
double grad_check(const ModelParams& p, const Graph& g, const Mask& mask, double eps);

// Fraction of masked nodes whose argmax logit equals the label.
double accuracy(const ModelParams& p, const Graph& g, const Mask& mask);

void save_params(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace ccmia
