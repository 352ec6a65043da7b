#pragma once

#include <array>
#include <vector>

#include "ccmia/gnn.hpp"

namespace ccmia {

struct InversionConfig {
  double alpha = 1e-3;  // smoothness weight
  double beta = 1e-4;   // sparsity weight
  int epochs = 300;
  double lr_x = 0.1;
  double lr_a = 0.1;
  double rho = 0.0;     // known edge density; n_edges = floor(rho * n_nodes)
  int n_nodes = 0;      // reconstruction size
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossTraceRow {
  int epoch = 0;
  double total = 0.0;
  double cos = 0.0;
  double smooth = 0.0;
  double frob = 0.0;
};

struct Reconstruction {
  Eigen::MatrixXd X;       // n x D_in
  Eigen::MatrixXd A_cont;  // n x n in [0,1], symmetric, zero diagonal
  Eigen::MatrixXd A_bin;   // 0/1, symmetric, zero diagonal, n_edges ones above diag
  std::vector<int> labels;
  std::vector<LossTraceRow> trace;
};

// 1 - <g, g_hat> / (||g|| ||g_hat||), Frobenius inner product over the
// flattened tensors. Zero-norm synthetic gradient is defined as loss 1.
double cosine_grad_loss(const Eigen::MatrixXd& g_true, const Eigen::MatrixXd& g_syn);

// tr(X^T Lhat X) with Lhat the (epsilon-guarded) normalized Laplacian of A.
double smoothness(const Eigen::MatrixXd& X, const Eigen::MatrixXd& A);

// Entry-wise clamp to [0,1].
Eigen::MatrixXd project_unit_interval(const Eigen::MatrixXd& a);

// Keep the n_edges largest upper-triangle entries as 1, the rest 0; ties
// broken toward the lexicographically smallest (i, j). Symmetric output.
Eigen::MatrixXd sample_top_edges(const Eigen::MatrixXd& a_cont, int n_edges);

struct TotalLossParts {
  double total = 0.0;
  double cos = 0.0;
  double smooth = 0.0;
  double frob = 0.0;
};

// The inversion objective: cosine gradient-match term on the first-layer
// gradient synthesized through the global model, plus alpha * smoothness
// plus beta * ||A||_F^2.
TotalLossParts total_loss(const ModelParams& global, const Eigen::MatrixXd& g_true_w1,
                          const Eigen::MatrixXd& X, const Eigen::MatrixXd& A_cont,
                          const std::vector<int>& labels, const InversionConfig& cfg);

struct TotalLossGrads {
  TotalLossParts parts;
  Eigen::MatrixXd dX;
  // Gradient w.r.t. the symmetric adjacency, in upper-triangle
  // parameterization mirrored below the diagonal (zero diagonal); moving
  // A_ij = A_ji together by -lr * dA(i,j) is exact gradient descent.
  Eigen::MatrixXd dA;
};

TotalLossGrads total_loss_grads(const ModelParams& global,
                                const Eigen::MatrixXd& g_true_w1,
                                const Eigen::MatrixXd& X, const Eigen::MatrixXd& A_cont,
                                const std::vector<int>& labels,
                                const InversionConfig& cfg);

// Gradient descent on dummy inputs: X steps with lr_x; A steps with lr_a
// followed by the [0,1] projection; after the last epoch the binary
// adjacency is sampled from the top edges. Throws on non-finite loss.
Reconstruction invert(const ModelParams& global, const Eigen::MatrixXd& g_true_w1,
                      const std::vector<int>& labels, const InversionConfig& cfg);

// Reconstruction as a graph bundle (binary edges), so downstream stages and
// files can treat it like any other graph. All masks set true.
Graph reconstruction_to_graph(const Reconstruction& r, int num_classes);

}  // namespace ccmia
