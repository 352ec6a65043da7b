#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ccmia/errors.hpp"

namespace ccmia {

// Guard added to zero degrees before 1/sqrt normalization.
constexpr double kDegreeEps = 1e-12;

// Dense N x N matrices are only materialized up to this many nodes.
constexpr int kDenseNodeCap = 5000;

enum class PropagationMode {
  sym_norm_adj_self_loops,  // D~^{-1/2} (A + I) D~^{-1/2}
  normalized_laplacian,     // D^{-1/2} (D - A) D^{-1/2}
};

const char* to_string(PropagationMode mode);
PropagationMode propagation_mode_from_string(const std::string& s);

// Undirected attributed graph with node labels and split masks.
// Immutable by convention after construction; cheap to share by const ref.
struct Graph {
  int num_nodes = 0;
  int num_features = 0;
  int num_classes = 0;
  Eigen::MatrixXd features;                  // N x D
  std::vector<std::pair<int, int>> edges;    // src < dst, sorted, unique
  std::vector<int> labels;                   // in [0, C)
  std::vector<std::uint8_t> train_mask;
  std::vector<std::uint8_t> val_mask;
  std::vector<std::uint8_t> test_mask;
};

// Throws Error describing the first violated invariant, if any.
void validate(const Graph& g);

std::vector<int> degrees(const Graph& g);

// Dense adjacency (0/1, symmetric, zero diagonal).
Eigen::MatrixXd dense_adjacency(const Graph& g);

// Propagation operator used by the GCN layers. Symmetric by construction.
Eigen::MatrixXd propagation_matrix(const Graph& g, PropagationMode mode);

// Same operator built from an arbitrary dense nonnegative adjacency.
Eigen::MatrixXd propagation_matrix_dense(const Eigen::MatrixXd& adj,
                                         PropagationMode mode);

struct SbmParams {
  std::vector<int> blocks;          // block sizes; label b for block b
  double p_in = 0.0;                // within-block edge probability
  double p_out = 0.0;               // cross-block edge probability
  Eigen::MatrixXd feature_centers;  // B x D per-block means
  double feature_noise = 0.0;       // gaussian std around the center
};

// Stochastic block model draw; deterministic given the seed. Labels equal
// block ids; masks start all-false (see assign_split_masks).
Graph gen_sbm(const SbmParams& p, std::uint64_t seed);

// Random disjoint train/val split (remainder is test), deterministic per seed.
void assign_split_masks(Graph& g, double train_frac, double val_frac,
                        std::uint64_t seed);

// On-disk bundle: meta.json + features.csv + edges.csv + labels.csv + masks.csv.
Graph load_bundle(const std::filesystem::path& dir);
void save_bundle(const Graph& g, const std::filesystem::path& dir);

}  // namespace ccmia
