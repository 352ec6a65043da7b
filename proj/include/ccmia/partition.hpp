#pragma once

#include <filesystem>
#include <vector>

#include "ccmia/graph.hpp"

namespace ccmia {

// Node -> client assignment with the induced per-client subgraphs.
struct Partition {
  int K = 0;
  std::vector<int> assignment;                  // length N, values in [0, K)
  std::vector<Graph> subgraphs;                 // K induced subgraphs
  std::vector<std::vector<int>> local_to_global;  // per part: local id -> node
};

// Balanced K-way split: BFS growth from K random seeds followed by
// Kernighan-Lin style single-node refinement (strictly cut-reducing moves,
// lowest node id first). Part sizes stay within ceil((1+balance_tol)*N/K).
// cut_trace, when given, receives the edge cut after growth and after each
// refinement pass.
Partition partition(const Graph& g, int K, double balance_tol, std::uint64_t seed,
                    std::vector<int>* cut_trace = nullptr);

// Import an externally computed assignment (e.g. genuine METIS output).
// File format: "node,part" header, one row per node. Validates that every
// node is assigned exactly once and every part id in [0, K) is non-empty.
Partition load_partition(const std::filesystem::path& path, const Graph& g, int K);

void save_partition(const Partition& p, const std::filesystem::path& path);

// Number of edges whose endpoints lie in different parts.
int edge_cut(const Graph& g, const Partition& p);

// K x C matrix of per-part label counts; row k sums to |part k|.
Eigen::MatrixXi class_distribution(const Partition& p);

}  // namespace ccmia
