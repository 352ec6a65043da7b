#pragma once

#include <map>
#include <vector>

#include "ccmia/gnn.hpp"

namespace ccmia {

// Per client: class -> mean first-layer embedding of that class's
// reconstructed nodes.
struct PrototypeSet {
  std::vector<std::map<int, Eigen::VectorXd>> by_client;
};

// Embeds each reconstructed graph through the global model's first layer and
// averages per class. Throws if a listed class has no members.
PrototypeSet build_prototypes(const ModelParams& global,
                              const std::vector<Graph>& recon_graphs);

struct OwnerAssignment {
  int client = -1;
  std::vector<double> distances;  // d_{i,k}; infinity where class absent
};

// Thrown when no client holds the query node's class.
class NoCandidateError : public Error {
 public:
  using Error::Error;
};

// Cosine distance of the node's first-layer embedding to each client's
// prototype of the node's class; infinity where the class is absent;
// argmin with lowest-client tie-break. A zero embedding (or zero prototype)
// gets distance 2, the maximal finite cosine distance.
OwnerAssignment assign_owner(const ModelParams& global, const Graph& target,
                             int node, const PrototypeSet& prototypes);

// Batch variant; embeds the target once.
std::vector<OwnerAssignment> assign_owners(const ModelParams& global,
                                           const Graph& target,
                                           const std::vector<int>& nodes,
                                           const PrototypeSet& prototypes);

double ownership_accuracy(const std::vector<int>& predicted,
                          const std::vector<int>& truth);

// Degree-distribution KL plus clustering-coefficient-histogram KL, both
// probability vectors floored at eps before the log-sum.
double structural_similarity_kl(const Graph& g_inv, const Graph& g_shadow,
                                int bins, double eps);

// Local clustering coefficient per node (0 for degree < 2).
std::vector<double> clustering_coefficients(const Graph& g);

void save_prototypes(const PrototypeSet& p, const std::filesystem::path& path);

}  // namespace ccmia
