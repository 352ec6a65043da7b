#include "ccmia/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "ccmia/tensor_io.hpp"

namespace ccmia {

PrototypeSet build_prototypes(const ModelParams& global,
                              const std::vector<Graph>& recon_graphs) {
  PrototypeSet out;
  out.by_client.resize(recon_graphs.size());
  for (std::size_t k = 0; k < recon_graphs.size(); ++k) {
    const Graph& g = recon_graphs[k];
    if (g.num_nodes == 0) throw Error("build_prototypes: empty reconstruction");
    Eigen::MatrixXd emb = first_layer_embedding(global, g);
    std::map<int, std::pair<Eigen::VectorXd, int>> acc;
    for (int i = 0; i < g.num_nodes; ++i) {
      auto [it, fresh] = acc.try_emplace(
          g.labels[i], Eigen::VectorXd::Zero(emb.cols()), 0);
      it->second.first += emb.row(i).transpose();
      it->second.second += 1;
    }
    for (auto& [c, sum_count] : acc) {
      if (sum_count.second == 0) throw Error("build_prototypes: empty class index set");
      out.by_client[k][c] = sum_count.first / sum_count.second;
    }
  }
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cosine distance with the zero-vector guard fixed at the maximal finite
// distance.
double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 2.0;
  return 1.0 - a.dot(b) / (na * nb);
}

OwnerAssignment assign_from_embedding(const Eigen::VectorXd& emb, int label,
                                      const PrototypeSet& prototypes) {
  OwnerAssignment out;
  out.distances.assign(prototypes.by_client.size(), kInf);
  for (std::size_t k = 0; k < prototypes.by_client.size(); ++k) {
    auto it = prototypes.by_client[k].find(label);
    if (it == prototypes.by_client[k].end()) continue;
    out.distances[k] = cosine_distance(emb, it->second);
  }
  double best = kInf;
  for (std::size_t k = 0; k < out.distances.size(); ++k)
    if (out.distances[k] < best) {
      best = out.distances[k];
      out.client = static_cast<int>(k);
    }
  if (out.client < 0)
    throw NoCandidateError("assign_owner: no client holds class " +
                           std::to_string(label));
  return out;
}

}  // namespace

OwnerAssignment assign_owner(const ModelParams& global, const Graph& target,
                             int node, const PrototypeSet& prototypes) {
  if (node < 0 || node >= target.num_nodes) throw Error("assign_owner: bad node id");
  Eigen::MatrixXd emb = first_layer_embedding(global, target);
  return assign_from_embedding(emb.row(node).transpose(), target.labels[node],
                               prototypes);
}

std::vector<OwnerAssignment> assign_owners(const ModelParams& global,
                                           const Graph& target,
                                           const std::vector<int>& nodes,
                                           const PrototypeSet& prototypes) {
  Eigen::MatrixXd emb = first_layer_embedding(global, target);
  std::vector<OwnerAssignment> out;
  out.reserve(nodes.size());
  for (int i : nodes) {
    if (i < 0 || i >= target.num_nodes) throw Error("assign_owners: bad node id");
    out.push_back(
        assign_from_embedding(emb.row(i).transpose(), target.labels[i], prototypes));
  }
  return out;
}

double ownership_accuracy(const std::vector<int>& predicted,
                          const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) throw Error("ownership_accuracy: length mismatch");
  if (predicted.empty()) throw Error("ownership_accuracy: empty query");
  int hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    hits += (predicted[i] == truth[i]);
  return static_cast<double>(hits) / predicted.size();
}

std::vector<double> clustering_coefficients(const Graph& g) {
  std::vector<std::set<int>> nbrs(g.num_nodes);
  for (auto [a, b] : g.edges) {
    nbrs[a].insert(b);
    nbrs[b].insert(a);
  }
  std::vector<double> cc(g.num_nodes, 0.0);
  for (int v = 0; v < g.num_nodes; ++v) {
    int d = static_cast<int>(nbrs[v].size());
    if (d < 2) continue;
    int links = 0;
    for (int a : nbrs[v])
      for (int b : nbrs[v])
        if (a < b && nbrs[a].count(b)) ++links;
    cc[v] = 2.0 * links / (static_cast<double>(d) * (d - 1));
  }
  return cc;
}

double structural_similarity_kl(const Graph& g_inv, const Graph& g_shadow,
                                int bins, double eps) {
  if (g_inv.num_nodes == 0 || g_shadow.num_nodes == 0)
    throw Error("structural_similarity_kl: empty graph");
  if (bins < 1) throw ConfigError("structural_similarity_kl: bins >= 1");

  // Degree distributions over the union of observed degrees.
  auto deg1 = degrees(g_inv);
  auto deg2 = degrees(g_shadow);
  std::set<int> support(deg1.begin(), deg1.end());
  support.insert(deg2.begin(), deg2.end());
  double kl_deg = 0.0;
  for (int k : support) {
    double p1 = static_cast<double>(std::count(deg1.begin(), deg1.end(), k)) /
                g_inv.num_nodes;
    double p2 = static_cast<double>(std::count(deg2.begin(), deg2.end(), k)) /
                g_shadow.num_nodes;
    p1 = std::max(p1, eps);
    p2 = std::max(p2, eps);
    kl_deg += p1 * std::log(p1 / p2);
  }

  // Clustering-coefficient histograms over [0,1]; the value 1.0 lands in the
  // last bin.
  auto cc1 = clustering_coefficients(g_inv);
  auto cc2 = clustering_coefficients(g_shadow);
  auto histogram = [bins](const std::vector<double>& values) {
    std::vector<double> h(bins, 0.0);
    for (double v : values) {
      int b = std::min(static_cast<int>(v * bins), bins - 1);
      h[b] += 1.0 / values.size();
    }
    return h;
  };
  auto q1 = histogram(cc1);
  auto q2 = histogram(cc2);
  double kl_cc = 0.0;
  for (int j = 0; j < bins; ++j) {
    double a = std::max(q1[j], eps);
    double b = std::max(q2[j], eps);
    kl_cc += a * std::log(a / b);
  }
  return kl_deg + kl_cc;
}

void save_prototypes(const PrototypeSet& p, const std::filesystem::path& path) {
  TensorFile tf;
  nlohmann::json class_map = nlohmann::json::array();
  for (std::size_t k = 0; k < p.by_client.size(); ++k) {
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [c, mu] : p.by_client[k]) {
      std::string name = "client" + std::to_string(k) + "_class" + std::to_string(c);
      tf.tensors.emplace_back(name, mu);
      classes.push_back(c);
    }
    class_map.push_back(classes);
  }
  tf.meta = {{"clients", p.by_client.size()}, {"classes", class_map}};
  save_tensors(path, tf);
}

}  // namespace ccmia
