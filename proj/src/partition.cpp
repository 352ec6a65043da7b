#include "ccmia/partition.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>

#include "ccmia/csv.hpp"
#include "ccmia/rng.hpp"

namespace ccmia {

namespace {

std::vector<std::vector<int>> adjacency_list(const Graph& g) {
  std::vector<std::vector<int>> adj(g.num_nodes);
  for (auto [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
  return adj;
}

Graph induce_subgraph(const Graph& g, const std::vector<int>& nodes,
                      const std::vector<int>& global_to_local) {
  Graph s;
  s.num_nodes = static_cast<int>(nodes.size());
  s.num_features = g.num_features;
  s.num_classes = g.num_classes;
  s.features.resize(s.num_nodes, s.num_features);
  s.labels.resize(s.num_nodes);
  s.train_mask.resize(s.num_nodes);
  s.val_mask.resize(s.num_nodes);
  s.test_mask.resize(s.num_nodes);
  for (int li = 0; li < s.num_nodes; ++li) {
    int gi = nodes[li];
    s.features.row(li) = g.features.row(gi);
    s.labels[li] = g.labels[gi];
    s.train_mask[li] = g.train_mask[gi];
    s.val_mask[li] = g.val_mask[gi];
    s.test_mask[li] = g.test_mask[gi];
  }
  for (auto [a, b] : g.edges) {
    int la = global_to_local[a], lb = global_to_local[b];
    if (la >= 0 && lb >= 0) s.edges.emplace_back(std::min(la, lb), std::max(la, lb));
  }
  std::sort(s.edges.begin(), s.edges.end());
  return s;
}

void build_subgraphs(const Graph& g, Partition& p) {
  p.local_to_global.assign(p.K, {});
  for (int i = 0; i < g.num_nodes; ++i)
    p.local_to_global[p.assignment[i]].push_back(i);
  p.subgraphs.clear();
  std::vector<int> global_to_local(g.num_nodes, -1);
  for (int k = 0; k < p.K; ++k) {
    std::fill(global_to_local.begin(), global_to_local.end(), -1);
    for (std::size_t li = 0; li < p.local_to_global[k].size(); ++li)
      global_to_local[p.local_to_global[k][li]] = static_cast<int>(li);
    p.subgraphs.push_back(induce_subgraph(g, p.local_to_global[k], global_to_local));
  }
}

int cut_of_assignment(const Graph& g, const std::vector<int>& assign) {
  int cut = 0;
  for (auto [a, b] : g.edges) cut += (assign[a] != assign[b]);
  return cut;
}

}  // namespace

Partition partition(const Graph& g, int K, double balance_tol, std::uint64_t seed,
                    std::vector<int>* cut_trace) {
  if (K < 1) throw ConfigError("partition: K must be >= 1");
  if (K > g.num_nodes) throw ConfigError("partition: K > N");
  const int n = g.num_nodes;
  const int max_size =
      static_cast<int>(std::ceil((1.0 + balance_tol) * static_cast<double>(n) / K));

  auto adj = adjacency_list(g);
  std::vector<int> assign(n, -1);
  std::vector<int> part_size(K, 0);

  // K distinct random seed nodes.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(sub_seed(seed, "partition_seeds"));
  rng.shuffle(order);
  std::vector<std::set<int>> frontier(K);  // candidate nodes, lowest id first
  for (int k = 0; k < K; ++k) {
    int s = order[k];
    assign[s] = k;
    part_size[k] = 1;
    for (int nb : adj[s])
      if (assign[nb] < 0) frontier[k].insert(nb);
  }

  int assigned = K;
  int next_unassigned = 0;
  while (assigned < n) {
    // Grow the currently smallest part that still has room.
    int k = -1;
    for (int q = 0; q < K; ++q)
      if (part_size[q] < max_size && (k < 0 || part_size[q] < part_size[k])) k = q;
    // Rounding guarantees max_size * K >= N, so some part always has room.
    int v = -1;
    while (!frontier[k].empty()) {
      int cand = *frontier[k].begin();
      frontier[k].erase(frontier[k].begin());
      if (assign[cand] < 0) {
        v = cand;
        break;
      }
    }
    if (v < 0) {
      while (assign[next_unassigned] >= 0) ++next_unassigned;
      v = next_unassigned;
    }
    assign[v] = k;
    ++part_size[k];
    ++assigned;
    for (int nb : adj[v])
      if (assign[nb] < 0) frontier[k].insert(nb);
  }

  if (cut_trace) cut_trace->push_back(cut_of_assignment(g, assign));

  // Single-node refinement: only strictly cut-reducing moves, so the cut is
  // monotone non-increasing across passes.
  for (int pass = 0; pass < 10; ++pass) {
    bool moved = false;
    std::vector<int> cnt(K, 0);
    for (int v = 0; v < n; ++v) {
      int p = assign[v];
      if (part_size[p] <= 1) continue;
      std::fill(cnt.begin(), cnt.end(), 0);
      for (int nb : adj[v]) ++cnt[assign[nb]];
      int best = -1, best_gain = 0;
      for (int q = 0; q < K; ++q) {
        if (q == p || part_size[q] >= max_size) continue;
        int gain = cnt[q] - cnt[p];
        if (gain > best_gain) {
          best_gain = gain;
          best = q;
        }
      }
      if (best >= 0) {
        assign[v] = best;
        --part_size[p];
        ++part_size[best];
        moved = true;
      }
    }
    if (cut_trace) cut_trace->push_back(cut_of_assignment(g, assign));
    if (!moved) break;
  }

  Partition result;
  result.K = K;
  result.assignment = std::move(assign);
  build_subgraphs(g, result);
  return result;
}

Partition load_partition(const std::filesystem::path& path, const Graph& g, int K) {
  if (K < 1) throw ConfigError("load_partition: K must be >= 1");
  const std::string file = path.string();
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "node,part")
    throw ParseError(file, 1, "expected header 'node,part'");

  std::vector<int> assign(g.num_nodes, -1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    long ln = static_cast<long>(r + 1);
    if (lines[r].empty() && r + 1 == lines.size()) break;
    auto cells = split_csv_line(lines[r]);
    if (cells.size() != 2) throw ParseError(file, ln, "wrong column count");
    long node = parse_long(cells[0], file, ln);
    long part = parse_long(cells[1], file, ln);
    if (node < 0 || node >= g.num_nodes)
      throw ParseError(file, ln, "node id out of range");
    if (part < 0 || part >= K)
      throw ParseError(file, ln, "part id out of range (>= K)");
    if (assign[node] >= 0) throw ParseError(file, ln, "duplicate node assignment");
    assign[node] = static_cast<int>(part);
  }
  for (int i = 0; i < g.num_nodes; ++i)
    if (assign[i] < 0)
      throw Error("incomplete_assignment: node " + std::to_string(i) + " missing");
  std::vector<int> size(K, 0);
  for (int a : assign) ++size[a];
  for (int k = 0; k < K; ++k)
    if (size[k] == 0) throw Error("empty_part: part " + std::to_string(k));

  Partition p;
  p.K = K;
  p.assignment = std::move(assign);
  build_subgraphs(g, p);
  return p;
}

void save_partition(const Partition& p, const std::filesystem::path& path) {
  std::string out = "node,part\n";
  for (std::size_t i = 0; i < p.assignment.size(); ++i)
    out += std::to_string(i) + "," + std::to_string(p.assignment[i]) + "\n";
  atomic_write_file(path, out);
}

int edge_cut(const Graph& g, const Partition& p) {
  return cut_of_assignment(g, p.assignment);
}

Eigen::MatrixXi class_distribution(const Partition& p) {
  int C = p.subgraphs.empty() ? 0 : p.subgraphs[0].num_classes;
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(p.K, C);
  for (int k = 0; k < p.K; ++k)
    for (int y : p.subgraphs[k].labels) m(k, y) += 1;
  return m;
}

}  // namespace ccmia
