#include "ccmia/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccmia/csv.hpp"
#include "ccmia/rng.hpp"

namespace ccmia {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(PropagationMode mode) {
  switch (mode) {
    case PropagationMode::sym_norm_adj_self_loops:
      return "sym_norm_adj_self_loops";
    case PropagationMode::normalized_laplacian:
      return "normalized_laplacian";
  }
  return "?";
}

PropagationMode propagation_mode_from_string(const std::string& s) {
  if (s == "sym_norm_adj_self_loops") return PropagationMode::sym_norm_adj_self_loops;
  if (s == "normalized_laplacian") return PropagationMode::normalized_laplacian;
  throw ConfigError("unknown propagation mode: " + s);
}

void validate(const Graph& g) {
  if (g.num_nodes < 0 || g.num_features < 0 || g.num_classes < 1)
    throw Error("graph: bad dimensions");
  if (g.features.rows() != g.num_nodes || g.features.cols() != g.num_features)
    throw Error("graph: feature matrix shape mismatch");
  if (static_cast<int>(g.labels.size()) != g.num_nodes)
    throw Error("graph: label vector length mismatch");
  for (int i = 0; i < g.num_nodes; ++i)
    if (g.labels[i] < 0 || g.labels[i] >= g.num_classes)
      throw Error("graph: label out of range at node " + std::to_string(i));
  auto check_mask = [&](const std::vector<std::uint8_t>& m, const char* name) {
    if (static_cast<int>(m.size()) != g.num_nodes)
      throw Error(std::string("graph: mask length mismatch: ") + name);
  };
  check_mask(g.train_mask, "train");
  check_mask(g.val_mask, "val");
  check_mask(g.test_mask, "test");
  for (int i = 0; i < g.num_nodes; ++i)
    if (g.train_mask[i] + g.val_mask[i] + g.test_mask[i] > 1)
      throw Error("graph: masks overlap at node " + std::to_string(i));
  std::set<std::pair<int, int>> seen;
  for (auto [a, b] : g.edges) {
    if (a < 0 || b < 0 || a >= g.num_nodes || b >= g.num_nodes)
      throw Error("graph: edge endpoint out of range");
    if (a == b) throw Error("graph: self loop stored");
    if (a > b) throw Error("graph: edge not normalized (src < dst)");
    if (!seen.insert({a, b}).second) throw Error("graph: duplicate edge");
  }
}

std::vector<int> degrees(const Graph& g) {
  std::vector<int> d(g.num_nodes, 0);
  for (auto [a, b] : g.edges) {
    ++d[a];
    ++d[b];
  }
  return d;
}

Eigen::MatrixXd dense_adjacency(const Graph& g) {
  if (g.num_nodes > kDenseNodeCap)
    throw Error("graph too large for dense materialization (N > " +
                std::to_string(kDenseNodeCap) + ")");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.num_nodes, g.num_nodes);
  for (auto [i, j] : g.edges) {
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

Eigen::MatrixXd propagation_matrix_dense(const Eigen::MatrixXd& adj,
                                         PropagationMode mode) {
  const auto n = adj.rows();
  Eigen::MatrixXd p(n, n);
  Eigen::VectorXd deg = adj.rowwise().sum();
  if (mode == PropagationMode::sym_norm_adj_self_loops) {
    // the self loop keeps every degree >= 1, no epsilon guard needed
    Eigen::VectorXd dt = deg.array() + 1.0;
    Eigen::VectorXd r = dt.array().rsqrt();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        p(i, j) = (adj(i, j) + (i == j ? 1.0 : 0.0)) * r(i) * r(j);
  } else {
    Eigen::VectorXd guarded = deg.array() + kDegreeEps;
    Eigen::VectorXd r = guarded.array().rsqrt();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        p(i, j) = (i == j) ? deg(i) / guarded(i) : -adj(i, j) * r(i) * r(j);
  }
  return p;
}

Eigen::MatrixXd propagation_matrix(const Graph& g, PropagationMode mode) {
  return propagation_matrix_dense(dense_adjacency(g), mode);
}

Graph gen_sbm(const SbmParams& p, std::uint64_t seed) {
  if (p.blocks.empty()) throw ConfigError("sbm: no blocks");
  for (int b : p.blocks)
    if (b <= 0) throw ConfigError("sbm: block sizes must be positive");
  if (!(0.0 <= p.p_out && p.p_out <= p.p_in && p.p_in <= 1.0))
    throw ConfigError("sbm: need 0 <= p_out <= p_in <= 1");
  if (p.feature_centers.rows() != static_cast<Eigen::Index>(p.blocks.size()))
    throw ConfigError("sbm: one feature center per block required");
  if (p.feature_noise < 0.0) throw ConfigError("sbm: negative feature noise");

  Graph g;
  g.num_classes = static_cast<int>(p.blocks.size());
  g.num_features = static_cast<int>(p.feature_centers.cols());
  int n = 0;
  for (int b : p.blocks) n += b;
  g.num_nodes = n;
  g.labels.resize(n);
  int node = 0;
  for (int b = 0; b < g.num_classes; ++b)
    for (int i = 0; i < p.blocks[b]; ++i) g.labels[node++] = b;

  Rng feat_rng(sub_seed(seed, "sbm_features"));
  g.features.resize(n, g.num_features);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < g.num_features; ++f)
      g.features(i, f) =
          p.feature_centers(g.labels[i], f) + p.feature_noise * feat_rng.normal();

  Rng edge_rng(sub_seed(seed, "sbm_edges"));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double prob = (g.labels[i] == g.labels[j]) ? p.p_in : p.p_out;
      if (edge_rng.uniform01() < prob) g.edges.emplace_back(i, j);
    }

  g.train_mask.assign(n, 0);
  g.val_mask.assign(n, 0);
  g.test_mask.assign(n, 0);
  validate(g);
  return g;
}

void assign_split_masks(Graph& g, double train_frac, double val_frac,
                        std::uint64_t seed) {
  if (train_frac < 0 || val_frac < 0 || train_frac + val_frac > 1.0)
    throw ConfigError("split fractions out of range");
  std::vector<int> order(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) order[i] = i;
  Rng rng(sub_seed(seed, "split_masks"));
  rng.shuffle(order);
  int n_train = static_cast<int>(std::ceil(train_frac * g.num_nodes));
  int n_val = static_cast<int>(std::ceil(val_frac * g.num_nodes));
  n_val = std::min(n_val, g.num_nodes - n_train);
  g.train_mask.assign(g.num_nodes, 0);
  g.val_mask.assign(g.num_nodes, 0);
  g.test_mask.assign(g.num_nodes, 0);
  for (int i = 0; i < g.num_nodes; ++i) {
    if (i < n_train)
      g.train_mask[order[i]] = 1;
    else if (i < n_train + n_val)
      g.val_mask[order[i]] = 1;
    else
      g.test_mask[order[i]] = 1;
  }
}

namespace {

void expect_header(const std::vector<std::string>& lines, const std::string& file,
                   const std::string& header) {
  if (lines.empty()) throw ParseError(file, 1, "empty file");
  if (lines[0] != header)
    throw ParseError(file, 1, "expected header '" + header + "'");
}

std::string features_header(int d) {
  std::string h = "node";
  for (int f = 0; f < d; ++f) h += ",f" + std::to_string(f);
  return h;
}

}  // namespace

Graph load_bundle(const fs::path& dir) {
  const std::string meta_path = (dir / "meta.json").string();
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw Error("missing file: " + meta_path);
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw ParseError(meta_path, 1, e.what());
  }

  Graph g;
  g.num_nodes = meta.at("num_nodes").get<int>();
  g.num_features = meta.at("num_features").get<int>();
  g.num_classes = meta.at("num_classes").get<int>();
  if (g.num_nodes < 0 || g.num_features < 0 || g.num_classes < 1)
    throw ParseError(meta_path, 1, "bad dimensions in meta.json");

  // features.csv
  {
    const std::string file = (dir / "features.csv").string();
    auto lines = read_lines(file);
    expect_header(lines, file, features_header(g.num_features));
    if (static_cast<int>(lines.size()) - 1 != g.num_nodes)
      throw ParseError(file, static_cast<long>(lines.size()),
                       "row count does not match meta num_nodes");
    g.features.resize(g.num_nodes, g.num_features);
    for (int i = 0; i < g.num_nodes; ++i) {
      long ln = i + 2;
      auto cells = split_csv_line(lines[i + 1]);
      if (static_cast<int>(cells.size()) != g.num_features + 1)
        throw ParseError(file, ln, "wrong column count");
      if (parse_long(cells[0], file, ln) != i)
        throw ParseError(file, ln, "node ids must be 0..N-1 in order");
      for (int f = 0; f < g.num_features; ++f)
        g.features(i, f) = parse_double(cells[f + 1], file, ln);
    }
  }

  // edges.csv
  {
    const std::string file = (dir / "edges.csv").string();
    auto lines = read_lines(file);
    expect_header(lines, file, "src,dst");
    std::set<std::pair<int, int>> seen;
    for (std::size_t r = 1; r < lines.size(); ++r) {
      long ln = static_cast<long>(r + 1);
      if (lines[r].empty() && r + 1 == lines.size()) break;
      auto cells = split_csv_line(lines[r]);
      if (cells.size() != 2) throw ParseError(file, ln, "wrong column count");
      int a = static_cast<int>(parse_long(cells[0], file, ln));
      int b = static_cast<int>(parse_long(cells[1], file, ln));
      if (a < 0 || b < 0 || a >= g.num_nodes || b >= g.num_nodes)
        throw ParseError(file, ln, "edge endpoint out of range");
      if (a == b) throw ParseError(file, ln, "self_loop");
      if (a > b) throw ParseError(file, ln, "edges must satisfy src < dst");
      if (!seen.insert({a, b}).second) throw ParseError(file, ln, "duplicate_edge");
      g.edges.emplace_back(a, b);
    }
    std::sort(g.edges.begin(), g.edges.end());
  }

  // labels.csv
  {
    const std::string file = (dir / "labels.csv").string();
    auto lines = read_lines(file);
    expect_header(lines, file, "node,label");
    if (static_cast<int>(lines.size()) - 1 != g.num_nodes)
      throw ParseError(file, static_cast<long>(lines.size()),
                       "row count does not match meta num_nodes");
    g.labels.resize(g.num_nodes);
    for (int i = 0; i < g.num_nodes; ++i) {
      long ln = i + 2;
      auto cells = split_csv_line(lines[i + 1]);
      if (cells.size() != 2) throw ParseError(file, ln, "wrong column count");
      if (parse_long(cells[0], file, ln) != i)
        throw ParseError(file, ln, "node ids must be 0..N-1 in order");
      long y = parse_long(cells[1], file, ln);
      if (y < 0 || y >= g.num_classes)
        throw ParseError(file, ln, "label out of range (label >= num_classes)");
      g.labels[i] = static_cast<int>(y);
    }
  }

  // masks.csv
  {
    const std::string file = (dir / "masks.csv").string();
    auto lines = read_lines(file);
    expect_header(lines, file, "node,train,val,test");
    if (static_cast<int>(lines.size()) - 1 != g.num_nodes)
      throw ParseError(file, static_cast<long>(lines.size()),
                       "row count does not match meta num_nodes");
    g.train_mask.assign(g.num_nodes, 0);
    g.val_mask.assign(g.num_nodes, 0);
    g.test_mask.assign(g.num_nodes, 0);
    for (int i = 0; i < g.num_nodes; ++i) {
      long ln = i + 2;
      auto cells = split_csv_line(lines[i + 1]);
      if (cells.size() != 4) throw ParseError(file, ln, "wrong column count");
      if (parse_long(cells[0], file, ln) != i)
        throw ParseError(file, ln, "node ids must be 0..N-1 in order");
      auto bit = [&](const std::string& s) -> std::uint8_t {
        long v = parse_long(s, file, ln);
        if (v != 0 && v != 1) throw ParseError(file, ln, "mask cells must be 0/1");
        return static_cast<std::uint8_t>(v);
      };
      g.train_mask[i] = bit(cells[1]);
      g.val_mask[i] = bit(cells[2]);
      g.test_mask[i] = bit(cells[3]);
      if (g.train_mask[i] + g.val_mask[i] + g.test_mask[i] > 1)
        throw ParseError(file, ln, "masks must be disjoint");
    }
  }

  validate(g);
  return g;
}

void save_bundle(const Graph& g, const fs::path& dir) {
  validate(g);
  fs::create_directories(dir);

  json meta;
  meta["num_nodes"] = g.num_nodes;
  meta["num_features"] = g.num_features;
  meta["num_classes"] = g.num_classes;
  atomic_write_file(dir / "meta.json", meta.dump(2) + "\n");

  {
    std::string out = features_header(g.num_features) + "\n";
    for (int i = 0; i < g.num_nodes; ++i) {
      out += std::to_string(i);
      for (int f = 0; f < g.num_features; ++f)
        out += "," + format_double(g.features(i, f));
      out += "\n";
    }
    atomic_write_file(dir / "features.csv", out);
  }
  {
    auto edges = g.edges;
    std::sort(edges.begin(), edges.end());
    std::string out = "src,dst\n";
    for (auto [a, b] : edges)
      out += std::to_string(a) + "," + std::to_string(b) + "\n";
    atomic_write_file(dir / "edges.csv", out);
  }
  {
    std::string out = "node,label\n";
    for (int i = 0; i < g.num_nodes; ++i)
      out += std::to_string(i) + "," + std::to_string(g.labels[i]) + "\n";
    atomic_write_file(dir / "labels.csv", out);
  }
  {
    std::string out = "node,train,val,test\n";
    for (int i = 0; i < g.num_nodes; ++i)
      out += std::to_string(i) + "," + std::to_string(int(g.train_mask[i])) + "," +
             std::to_string(int(g.val_mask[i])) + "," +
             std::to_string(int(g.test_mask[i])) + "\n";
    atomic_write_file(dir / "masks.csv", out);
  }
}

}  // namespace ccmia
