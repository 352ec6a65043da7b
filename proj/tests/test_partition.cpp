#include <doctest.h>

#include <filesystem>

#include "ccmia/csv.hpp"
#include "ccmia/partition.hpp"
#include "ccmia/rng.hpp"

using namespace ccmia;
namespace fs = std::filesystem;

namespace {

Graph graph_from_edges(int n, std::vector<std::pair<int, int>> edges, int classes = 1,
                       std::vector<int> labels = {}) {
  Graph g;
  g.num_nodes = n;
  g.num_features = 1;
  g.num_classes = classes;
  g.features = Eigen::MatrixXd::Zero(n, 1);
  g.edges = std::move(edges);
  std::sort(g.edges.begin(), g.edges.end());
  g.labels = labels.empty() ? std::vector<int>(n, 0) : std::move(labels);
  g.train_mask.assign(n, 1);
  g.val_mask.assign(n, 0);
  g.test_mask.assign(n, 0);
  return g;
}

Graph sbm_two_block(int per_block, double p_in, double p_out, std::uint64_t seed) {
  SbmParams p;
  p.blocks = {per_block, per_block};
  p.p_in = p_in;
  p.p_out = p_out;
  p.feature_centers = Eigen::MatrixXd::Zero(2, 2);
  p.feature_centers(1, 0) = 3.0;
  p.feature_noise = 0.3;
  return gen_sbm(p, seed);
}

}  // namespace

TEST_SUITE("partition") {

TEST_CASE("two disjoint triangles split cleanly at K=2") {
  Graph g = graph_from_edges(6, {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}});
  Partition p = partition(g, 2, 0.1, 0);
  CHECK(edge_cut(g, p) == 0);
  CHECK(p.assignment[0] == p.assignment[1]);
  CHECK(p.assignment[1] == p.assignment[2]);
  CHECK(p.assignment[3] == p.assignment[4]);
  CHECK(p.assignment[4] == p.assignment[5]);
  CHECK(p.assignment[0] != p.assignment[3]);
}

TEST_CASE("K=1 is the identity partition") {
  Graph g = graph_from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  Partition p = partition(g, 1, 0.1, 1);
  for (int a : p.assignment) CHECK(a == 0);
  CHECK(p.subgraphs[0].edges == g.edges);
  CHECK(p.subgraphs[0].num_nodes == g.num_nodes);
  CHECK(edge_cut(g, p) == 0);
}

TEST_CASE("cut on a 2-block SBM beats or matches the block-label oracle") {
  Graph g = sbm_two_block(50, 0.3, 0.01, 5);
  // brute-force oracle: the planted block assignment's cut
  int block_cut = 0;
  for (auto [a, b] : g.edges) block_cut += (g.labels[a] != g.labels[b]);
  Partition p = partition(g, 2, 0.1, 5);
  CHECK(edge_cut(g, p) <= block_cut);
}

TEST_CASE("refinement never increases the cut") {
  Graph g = sbm_two_block(30, 0.25, 0.05, 17);
  std::vector<int> trace;
  partition(g, 3, 0.1, 17, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
}

TEST_CASE("assignment is a function and subgraph edges partition non-cut edges") {
  Graph g = sbm_two_block(20, 0.3, 0.1, 23);
  Partition p = partition(g, 4, 0.1, 23);
  std::size_t total = 0;
  for (const auto& s : p.subgraphs) total += s.num_nodes;
  CHECK(total == static_cast<std::size_t>(g.num_nodes));
  std::size_t intra = 0;
  for (const auto& s : p.subgraphs) intra += s.edges.size();
  CHECK(intra + edge_cut(g, p) == g.edges.size());
  int max_size = static_cast<int>(std::ceil(1.1 * g.num_nodes / 4.0));
  for (const auto& s : p.subgraphs) {
    CHECK(s.num_nodes >= 1);
    CHECK(s.num_nodes <= max_size);
  }
}

TEST_CASE("partition rejects K > N") {
  Graph g = graph_from_edges(3, {{0, 1}});
  CHECK_THROWS_AS(partition(g, 4, 0.1, 0), ConfigError);
}

TEST_CASE("external partitions load with validation") {
  fs::path dir = fs::temp_directory_path() / "ccmia_test_part";
  fs::create_directories(dir);
  Graph g = graph_from_edges(4, {{0, 1}, {1, 2}, {2, 3}});

  SUBCASE("path graph split 0,0,1,1") {
    atomic_write_file(dir / "p.csv", "node,part\n0,0\n1,0\n2,1\n3,1\n");
    Partition p = load_partition(dir / "p.csv", g, 2);
    CHECK(p.subgraphs[0].num_nodes == 2);
    CHECK(p.subgraphs[1].num_nodes == 2);
    CHECK(edge_cut(g, p) == 1);
  }
  SUBCASE("missing node") {
    atomic_write_file(dir / "p.csv", "node,part\n0,0\n1,0\n3,1\n");
    CHECK_THROWS_WITH_AS(load_partition(dir / "p.csv", g, 2),
                         doctest::Contains("incomplete_assignment"), Error);
  }
  SUBCASE("empty part") {
    atomic_write_file(dir / "p.csv", "node,part\n0,0\n1,0\n2,0\n3,0\n");
    CHECK_THROWS_WITH_AS(load_partition(dir / "p.csv", g, 2),
                         doctest::Contains("empty_part"), Error);
  }
  SUBCASE("part id out of range") {
    atomic_write_file(dir / "p.csv", "node,part\n0,0\n1,0\n2,1\n3,2\n");
    CHECK_THROWS_AS(load_partition(dir / "p.csv", g, 2), ParseError);
  }
}

TEST_CASE("edge cut worked examples") {
  Graph path = graph_from_edges(3, {{0, 1}, {1, 2}});
  Partition p1 = load_partition([&] {
    fs::path dir = fs::temp_directory_path() / "ccmia_test_cut";
    fs::create_directories(dir);
    atomic_write_file(dir / "p.csv", "node,part\n0,0\n1,1\n2,1\n");
    return dir / "p.csv";
  }(), path, 2);
  CHECK(edge_cut(path, p1) == 1);

  Graph k4 = graph_from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  Partition p2 = load_partition([&] {
    fs::path dir = fs::temp_directory_path() / "ccmia_test_cut";
    atomic_write_file(dir / "q.csv", "node,part\n0,0\n1,0\n2,1\n3,1\n");
    return dir / "q.csv";
  }(), k4, 2);
  CHECK(edge_cut(k4, p2) == 4);
}

TEST_CASE("class distribution rows sum to part sizes") {
  std::vector<int> labels{0, 0, 1, 1, 2, 2};
  Graph g = graph_from_edges(6, {{0, 1}, {2, 3}, {4, 5}}, 3, labels);
  Partition p = partition(g, 3, 0.5, 2);
  Eigen::MatrixXi dist = class_distribution(p);
  CHECK(dist.rows() == 3);
  CHECK(dist.cols() == 3);
  for (int k = 0; k < 3; ++k)
    CHECK(dist.row(k).sum() == p.subgraphs[k].num_nodes);
  CHECK(dist.sum() == 6);

  SUBCASE("K=1 gives the global histogram") {
    Partition whole = partition(g, 1, 0.1, 0);
    Eigen::MatrixXi h = class_distribution(whole);
    CHECK(h(0, 0) == 2);
    CHECK(h(0, 1) == 2);
    CHECK(h(0, 2) == 2);
  }
}

}  // TEST_SUITE
