// ccmia: federated-GNN attack simulator command line.
//
// Subcommands write their artifacts under --out plus a manifest entry; attack
// stages consume only artifacts persisted by earlier stages.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ccmia/csv.hpp"
#include "ccmia/experiment.hpp"
#include "ccmia/metrics.hpp"
#include "ccmia/rng.hpp"
#include "ccmia/tensor_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ccmia;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ManifestWriter {
  fs::path out_dir;
  std::string subcommand;
  json config_echo;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add(const fs::path& p) { artifacts.push_back(fs::relative(p, out_dir).string()); }

  void commit() {
    json manifest;
    fs::path path = out_dir / "manifest.json";
    if (fs::exists(path)) {
      std::ifstream in(path);
      try {
        in >> manifest;
      } catch (...) {
        manifest = json::object();
      }
    }
    if (!manifest.contains("runs")) manifest["runs"] = json::array();
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["runs"].push_back({{"subcommand", subcommand},
                                {"config", config_echo},
                                {"seed", seed},
                                {"version", kVersion},
                                {"wall_time_s", wall},
                                {"artifacts", artifacts}});
    atomic_write_file(path, manifest.dump(2) + "\n");
  }
};

std::string csv_num(double v) {
  return std::isnan(v) ? std::string() : format_double(v);
}

ExperimentConfig load_config(const std::string& config_path, std::uint64_t* seed_flag,
                             std::string* out_flag) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (seed_flag) cfg.seed = *seed_flag;
  if (out_flag && !out_flag->empty()) cfg.out_dir = *out_flag;
  if (cfg.out_dir.empty()) throw ConfigError("no output directory (config 'out' or --out)");
  cfg.fed.seed = cfg.seed;
  return cfg;
}

ManifestWriter manifest_for(const ExperimentConfig& cfg, const std::string& sub) {
  fs::create_directories(cfg.out_dir);
  ManifestWriter m;
  m.out_dir = cfg.out_dir;
  m.subcommand = sub;
  m.config_echo = experiment_config_to_json(cfg);
  m.seed = cfg.seed;
  return m;
}

void write_rounds_csv(const std::vector<RoundLoss>& losses, const fs::path& path) {
  std::string out = "round,client,loss,grad_norm\n";
  for (const auto& r : losses)
    out += std::to_string(r.round) + "," + std::to_string(r.client) + "," +
           format_double(r.loss) + "," + format_double(r.grad_norm) + "\n";
  atomic_write_file(path, out);
}

void write_tap_csv(const TapTrace& trace, const std::vector<RoundRecord>& records,
                   const fs::path& path) {
  std::string out = "round,client,intercepted,est_error\n";
  for (int t = 0; t < trace.rounds; ++t)
    for (int k = 0; k < trace.clients; ++k) {
      double err = cell_estimation_error(trace.cells[t][k], records[t].uploads[k]);
      out += std::to_string(t) + "," + std::to_string(k) + "," +
             std::to_string(int(trace.cells[t][k].intercepted)) + "," + csv_num(err) +
             "\n";
    }
  atomic_write_file(path, out);
}

int cmd_gen_synth(const ExperimentConfig& cfg) {
  if (!cfg.dataset.use_sbm)
    throw ConfigError("gen-synth requires an sbm dataset block");
  ManifestWriter m = manifest_for(cfg, "gen-synth");
  Graph g = materialize_dataset(cfg.dataset, cfg.seed, "target");
  fs::path bundle = fs::path(cfg.out_dir) / "bundle";
  save_bundle(g, bundle);
  for (const char* f : {"meta.json", "features.csv", "edges.csv", "labels.csv", "masks.csv"})
    m.add(bundle / f);
  m.commit();
  std::cout << "bundle written: " << bundle.string() << " (N=" << g.num_nodes
            << ", |E|=" << g.edges.size() << ")\n";
  return 0;
}

int cmd_partition(const ExperimentConfig& cfg) {
  ManifestWriter m = manifest_for(cfg, "partition");
  Graph g = load_bundle(fs::path(cfg.out_dir) / "bundle");
  Partition p = partition(g, cfg.k, cfg.balance_tol, sub_seed(cfg.seed, "partition"));
  fs::path out = fs::path(cfg.out_dir) / "partition.csv";
  save_partition(p, out);
  m.add(out);
  m.commit();
  std::cout << "partition written: " << out.string() << " (cut=" << edge_cut(g, p)
            << ")\n";
  return 0;
}

// Standalone form pinned by the external interface:
//   partition --k K --balance-tol T --seed S --in DIR --out FILE
int cmd_partition_standalone(int k, double tol, std::uint64_t seed,
                             const std::string& in_dir, const std::string& out_file) {
  Graph g = load_bundle(in_dir);
  Partition p = partition(g, k, tol, sub_seed(seed, "partition"));
  save_partition(p, out_file);
  std::cout << "partition written: " << out_file << " (cut=" << edge_cut(g, p) << ")\n";
  return 0;
}

int cmd_train_fed(const ExperimentConfig& cfg) {
  ManifestWriter m = manifest_for(cfg, "train-fed");
  fs::path dir(cfg.out_dir);
  Graph g = load_bundle(dir / "bundle");
  Partition part = load_partition(dir / "partition.csv", g, cfg.k);

  std::vector<Graph> clients = part.subgraphs;
  if (std::isfinite(cfg.defense_eta)) {
    for (int k = 0; k < cfg.k; ++k) {
      DefenseConfig d;
      d.eta = cfg.defense_eta;
      d.seed = sub_seed(cfg.seed, "defense", static_cast<std::uint64_t>(k));
      clients[k].features = perturb_features(clients[k].features, d);
    }
  }
  std::optional<Graph> transfer;
  if (cfg.transfer) transfer = materialize_dataset(*cfg.transfer, cfg.seed, "transfer");
  FederationResult fed = run_federation(clients, cfg.fed, transfer ? &*transfer : nullptr);

  write_rounds_csv(fed.losses, dir / "rounds.csv");
  m.add(dir / "rounds.csv");
  save_records(fed.records, dir / "records.bin");
  m.add(dir / "records.bin");
  fs::create_directories(dir / "checkpoints");
  save_params(fed.params, dir / "checkpoints" / "global_final.ckpt");
  m.add(dir / "checkpoints" / "global_final.ckpt");
  if (!fed.records.empty()) {
    save_params(fed.records[0].global, dir / "checkpoints" / "global_init.ckpt");
    m.add(dir / "checkpoints" / "global_init.ckpt");
  }
  m.commit();
  double final_loss = fed.losses.empty() ? 0.0 : fed.losses.back().loss;
  std::cout << "federation done: " << cfg.fed.rounds << " rounds, final client loss "
            << final_loss << "\n";
  return 0;
}

int cmd_attack_mi(const ExperimentConfig& cfg) {
  ManifestWriter m = manifest_for(cfg, "attack-mi");
  fs::path dir(cfg.out_dir);
  Graph target = load_bundle(dir / "bundle");
  ModelParams global = load_params(dir / "checkpoints" / "global_final.ckpt");
  std::optional<ModelParams> w0;
  if (fs::exists(dir / "checkpoints" / "global_init.ckpt"))
    w0 = load_params(dir / "checkpoints" / "global_init.ckpt");
  MiaStage mia = run_mia_stage(cfg, global, target, w0 ? &*w0 : nullptr);

  std::string out = "node,score,true_member\n";
  for (std::size_t i = 0; i < mia.scores.size(); ++i)
    out += std::to_string(i) + "," + format_double(mia.scores[i]) + "," +
           std::to_string(int(mia.true_member[i])) + "\n";
  atomic_write_file(dir / "mi_scores.csv", out);
  m.add(dir / "mi_scores.csv");
  save_mlp(mia.classifier, dir / "checkpoints" / "mi_classifier.ckpt");
  m.add(dir / "checkpoints" / "mi_classifier.ckpt");
  m.commit();
  std::cout << "membership attack AUC: " << mia.auc << "\n";
  return 0;
}

int cmd_invert(const ExperimentConfig& cfg) {
  ManifestWriter m = manifest_for(cfg, "invert");
  fs::path dir(cfg.out_dir);
  Graph target = load_bundle(dir / "bundle");
  Partition part = load_partition(dir / "partition.csv", target, cfg.k);
  auto records = load_records(dir / "records.bin");

  TapConfig tap_cfg = cfg.tap_cfg;
  tap_cfg.seed = sub_seed(cfg.seed, "tap");
  TapTrace trace = tap(records, tap_cfg);
  write_tap_csv(trace, records, dir / "tap.csv");
  m.add(dir / "tap.csv");

  auto inv = run_inversions(cfg, trace, records, part, target);
  std::optional<Graph> shadow;
  if (cfg.membership.shadow.use_sbm || !cfg.membership.shadow.bundle.empty())
    shadow = materialize_dataset(cfg.membership.shadow, cfg.seed, "shadow");
  std::string quality = "client,edge_auc,rnmse,struct_kl_vs_shadow\n";
  for (int k = 0; k < cfg.k; ++k) {
    fs::path cdir = dir / "recon" / ("client_" + std::to_string(k));
    Graph rg = reconstruction_to_graph(inv[k].rec, target.num_classes);
    save_bundle(rg, cdir);
    for (const char* f :
         {"meta.json", "features.csv", "edges.csv", "labels.csv", "masks.csv"})
      m.add(cdir / f);
    std::string trace_csv = "epoch,total,cos,smooth,frob\n";
    for (const auto& row : inv[k].rec.trace)
      trace_csv += std::to_string(row.epoch) + "," + format_double(row.total) + "," +
                   format_double(row.cos) + "," + format_double(row.smooth) + "," +
                   format_double(row.frob) + "\n";
    atomic_write_file(cdir / "loss_trace.csv", trace_csv);
    m.add(cdir / "loss_trace.csv");
    quality += std::to_string(k) + "," + format_double(inv[k].edge_auc) + "," +
               format_double(inv[k].feature_rnmse) + ",";
    if (shadow)
      quality += format_double(structural_similarity_kl(rg, *shadow, 10, 1e-3));
    quality += "\n";
  }
  atomic_write_file(dir / "inversion_quality.csv", quality);
  m.add(dir / "inversion_quality.csv");
  m.commit();
  std::cout << "inversion done for " << cfg.k << " clients\n";
  return 0;
}

int cmd_attack_own(const ExperimentConfig& cfg) {
  ManifestWriter m = manifest_for(cfg, "attack-own");
  fs::path dir(cfg.out_dir);
  Graph target = load_bundle(dir / "bundle");
  Partition part = load_partition(dir / "partition.csv", target, cfg.k);
  ModelParams global = load_params(dir / "checkpoints" / "global_final.ckpt");

  std::vector<Graph> recon_graphs;
  for (int k = 0; k < cfg.k; ++k)
    recon_graphs.push_back(
        load_bundle(dir / "recon" / ("client_" + std::to_string(k))));
  PrototypeSet protos = build_prototypes(global, recon_graphs);
  save_prototypes(protos, dir / "prototypes.ckpt");
  m.add(dir / "prototypes.ckpt");

  std::vector<int> nodes(target.num_nodes);
  for (int i = 0; i < target.num_nodes; ++i) nodes[i] = i;
  auto assignments = assign_owners(global, target, nodes, protos);

  std::string out = "node,true_client,pred_client,distance\n";
  std::vector<int> pred(target.num_nodes);
  for (int i = 0; i < target.num_nodes; ++i) {
    pred[i] = assignments[i].client;
    out += std::to_string(i) + "," + std::to_string(part.assignment[i]) + "," +
           std::to_string(pred[i]) + "," +
           format_double(assignments[i].distances[pred[i]]) + "\n";
  }
  atomic_write_file(dir / "ownership.csv", out);
  m.add(dir / "ownership.csv");
  m.commit();
  std::cout << "ownership accuracy: " << ownership_accuracy(pred, part.assignment)
            << "\n";
  return 0;
}

int cmd_defend(const ExperimentConfig& cfg) {
  if (cfg.defense_etas.empty())
    throw ConfigError("defend requires defense.etas in the config");
  ManifestWriter m = manifest_for(cfg, "defend");
  fs::path dir(cfg.out_dir);
  auto rows = tradeoff_sweep(cfg.defense_etas, cfg);
  std::string out = "eta,test_acc,mi_auc,own_acc,seed\n";
  for (const auto& r : rows)
    out += (std::isfinite(r.eta) ? format_double(r.eta) : std::string("inf")) + "," +
           format_double(r.test_acc) + "," + format_double(r.mi_auc) + "," +
           format_double(r.own_acc) + "," + std::to_string(r.seed) + "\n";
  atomic_write_file(dir / "defense_sweep.csv", out);
  m.add(dir / "defense_sweep.csv");
  m.commit();
  std::cout << "defense sweep written (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_report(const ExperimentConfig& cfg) {
  ManifestWriter m = manifest_for(cfg, "report");
  fs::path dir(cfg.out_dir);

  json summary;
  summary["strategy"] = to_string(cfg.fed.strategy);
  summary["k"] = cfg.k;

  std::string mi_auc_cell, own_cell, edge_cell, rnmse_cell;
  if (fs::exists(dir / "mi_scores.csv")) {
    auto lines = read_lines(dir / "mi_scores.csv");
    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cells = split_csv_line(lines[i]);
      scores.push_back(parse_double(cells[1], "mi_scores.csv", i + 1));
      labels.push_back(parse_long(cells[2], "mi_scores.csv", i + 1) != 0);
    }
    double v = auc(scores, labels);
    summary["mi_auc"] = v;
    mi_auc_cell = format_double(v);
  }
  if (fs::exists(dir / "ownership.csv")) {
    auto lines = read_lines(dir / "ownership.csv");
    int hits = 0, total = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cells = split_csv_line(lines[i]);
      hits += (cells[1] == cells[2]);
      ++total;
    }
    double v = total ? static_cast<double>(hits) / total : 0.0;
    summary["own_acc_" + std::to_string(cfg.k)] = v;
    own_cell = format_double(v);
  }
  if (fs::exists(dir / "inversion_quality.csv")) {
    auto lines = read_lines(dir / "inversion_quality.csv");
    double sa = 0.0, sr = 0.0;
    int n = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      auto cells = split_csv_line(lines[i]);
      sa += parse_double(cells[1], "inversion_quality.csv", i + 1);
      sr += parse_double(cells[2], "inversion_quality.csv", i + 1);
      ++n;
    }
    if (n) {
      summary["edge_auc_mean"] = sa / n;
      summary["rnmse_mean"] = sr / n;
      edge_cell = format_double(sa / n);
      rnmse_cell = format_double(sr / n);
    }
  }

  std::string csv = "strategy,k,mi_auc,own_acc_" + std::to_string(cfg.k) +
                    ",edge_auc_mean,rnmse_mean\n";
  csv += std::string(to_string(cfg.fed.strategy)) + "," + std::to_string(cfg.k) + "," +
         mi_auc_cell + "," + own_cell + "," + edge_cell + "," + rnmse_cell + "\n";
  atomic_write_file(dir / "summary.csv", csv);
  atomic_write_file(dir / "summary.json", summary.dump(2) + "\n");
  m.add(dir / "summary.csv");
  m.add(dir / "summary.json");
  m.commit();
  std::cout << summary.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ccmia: cross-client attacks on federated GNNs"};
  app.require_subcommand(1);

  std::string config_path, out_flag;
  std::uint64_t seed_flag = 0;
  bool seed_set = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON")->required();
    sub->add_option("--seed", seed_flag, "master seed override")
        ->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--out", out_flag, "output directory override");
  };

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic SBM bundle");
  add_common(gen);
  auto* part_sub = app.add_subcommand("partition", "split a bundle into K parts");
  // config-driven form plus the standalone flag form
  part_sub->add_option("--config", config_path, "experiment config JSON");
  part_sub->add_option("--seed", seed_flag, "seed")
      ->each([&](const std::string&) { seed_set = true; });
  part_sub->add_option("--out", out_flag, "output dir (config form) or partition file");
  int part_k = 0;
  double part_tol = 0.1;
  std::string part_in;
  part_sub->add_option("--k", part_k, "number of parts");
  part_sub->add_option("--balance-tol", part_tol, "balance tolerance");
  part_sub->add_option("--in", part_in, "input bundle directory");
  auto* train = app.add_subcommand("train-fed", "run federated training");
  add_common(train);
  auto* mi = app.add_subcommand("attack-mi", "shadow membership inference");
  add_common(mi);
  auto* inv = app.add_subcommand("invert", "gradient inversion per client");
  add_common(inv);
  auto* own = app.add_subcommand("attack-own", "prototype ownership attack");
  add_common(own);
  auto* def = app.add_subcommand("defend", "defense trade-off sweep");
  add_common(def);
  auto* rep = app.add_subcommand("report", "aggregate artifacts into a summary");
  add_common(rep);

  CLI11_PARSE(app, argc, argv);

  try {
    if (part_sub->parsed() && !part_in.empty()) {
      if (part_k < 1) throw ConfigError("partition: --k required");
      return cmd_partition_standalone(part_k, part_tol, seed_flag, part_in, out_flag);
    }
    ExperimentConfig cfg =
        load_config(config_path, seed_set ? &seed_flag : nullptr, &out_flag);
    if (gen->parsed()) return cmd_gen_synth(cfg);
    if (part_sub->parsed()) return cmd_partition(cfg);
    if (train->parsed()) return cmd_train_fed(cfg);
    if (mi->parsed()) return cmd_attack_mi(cfg);
    if (inv->parsed()) return cmd_invert(cfg);
    if (own->parsed()) return cmd_attack_own(cfg);
    if (def->parsed()) return cmd_defend(cfg);
    if (rep->parsed()) return cmd_report(cfg);
  } catch (const std::exception& e) {
    json err = {{"error", e.what()},
                {"type", dynamic_cast<const ConfigError*>(&e) ? "config" : "runtime"}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 1;
}
