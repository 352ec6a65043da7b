#include "ccmia/experiment.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include "ccmia/metrics.hpp"
#include "ccmia/rng.hpp"
#include "ccmia/tensor_io.hpp"
#include "ccmia/threading.hpp"

namespace ccmia {

using json = nlohmann::json;

void ExperimentConfig::validate() const {
  if (k < 1) throw ConfigError("config: k must be >= 1");
  if (balance_tol < 0.0) throw ConfigError("config: balance_tol must be >= 0");
  fed.validate();
  if (tap_cfg.gamma < 0.0 || tap_cfg.gamma > 1.0)
    throw ConfigError("config: tap gamma in [0,1]");
  if (!dataset.use_sbm && dataset.bundle.empty())
    throw ConfigError("config: dataset needs either a bundle path or an sbm block");
  if (fed.strategy == Strategy::feddf_simplified && !transfer.has_value())
    throw ConfigError("config: feddf_simplified requires a transfer dataset");
}

namespace {

DatasetSpec parse_dataset(const json& j) {
  DatasetSpec spec;
  if (j.contains("bundle")) spec.bundle = j.at("bundle").get<std::string>();
  if (j.contains("sbm")) {
    spec.use_sbm = true;
    const json& s = j.at("sbm");
    spec.sbm.blocks = s.at("blocks").get<std::vector<int>>();
    spec.sbm.p_in = s.at("p_in").get<double>();
    spec.sbm.p_out = s.at("p_out").get<double>();
    spec.sbm.feature_noise = s.value("feature_noise", 1.0);
    if (s.contains("feature_centers")) {
      auto rows = s.at("feature_centers").get<std::vector<std::vector<double>>>();
      spec.sbm.feature_centers.resize(rows.size(), rows.empty() ? 0 : rows[0].size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t f = 0; f < rows[i].size(); ++f)
          spec.sbm.feature_centers(i, f) = rows[i][f];
    } else {
      // default centers: one-hot-ish separated means, dim = block count
      int b = static_cast<int>(spec.sbm.blocks.size());
      double sep = s.value("center_separation", 3.0);
      int d = s.value("feature_dim", b);
      spec.sbm.feature_centers = Eigen::MatrixXd::Zero(b, d);
      for (int i = 0; i < b; ++i) spec.sbm.feature_centers(i, i % d) = sep;
    }
  }
  spec.train_frac = j.value("train_frac", 0.4);
  spec.val_frac = j.value("val_frac", 0.0);
  return spec;
}

json dataset_to_json(const DatasetSpec& spec) {
  json j;
  if (!spec.bundle.empty()) j["bundle"] = spec.bundle;
  if (spec.use_sbm) {
    json s;
    s["blocks"] = spec.sbm.blocks;
    s["p_in"] = spec.sbm.p_in;
    s["p_out"] = spec.sbm.p_out;
    s["feature_noise"] = spec.sbm.feature_noise;
    std::vector<std::vector<double>> centers;
    for (Eigen::Index i = 0; i < spec.sbm.feature_centers.rows(); ++i) {
      std::vector<double> row;
      for (Eigen::Index f = 0; f < spec.sbm.feature_centers.cols(); ++f)
        row.push_back(spec.sbm.feature_centers(i, f));
      centers.push_back(std::move(row));
    }
    s["feature_centers"] = centers;
    j["sbm"] = s;
  }
  j["train_frac"] = spec.train_frac;
  j["val_frac"] = spec.val_frac;
  return j;
}

double parse_eta(const json& v) {
  if (v.is_string()) {
    if (v.get<std::string>() == "inf")
      return std::numeric_limits<double>::infinity();
    throw ConfigError("config: eta must be a number or \"inf\"");
  }
  return v.get<double>();
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig cfg;
  cfg.dataset = parse_dataset(j.at("dataset"));
  cfg.k = j.value("k", 3);
  cfg.balance_tol = j.value("balance_tol", 0.1);
  cfg.seed = j.value("seed", 0ull);
  cfg.out_dir = j.value("out", "");

  if (j.contains("federation")) {
    const json& f = j.at("federation");
    cfg.fed.strategy = strategy_from_string(f.value("strategy", "fedavg"));
    cfg.fed.rounds = f.value("rounds", 100);
    cfg.fed.local_steps = f.value("local_steps", 1);
    cfg.fed.lr = f.value("lr", 1e-3);
    cfg.fed.momentum = f.value("momentum", 0.0);
    cfg.fed.weight_decay = f.value("weight_decay", 0.0);
    cfg.fed.prox_mu = f.value("prox_mu", 0.0);
    cfg.fed.hidden = f.value("hidden", 128);
    cfg.fed.distill_steps = f.value("distill_steps", 1);
    cfg.fed.mode =
        propagation_mode_from_string(f.value("mode", "sym_norm_adj_self_loops"));
  }
  cfg.fed.seed = cfg.seed;

  if (j.contains("tap")) {
    const json& t = j.at("tap");
    cfg.tap_cfg.gamma = t.value("gamma", 1.0);
    cfg.tap_cfg.proxy_rule =
        proxy_rule_from_string(t.value("proxy_rule", "zero_order_hold"));
  }

  if (j.contains("membership")) {
    const json& m = j.at("membership");
    if (m.contains("shadow")) cfg.membership.shadow = parse_dataset(m.at("shadow"));
    cfg.membership.shadow_train_fraction = m.value("shadow_train_fraction", 0.4);
    std::string mimic = m.value("shadow_mimic", "central");
    if (mimic == "federated")
      cfg.membership.federated_shadow = true;
    else if (mimic != "central")
      throw ConfigError("membership.shadow_mimic must be central|federated");
    cfg.membership.gnn.epochs = m.value("gnn_epochs", 100);
    cfg.membership.gnn.lr = m.value("gnn_lr", 1e-3);
    if (m.contains("mlp")) {
      const json& p = m.at("mlp");
      cfg.membership.mlp.hidden_layers = p.value("hidden_layers", 2);
      cfg.membership.mlp.width = p.value("width", 128);
      cfg.membership.mlp.keep_prob = p.value("keep_prob", 0.5);
      cfg.membership.mlp.batchnorm = p.value("batchnorm", true);
      cfg.membership.mlp.lr = p.value("lr", 1e-3);
      cfg.membership.mlp.steps = p.value("steps", 300);
    }
  }

  if (j.contains("inversion")) {
    const json& v = j.at("inversion");
    cfg.ownership.round = v.value("round", 0);
    cfg.ownership.alpha = v.value("alpha", 1e-3);
    cfg.ownership.beta = v.value("beta", 1e-4);
    cfg.ownership.epochs = v.value("epochs", 300);
    cfg.ownership.lr_x = v.value("lr_x", 0.1);
    cfg.ownership.lr_a = v.value("lr_a", 0.1);
    cfg.ownership.rho = v.value("rho", -1.0);
  }

  if (j.contains("defense")) {
    const json& d = j.at("defense");
    if (d.contains("eta")) cfg.defense_eta = parse_eta(d.at("eta"));
    if (d.contains("etas"))
      for (const auto& v : d.at("etas")) cfg.defense_etas.push_back(parse_eta(v));
  }

  if (j.contains("transfer")) cfg.transfer = parse_dataset(j.at("transfer"));

  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  return parse_experiment_config(j);
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = dataset_to_json(cfg.dataset);
  j["k"] = cfg.k;
  j["balance_tol"] = cfg.balance_tol;
  j["seed"] = cfg.seed;
  j["out"] = cfg.out_dir;
  j["federation"] = {{"strategy", to_string(cfg.fed.strategy)},
                     {"rounds", cfg.fed.rounds},
                     {"local_steps", cfg.fed.local_steps},
                     {"lr", cfg.fed.lr},
                     {"momentum", cfg.fed.momentum},
                     {"weight_decay", cfg.fed.weight_decay},
                     {"prox_mu", cfg.fed.prox_mu},
                     {"hidden", cfg.fed.hidden},
                     {"distill_steps", cfg.fed.distill_steps},
                     {"mode", to_string(cfg.fed.mode)}};
  j["tap"] = {{"gamma", cfg.tap_cfg.gamma},
              {"proxy_rule", to_string(cfg.tap_cfg.proxy_rule)}};
  j["membership"] = {{"shadow", dataset_to_json(cfg.membership.shadow)},
                     {"shadow_train_fraction", cfg.membership.shadow_train_fraction},
                     {"shadow_mimic",
                      cfg.membership.federated_shadow ? "federated" : "central"},
                     {"gnn_epochs", cfg.membership.gnn.epochs},
                     {"gnn_lr", cfg.membership.gnn.lr},
                     {"mlp",
                      {{"hidden_layers", cfg.membership.mlp.hidden_layers},
                       {"width", cfg.membership.mlp.width},
                       {"keep_prob", cfg.membership.mlp.keep_prob},
                       {"batchnorm", cfg.membership.mlp.batchnorm},
                       {"lr", cfg.membership.mlp.lr},
                       {"steps", cfg.membership.mlp.steps}}}};
  j["inversion"] = {{"round", cfg.ownership.round}, {"alpha", cfg.ownership.alpha},
                    {"beta", cfg.ownership.beta},   {"epochs", cfg.ownership.epochs},
                    {"lr_x", cfg.ownership.lr_x},   {"lr_a", cfg.ownership.lr_a},
                    {"rho", cfg.ownership.rho}};
  json d;
  d["eta"] = std::isfinite(cfg.defense_eta) ? json(cfg.defense_eta) : json("inf");
  json etas = json::array();
  for (double e : cfg.defense_etas)
    etas.push_back(std::isfinite(e) ? json(e) : json("inf"));
  d["etas"] = etas;
  j["defense"] = d;
  if (cfg.transfer) j["transfer"] = dataset_to_json(*cfg.transfer);
  if (cfg.fed.strategy == Strategy::feddf_simplified)
    j["notes"] = "feddf_simplified: logit-averaging distillation stand-in, not full FedDF";
  return j;
}

Graph materialize_dataset(const DatasetSpec& spec, std::uint64_t seed,
                          const std::string& tag) {
  if (!spec.bundle.empty()) return load_bundle(spec.bundle);
  if (!spec.use_sbm) throw ConfigError("dataset: nothing to materialize");
  Graph g = gen_sbm(spec.sbm, sub_seed(seed, "dataset_" + tag));
  assign_split_masks(g, spec.train_frac, spec.val_frac,
                     sub_seed(seed, "split_" + tag));
  return g;
}

TrainStage run_train_stage(const ExperimentConfig& cfg, double defense_eta) {
  TrainStage st;
  st.target = materialize_dataset(cfg.dataset, cfg.seed, "target");
  st.part = partition(st.target, cfg.k, cfg.balance_tol,
                      sub_seed(cfg.seed, "partition"));
  st.client_graphs = st.part.subgraphs;
  if (std::isfinite(defense_eta)) {
    for (int k = 0; k < cfg.k; ++k) {
      DefenseConfig d;
      d.eta = defense_eta;
      d.seed = sub_seed(cfg.seed, "defense", static_cast<std::uint64_t>(k));
      st.client_graphs[k].features = perturb_features(st.client_graphs[k].features, d);
    }
  }
  std::optional<Graph> transfer;
  if (cfg.transfer)
    transfer = materialize_dataset(*cfg.transfer, cfg.seed, "transfer");
  FedConfig fed = cfg.fed;
  fed.seed = cfg.seed;
  st.fed = run_federation(st.client_graphs, fed, transfer ? &*transfer : nullptr);
  return st;
}

MiaStage run_mia_stage(const ExperimentConfig& cfg, const ModelParams& global,
                       const Graph& target, const ModelParams* w0) {
  Graph shadow = materialize_dataset(cfg.membership.shadow, cfg.seed, "shadow");
  GnnTrainConfig gnn = cfg.membership.gnn;
  gnn.hidden = global.hidden;  // classifier input width must match
  gnn.mode = global.mode;
  std::uint64_t attacker_seed = sub_seed(cfg.seed, "attacker_gnn");

  ModelParams attacker;
  Mask member;
  if (cfg.membership.federated_shadow) {
    // Replay the victim's protocol: partition the shadow, run the same
    // federated recipe over the shadow's own train masks. Warm-started from
    // the round-0 global weights, which every client received.
    if (shadow.num_features != global.W1.rows() ||
        shadow.num_classes != global.W2.cols())
      throw ConfigError("federated shadow mimic needs matching shapes");
    assign_split_masks(shadow, cfg.membership.shadow_train_fraction, 0.0,
                       sub_seed(attacker_seed, "shadow_split"));
    Partition spart =
        partition(shadow, cfg.k, cfg.balance_tol, sub_seed(cfg.seed, "shadow_part"));
    FedConfig sfed = cfg.fed;
    sfed.seed = sub_seed(cfg.seed, "shadow_fed");
    sfed.rounds = cfg.membership.gnn.epochs;
    attacker = run_federation(spart.subgraphs, sfed, nullptr, w0).params;
    member = shadow.train_mask;
  } else {
    // fine-tune the distributed global model when shapes permit; a shadow
    // with a different feature width gets its own fresh first layer
    const ModelParams* warm =
        (shadow.num_features == global.W1.rows() &&
         shadow.num_classes == global.W2.cols())
            ? &global
            : nullptr;
    attacker = train_attacker_gnn(shadow, cfg.membership.shadow_train_fraction,
                                  gnn, attacker_seed, warm);
    member = member_split(shadow.num_nodes, cfg.membership.shadow_train_fraction,
                          attacker_seed);
  }
  AttackDataset ds = build_attack_dataset(attacker, shadow, member);
  MlpParams clf = train_mlp(ds, cfg.membership.mlp, sub_seed(cfg.seed, "mlp"));

  std::vector<int> nodes(target.num_nodes);
  for (int i = 0; i < target.num_nodes; ++i) nodes[i] = i;
  Eigen::VectorXd scores = infer_membership(clf, global, target, nodes);

  MiaStage out;
  out.scores.assign(scores.data(), scores.data() + scores.size());
  out.true_member = target.train_mask;
  out.auc = auc(out.scores, out.true_member);
  out.classifier = std::move(clf);
  return out;
}

namespace {

// The client's train-masked nodes are what its gradient reflects; those are
// the nodes the attacker reconstructs (counts and labels are attack inputs).
std::vector<int> reconstruction_nodes(const Partition& part, int client) {
  const Graph& sub = part.subgraphs[client];
  std::vector<int> nodes;
  for (int li = 0; li < sub.num_nodes; ++li)
    if (sub.train_mask[li]) nodes.push_back(part.local_to_global[client][li]);
  return nodes;
}

Eigen::MatrixXd induced_adjacency(const Graph& g, const std::vector<int>& nodes) {
  std::vector<int> pos(g.num_nodes, -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) pos[nodes[i]] = static_cast<int>(i);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nodes.size(), nodes.size());
  for (auto [u, v] : g.edges)
    if (pos[u] >= 0 && pos[v] >= 0) {
      a(pos[u], pos[v]) = 1.0;
      a(pos[v], pos[u]) = 1.0;
    }
  return a;
}

}  // namespace

std::vector<ClientInversion> run_inversions(const ExperimentConfig& cfg,
                                            const TapTrace& trace,
                                            const std::vector<RoundRecord>& records,
                                            const Partition& part,
                                            const Graph& target) {
  int round = cfg.ownership.round;
  if (round < 0 || round >= static_cast<int>(records.size()))
    throw ConfigError("inversion: round out of range");
  const ModelParams& snapshot = records[round].global;

  std::vector<ClientInversion> out(cfg.k);
  parallel_for(cfg.k, [&](int k) {
    ClientInversion ci;
    ci.nodes = reconstruction_nodes(part, k);
    if (ci.nodes.empty()) throw Error("inversion: client has no train nodes");
    const TapCell& cell = trace.cells[round][k];
    if (!cell.estimate)
      throw Error("inversion: no gradient estimate for client " + std::to_string(k));
    const Eigen::MatrixXd& g_w1 = cell.estimate->W1;
    if (g_w1.norm() == 0.0)
      throw Error("inversion: zero gradient estimate for client " + std::to_string(k));

    Eigen::MatrixXd true_adj = induced_adjacency(target, ci.nodes);
    int n = static_cast<int>(ci.nodes.size());
    InversionConfig icfg;
    icfg.alpha = cfg.ownership.alpha;
    icfg.beta = cfg.ownership.beta;
    icfg.epochs = cfg.ownership.epochs;
    icfg.lr_x = cfg.ownership.lr_x;
    icfg.lr_a = cfg.ownership.lr_a;
    icfg.n_nodes = n;
    double true_edges = true_adj.sum() / 2.0;
    icfg.rho = cfg.ownership.rho >= 0.0 ? cfg.ownership.rho
                                        : std::max(1.0, true_edges) / n;
    icfg.seed = sub_seed(cfg.seed, "invert", static_cast<std::uint64_t>(k));

    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = target.labels[ci.nodes[i]];
    ci.rec = invert(snapshot, g_w1, labels, icfg);

    Eigen::MatrixXd true_x(n, target.num_features);
    for (int i = 0; i < n; ++i) true_x.row(i) = target.features.row(ci.nodes[i]);
    ci.edge_auc = edge_auc(true_adj, ci.rec.A_cont);
    ci.feature_rnmse = rnmse(true_x, ci.rec.X);
    out[k] = std::move(ci);
  });
  return out;
}

OwnershipStage run_ownership_stage(const ExperimentConfig& cfg,
                                   const std::vector<RoundRecord>& records,
                                   const Partition& part, const Graph& target,
                                   const ModelParams& embed_model) {
  OwnershipStage st;
  TapConfig tap_cfg = cfg.tap_cfg;
  tap_cfg.seed = sub_seed(cfg.seed, "tap");
  st.trace = tap(records, tap_cfg);
  st.inversions = run_inversions(cfg, st.trace, records, part, target);

  std::vector<Graph> recon_graphs;
  recon_graphs.reserve(st.inversions.size());
  for (const auto& ci : st.inversions)
    recon_graphs.push_back(reconstruction_to_graph(ci.rec, target.num_classes));
  st.prototypes = build_prototypes(embed_model, recon_graphs);

  std::vector<int> nodes(target.num_nodes);
  for (int i = 0; i < target.num_nodes; ++i) nodes[i] = i;
  auto assignments = assign_owners(embed_model, target, nodes, st.prototypes);
  st.pred.resize(target.num_nodes);
  st.distance.resize(target.num_nodes);
  for (int i = 0; i < target.num_nodes; ++i) {
    st.pred[i] = assignments[i].client;
    st.distance[i] = assignments[i].distances[assignments[i].client];
  }
  st.truth = part.assignment;
  st.accuracy = ownership_accuracy(st.pred, st.truth);
  return st;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg, double defense_eta) {
  TrainStage train = run_train_stage(cfg, defense_eta);
  PipelineResult r;
  r.eta = defense_eta;
  r.global = train.fed.params;
  bool any_test = false;
  for (auto v : train.target.test_mask) any_test |= (v != 0);
  r.test_acc = any_test ? accuracy(train.fed.params, train.target, train.target.test_mask)
                        : 0.0;
  const ModelParams* w0 =
      train.fed.records.empty() ? nullptr : &train.fed.records[0].global;
  r.mia = run_mia_stage(cfg, train.fed.params, train.target, w0);
  r.mi_auc = r.mia.auc;
  r.ownership = run_ownership_stage(cfg, train.fed.records, train.part, train.target,
                                    train.fed.params);
  r.own_acc = r.ownership.accuracy;
  return r;
}

std::vector<SweepRow> tradeoff_sweep(const std::vector<double>& etas,
                                     const ExperimentConfig& cfg) {
  std::vector<SweepRow> rows;
  rows.reserve(etas.size());
  for (double eta : etas) {
    PipelineResult r = run_pipeline(cfg, eta);
    rows.push_back({eta, r.test_acc, r.mi_auc, r.own_acc, cfg.seed});
  }
  return rows;
}

void save_records(const std::vector<RoundRecord>& records,
                  const std::filesystem::path& path) {
  TensorFile tf;
  int clients = records.empty() ? 0 : static_cast<int>(records[0].uploads.size());
  tf.meta = {{"rounds", records.size()}, {"clients", clients}};
  if (!records.empty()) {
    tf.meta["mode"] = to_string(records[0].global.mode);
    tf.meta["hidden"] = records[0].global.hidden;
  }
  for (const auto& rec : records) {
    std::string p = "r" + std::to_string(rec.round) + "_";
    tf.tensors.emplace_back(p + "global_W1", rec.global.W1);
    tf.tensors.emplace_back(p + "global_b1", rec.global.b1);
    tf.tensors.emplace_back(p + "global_W2", rec.global.W2);
    tf.tensors.emplace_back(p + "global_b2", rec.global.b2);
    for (std::size_t k = 0; k < rec.uploads.size(); ++k) {
      std::string q = p + "c" + std::to_string(k) + "_";
      tf.tensors.emplace_back(q + "W1", rec.uploads[k].W1);
      tf.tensors.emplace_back(q + "b1", rec.uploads[k].b1);
      tf.tensors.emplace_back(q + "W2", rec.uploads[k].W2);
      tf.tensors.emplace_back(q + "b2", rec.uploads[k].b2);
    }
  }
  save_tensors(path, tf);
}

std::vector<RoundRecord> load_records(const std::filesystem::path& path) {
  TensorFile tf = load_tensors(path);
  int rounds = tf.meta.at("rounds").get<int>();
  int clients = tf.meta.at("clients").get<int>();
  PropagationMode mode =
      propagation_mode_from_string(tf.meta.at("mode").get<std::string>());
  int hidden = tf.meta.at("hidden").get<int>();

  std::map<std::string, Eigen::MatrixXd> by_name;
  for (auto& [name, m] : tf.tensors) by_name[name] = std::move(m);
  auto get = [&](const std::string& name) -> const Eigen::MatrixXd& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error("records: missing tensor " + name);
    return it->second;
  };

  std::vector<RoundRecord> records(rounds);
  for (int t = 0; t < rounds; ++t) {
    std::string p = "r" + std::to_string(t) + "_";
    RoundRecord& rec = records[t];
    rec.round = t;
    rec.global.W1 = get(p + "global_W1");
    rec.global.b1 = get(p + "global_b1");
    rec.global.W2 = get(p + "global_W2");
    rec.global.b2 = get(p + "global_b2");
    rec.global.mode = mode;
    rec.global.hidden = hidden;
    rec.selected.assign(clients, 1);
    rec.uploads.resize(clients);
    for (int k = 0; k < clients; ++k) {
      std::string q = p + "c" + std::to_string(k) + "_";
      rec.uploads[k].W1 = get(q + "W1");
      rec.uploads[k].b1 = get(q + "b1");
      rec.uploads[k].W2 = get(q + "W2");
      rec.uploads[k].b2 = get(q + "b2");
    }
  }
  return records;
}

}  // namespace ccmia
