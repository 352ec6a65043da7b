#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccmia/defense.hpp"
#include "ccmia/eavesdrop.hpp"
#include "ccmia/federation.hpp"
#include "ccmia/inversion.hpp"
#include "ccmia/membership.hpp"
#include "ccmia/partition.hpp"
#include "ccmia/prototypes.hpp"

namespace ccmia {

// Dataset source: an on-disk bundle or an SBM draw (with split fractions).
struct DatasetSpec {
  std::string bundle;  // non-empty: load this directory
  bool use_sbm = false;
  SbmParams sbm;
  double train_frac = 0.4;
  double val_frac = 0.0;
};

struct MembershipAttackConfig {
  DatasetSpec shadow;
  double shadow_train_fraction = 0.4;
  GnnTrainConfig gnn;  // hidden/mode forced to the federation's at run time
  MlpConfig mlp;
  // "central": plain full-batch attacker GNN on the shadow.
  // "federated": replay the victim's federated protocol on a shadow
  // partition (warm-started from the round-0 global weights when available),
  // so the shadow members inherit the same training-induced signature.
  bool federated_shadow = false;
};

struct OwnershipAttackConfig {
  int round = 0;         // which intercepted round feeds the inversion
  double alpha = 1e-3;
  double beta = 1e-4;
  int epochs = 300;
  double lr_x = 0.1;
  double lr_a = 0.1;
  double rho = -1.0;     // < 0: use the true per-client train-subgraph density
};

struct ExperimentConfig {
  DatasetSpec dataset;
  int k = 3;
  double balance_tol = 0.1;
  FedConfig fed;
  TapConfig tap_cfg;
  MembershipAttackConfig membership;
  OwnershipAttackConfig ownership;
  double defense_eta = std::numeric_limits<double>::infinity();
  std::vector<double> defense_etas;  // sweep points for `defend`
  std::string out_dir;
  std::uint64_t seed = 0;
  std::optional<DatasetSpec> transfer;  // feddf_simplified public graph

  void validate() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

// Builds the graph a DatasetSpec names; SBM draws and splits use streams
// derived from (seed, tag) so target/shadow/transfer are independent.
Graph materialize_dataset(const DatasetSpec& spec, std::uint64_t seed,
                          const std::string& tag);

// ---- pipeline stages (pure; the CLI adds file IO around them) ----

struct TrainStage {
  Graph target;             // unperturbed
  Partition part;           // of the target
  std::vector<Graph> client_graphs;  // possibly feature-perturbed
  FederationResult fed;
};

TrainStage run_train_stage(const ExperimentConfig& cfg, double defense_eta);

struct MiaStage {
  std::vector<double> scores;           // per target node
  std::vector<std::uint8_t> true_member;
  double auc = 0.0;
  MlpParams classifier;
};

// w0: the round-0 global snapshot; seeds the federated shadow replica.
MiaStage run_mia_stage(const ExperimentConfig& cfg, const ModelParams& global,
                       const Graph& target, const ModelParams* w0 = nullptr);

struct ClientInversion {
  std::vector<int> nodes;  // global node ids reconstructed (client train set)
  Reconstruction rec;
  double edge_auc = 0.0;
  double feature_rnmse = 0.0;
};

struct OwnershipStage {
  TapTrace trace;
  std::vector<ClientInversion> inversions;
  PrototypeSet prototypes;
  std::vector<int> pred;   // per target node
  std::vector<int> truth;
  std::vector<double> distance;
  double accuracy = 0.0;
};

// Taps the recorded rounds, inverts each client's first-layer gradient from
// the configured round, builds prototypes through `embed_model`, and assigns
// every target node.
OwnershipStage run_ownership_stage(const ExperimentConfig& cfg,
                                   const std::vector<RoundRecord>& records,
                                   const Partition& part, const Graph& target,
                                   const ModelParams& embed_model);

// Inversions only (the `invert` subcommand); same per-client settings.
std::vector<ClientInversion> run_inversions(const ExperimentConfig& cfg,
                                            const TapTrace& trace,
                                            const std::vector<RoundRecord>& records,
                                            const Partition& part,
                                            const Graph& target);

struct PipelineResult {
  double eta = 0.0;
  double test_acc = 0.0;
  double mi_auc = 0.0;
  double own_acc = 0.0;
  ModelParams global;
  MiaStage mia;
  OwnershipStage ownership;
};

// Full run: train (with optional feature perturbation), both attacks,
// utility on the clean test split. Shares cfg.seed across defense etas.
PipelineResult run_pipeline(const ExperimentConfig& cfg, double defense_eta);

struct SweepRow {
  double eta = 0.0;
  double test_acc = 0.0;
  double mi_auc = 0.0;
  double own_acc = 0.0;
  std::uint64_t seed = 0;
};

// One full pipeline per eta, shared base seed. Order follows `etas`.
std::vector<SweepRow> tradeoff_sweep(const std::vector<double>& etas,
                                     const ExperimentConfig& cfg);

// ---- persistence of round records (train-fed <-> attack stages) ----

void save_records(const std::vector<RoundRecord>& records,
                  const std::filesystem::path& path);
std::vector<RoundRecord> load_records(const std::filesystem::path& path);

}  // namespace ccmia
