#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ccmia/gnn.hpp"

namespace ccmia {

enum class Strategy { fedavg, fedprox, scaffold, fednova, feddf_simplified };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct FedConfig {
  Strategy strategy = Strategy::fedavg;
  int rounds = 1;
  int local_steps = 1;       // tau
  double lr = 1e-3;          // eta, client and server
  double momentum = 0.0;     // mu in [0,1)
  double weight_decay = 0.0; // lambda
  double prox_mu = 0.0;      // FedProx coefficient
  std::uint64_t seed = 0;
  int hidden = 128;
  PropagationMode mode = PropagationMode::sym_norm_adj_self_loops;
  int distill_steps = 1;     // feddf_simplified only

  void validate() const;
};

// Everything recorded about one round: the global snapshot the clients
// trained against, plus each client's upload. This is the surface the
// eavesdropper taps.
struct RoundRecord {
  int round = 0;
  ModelParams global;                 // W^t, before the aggregation step
  std::vector<Gradients> uploads;     // one per client
  std::vector<std::uint8_t> selected; // delta_t; all-participate here
};

// Per-client persistent state (SCAFFOLD control variates).
struct ClientState {
  Gradients control;        // c_k
  Gradients server_control; // c, copied in by the orchestrator each round
  bool has_control = false;
};

struct LocalUpdate {
  Gradients upload;
  ClientState state;
  double loss = 0.0;       // loss at the global snapshot
  double grad_norm = 0.0;  // Frobenius norm of the upload
};

// One client's contribution for a round. Strategies:
//   fedavg   - mean of the tau local-step gradients
//   fedprox  - same with + prox_mu * (W - W_global) added per step
//   scaffold - mean corrected gradient g - c_k + c; c_k updated by the
//              option-II rule (which reduces to the mean raw gradient)
//   fednova  - normalized direction (W_global - W_final)/(tau*lr), computed
//              via the algebraically identical mean of step gradients
LocalUpdate local_update(const ModelParams& global, const Graph& g_k,
                         const FedConfig& cfg, const ClientState& state);

// Server step:  dW = mean(uploads) + lambda*W;  M' = mu*M + dW;  W' = W - eta*M'.
std::pair<ModelParams, Gradients> aggregate(const std::vector<Gradients>& uploads,
                                            const ModelParams& W, const Gradients& M,
                                            const FedConfig& cfg);

struct RoundLoss {
  int round = 0;
  int client = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct FederationResult {
  ModelParams params;
  std::vector<RoundRecord> records;
  std::vector<RoundLoss> losses;
};

// Runs cfg.rounds federated rounds over the client graphs. Deterministic
// given cfg.seed. transfer_graph is required by feddf_simplified and ignored
// otherwise. initial, when given, replaces the Glorot initialization (used by
// the shadow replica, which starts from the distributed global weights).
FederationResult run_federation(const std::vector<Graph>& clients,
                                const FedConfig& cfg,
                                const Graph* transfer_graph = nullptr,
                                const ModelParams* initial = nullptr);

}  // namespace ccmia
