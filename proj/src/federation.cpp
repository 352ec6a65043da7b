#include "ccmia/federation.hpp"

#include "ccmia/rng.hpp"
#include "ccmia/threading.hpp"

namespace ccmia {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::fedavg: return "fedavg";
    case Strategy::fedprox: return "fedprox";
    case Strategy::scaffold: return "scaffold";
    case Strategy::fednova: return "fednova";
    case Strategy::feddf_simplified: return "feddf_simplified";
  }
  return "?";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "fedavg") return Strategy::fedavg;
  if (s == "fedprox") return Strategy::fedprox;
  if (s == "scaffold") return Strategy::scaffold;
  if (s == "fednova") return Strategy::fednova;
  if (s == "feddf_simplified") return Strategy::feddf_simplified;
  throw ConfigError("unknown strategy: " + s);
}

void FedConfig::validate() const {
  if (rounds < 0) throw ConfigError("fed: rounds must be >= 0");
  if (local_steps < 1) throw ConfigError("fed: local_steps must be >= 1");
  if (lr <= 0.0) throw ConfigError("fed: lr must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("fed: momentum in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("fed: weight_decay must be >= 0");
  if (prox_mu < 0.0) throw ConfigError("fed: prox_mu must be >= 0");
  if (hidden < 1) throw ConfigError("fed: hidden must be >= 1");
}

LocalUpdate local_update(const ModelParams& global, const Graph& g_k,
                         const FedConfig& cfg, const ClientState& state) {
  bool any_train = false;
  for (auto v : g_k.train_mask) any_train |= (v != 0);
  if (!any_train) throw Error("local_update: client has empty train mask");

  Eigen::MatrixXd P = propagation_matrix(g_k, global.mode);
  ModelParams w = global;  // local copy walked by the tau steps
  Gradients mean_raw = zeros_like(global);
  Gradients mean_upload = zeros_like(global);
  double first_loss = 0.0;

  for (int step = 0; step < cfg.local_steps; ++step) {
    LossGrads lg = loss_and_grads(w, g_k.features, P, g_k.labels, g_k.train_mask);
    if (step == 0) first_loss = lg.loss;
    Gradients step_grad = lg.grads;  // raw gradient at the current local point
    axpy(mean_raw, 1.0 / cfg.local_steps, step_grad);

    switch (cfg.strategy) {
      case Strategy::fedprox:
        if (cfg.prox_mu != 0.0) {
          step_grad.W1 += cfg.prox_mu * (w.W1 - global.W1);
          step_grad.b1 += cfg.prox_mu * (w.b1 - global.b1);
          step_grad.W2 += cfg.prox_mu * (w.W2 - global.W2);
          step_grad.b2 += cfg.prox_mu * (w.b2 - global.b2);
        }
        break;
      case Strategy::scaffold:
        if (state.has_control) {
          axpy(step_grad, -1.0, state.control);
          axpy(step_grad, 1.0, state.server_control);
        }
        break;
      default:
        break;
    }
    axpy(mean_upload, 1.0 / cfg.local_steps, step_grad);

    // Walk the local model; skipped on the last step when only one step is
    // taken (the walked point is never read again).
    if (step + 1 < cfg.local_steps) {
      w.W1 -= cfg.lr * step_grad.W1;
      w.b1 -= cfg.lr * step_grad.b1;
      w.W2 -= cfg.lr * step_grad.W2;
      w.b2 -= cfg.lr * step_grad.b2;
    }
  }

  LocalUpdate out;
  out.state = state;
  switch (cfg.strategy) {
    case Strategy::fednova:
      // (W_global - W_final)/(tau*lr) equals the mean of the raw step
      // gradients for plain local SGD; computed in that form to avoid the
      // catastrophic cancellation of subtracting nearby weights.
      out.upload = mean_raw;
      break;
    case Strategy::scaffold:
      out.upload = mean_upload;
      // Option-II control update: c_k+ = c_k - c + (W_global - W_final)/(tau*lr),
      // which simplifies to the mean raw gradient along the local path.
      out.state.control = mean_raw;
      out.state.has_control = true;
      break;
    default:
      out.upload = mean_upload;
      break;
  }
  out.loss = first_loss;
  out.grad_norm = std::sqrt(squared_norm(out.upload));
  return out;
}

std::pair<ModelParams, Gradients> aggregate(const std::vector<Gradients>& uploads,
                                            const ModelParams& W, const Gradients& M,
                                            const FedConfig& cfg) {
  if (uploads.empty()) throw Error("aggregate: no uploads");
  for (const auto& u : uploads)
    if (!same_shape(u, uploads[0])) throw Error("aggregate: shape mismatch");

  Gradients delta = zeros_like(W);
  for (const auto& u : uploads) axpy(delta, 1.0 / uploads.size(), u);
  delta.W1 += cfg.weight_decay * W.W1;
  delta.b1 += cfg.weight_decay * W.b1;
  delta.W2 += cfg.weight_decay * W.W2;
  delta.b2 += cfg.weight_decay * W.b2;

  Gradients m_next = M;
  scale(m_next, cfg.momentum);
  axpy(m_next, 1.0, delta);

  ModelParams w_next = W;
  w_next.W1 -= cfg.lr * m_next.W1;
  w_next.b1 -= cfg.lr * m_next.b1;
  w_next.W2 -= cfg.lr * m_next.W2;
  w_next.b2 -= cfg.lr * m_next.b2;
  return {std::move(w_next), std::move(m_next)};
}

namespace {

// Distillation-lite server pass: push the global model's transfer-graph
// predictions toward the averaged client-model predictions.
void feddf_distill(ModelParams& w, const std::vector<Gradients>& uploads,
                   const Graph& transfer, const FedConfig& cfg) {
  Eigen::MatrixXd P = propagation_matrix(transfer, w.mode);
  Eigen::MatrixXd soft =
      Eigen::MatrixXd::Zero(transfer.num_nodes, w.W2.cols());
  for (const auto& u : uploads) {
    ModelParams client = w;  // implied one-step client model
    client.W1 -= cfg.lr * u.W1;
    client.b1 -= cfg.lr * u.b1;
    client.W2 -= cfg.lr * u.W2;
    client.b2 -= cfg.lr * u.b2;
    soft += forward(client, transfer.features, P).probs / uploads.size();
  }
  Mask all(transfer.num_nodes, 1);
  for (int s = 0; s < cfg.distill_steps; ++s) {
    LossGrads lg = loss_and_grads_soft(w, transfer.features, P, soft, all);
    w.W1 -= cfg.lr * lg.grads.W1;
    w.b1 -= cfg.lr * lg.grads.b1;
    w.W2 -= cfg.lr * lg.grads.W2;
    w.b2 -= cfg.lr * lg.grads.b2;
  }
}

}  // namespace

FederationResult run_federation(const std::vector<Graph>& clients,
                                const FedConfig& cfg, const Graph* transfer_graph,
                                const ModelParams* initial) {
  cfg.validate();
  if (clients.empty()) throw ConfigError("run_federation: no clients");
  if (cfg.strategy == Strategy::feddf_simplified && transfer_graph == nullptr)
    throw ConfigError("feddf_simplified requires a transfer graph");
  const int k = static_cast<int>(clients.size());
  const int d_in = clients[0].num_features;
  const int c = clients[0].num_classes;
  for (const auto& g : clients)
    if (g.num_features != d_in || g.num_classes != c)
      throw ConfigError("run_federation: clients disagree on feature/class counts");

  FederationResult result;
  if (initial) {
    if (initial->W1.rows() != d_in || initial->W2.cols() != c)
      throw ConfigError("run_federation: initial params shape mismatch");
    result.params = *initial;
  } else {
    result.params = init_params(d_in, cfg.hidden, c, cfg.mode, cfg.seed);
  }
  Gradients momentum = zeros_like(result.params);
  Gradients server_control = zeros_like(result.params);
  std::vector<ClientState> states(k);
  for (auto& s : states) {
    s.control = zeros_like(result.params);
    s.server_control = zeros_like(result.params);
  }

  for (int t = 0; t < cfg.rounds; ++t) {
    RoundRecord rec;
    rec.round = t;
    rec.global = result.params;
    rec.selected.assign(k, 1);
    rec.uploads.resize(k);

    std::vector<LocalUpdate> updates(k);
    parallel_for(k, [&](int i) {
      ClientState st = states[i];
      st.server_control = server_control;
      updates[i] = local_update(result.params, clients[i], cfg, st);
    });

    std::vector<Gradients> uploads;
    uploads.reserve(k);
    for (int i = 0; i < k; ++i) {
      if (cfg.strategy == Strategy::scaffold) {
        // c <- c + (1/K) sum(c_k+ - c_k)
        axpy(server_control, 1.0 / k, updates[i].state.control);
        axpy(server_control, -1.0 / k, states[i].control);
      }
      states[i] = updates[i].state;
      rec.uploads[i] = updates[i].upload;
      uploads.push_back(updates[i].upload);
      result.losses.push_back({t, i, updates[i].loss, updates[i].grad_norm});
    }

    auto [w_next, m_next] = aggregate(uploads, result.params, momentum, cfg);
    result.params = std::move(w_next);
    momentum = std::move(m_next);

    if (cfg.strategy == Strategy::feddf_simplified)
      feddf_distill(result.params, uploads, *transfer_graph, cfg);

    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace ccmia
