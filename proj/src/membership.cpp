#include "ccmia/membership.hpp"

#include <cmath>
#include <map>

#include "ccmia/rng.hpp"
#include "ccmia/tensor_io.hpp"

namespace ccmia {

std::vector<std::uint8_t> member_split(int num_nodes, double frac, std::uint64_t seed) {
  if (frac < 0.0 || frac > 1.0) throw ConfigError("member_split: frac in [0,1]");
  std::vector<int> order(num_nodes);
  for (int i = 0; i < num_nodes; ++i) order[i] = i;
  Rng rng(sub_seed(seed, "member_split"));
  rng.shuffle(order);
  int members = static_cast<int>(std::ceil(frac * num_nodes));
  std::vector<std::uint8_t> mask(num_nodes, 0);
  for (int i = 0; i < members; ++i) mask[order[i]] = 1;
  return mask;
}

ModelParams train_attacker_gnn(const Graph& shadow, double train_fraction,
                               const GnnTrainConfig& cfg, std::uint64_t seed,
                               const ModelParams* warm_start) {
  if (shadow.num_classes < 2) throw ConfigError("attacker gnn: shadow needs >= 2 classes");
  Mask members = member_split(shadow.num_nodes, train_fraction, seed);
  int count = 0;
  for (auto v : members) count += v;
  if (count == 0 || count == shadow.num_nodes)
    throw ConfigError("attacker gnn: degenerate member split");
  if (warm_start && (warm_start->W1.rows() != shadow.num_features ||
                     warm_start->W2.cols() != shadow.num_classes))
    throw ConfigError("attacker gnn: warm start shape mismatch");

  ModelParams w = warm_start
                      ? *warm_start
                      : init_params(shadow.num_features, cfg.hidden,
                                    shadow.num_classes, cfg.mode,
                                    sub_seed(seed, "attacker_init"));
  Eigen::MatrixXd P = propagation_matrix(shadow, cfg.mode);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossGrads lg = loss_and_grads(w, shadow.features, P, shadow.labels, members);
    w.W1 -= cfg.lr * lg.grads.W1;
    w.b1 -= cfg.lr * lg.grads.b1;
    w.W2 -= cfg.lr * lg.grads.W2;
    w.b2 -= cfg.lr * lg.grads.b2;
  }
  return w;
}

AttackDataset build_attack_dataset(const ModelParams& attacker, const Graph& shadow,
                                   const std::vector<std::uint8_t>& member) {
  if (static_cast<int>(member.size()) != shadow.num_nodes)
    throw Error("build_attack_dataset: member mask length mismatch");
  AttackDataset ds;
  ds.embeddings = first_layer_embedding(attacker, shadow);
  ds.member = member;
  return ds;
}

MlpParams init_mlp(int input_width, const MlpConfig& cfg, std::uint64_t seed) {
  if (cfg.keep_prob <= 0.0 || cfg.keep_prob > 1.0)
    throw ConfigError("mlp: keep_prob in (0,1]");
  if (cfg.hidden_layers < 0) throw ConfigError("mlp: hidden_layers >= 0");
  Rng rng(sub_seed(seed, "mlp_init"));
  auto glorot = [&](int in, int out) {
    double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd m(in, out);
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j) m(i, j) = rng.uniform(-limit, limit);
    return m;
  };
  MlpParams p;
  p.keep_prob = cfg.keep_prob;
  p.batchnorm = cfg.batchnorm;
  int in = input_width;
  for (int l = 0; l < cfg.hidden_layers; ++l) {
    MlpLayer layer;
    layer.W = glorot(in, cfg.width);
    layer.b = Eigen::VectorXd::Zero(cfg.width);
    layer.gamma = Eigen::VectorXd::Ones(cfg.width);
    layer.beta = Eigen::VectorXd::Zero(cfg.width);
    layer.run_mean = Eigen::VectorXd::Zero(cfg.width);
    layer.run_var = Eigen::VectorXd::Ones(cfg.width);
    p.hidden.push_back(std::move(layer));
    in = cfg.width;
  }
  p.Wout = glorot(in, 2);
  p.bout = Eigen::VectorXd::Zero(2);
  return p;
}

namespace {

struct LayerCache {
  Eigen::MatrixXd input;   // H_{l-1}
  Eigen::MatrixXd u;       // pre-batchnorm
  Eigen::MatrixXd uhat;    // normalized
  Eigen::VectorXd inv_std; // 1/sqrt(var+eps)
  Eigen::MatrixXd y;       // pre-relu
  Eigen::MatrixXd r;       // post-relu
};

Eigen::MatrixXd softmax2(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = logits.row(i).maxCoeff();
    Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
    probs.row(i) = (e / e.sum()).matrix();
  }
  return probs;
}

// Forward in training mode; fills caches when asked.
Eigen::MatrixXd mlp_forward_train(MlpParams& p, const Eigen::MatrixXd& X,
                                  const std::vector<Eigen::MatrixXd>& masks,
                                  double bn_momentum, bool update_stats,
                                  std::vector<LayerCache>* caches) {
  if (masks.size() != p.hidden.size())
    throw Error("mlp: one dropout mask per hidden layer required");
  Eigen::MatrixXd h = X;
  for (std::size_t l = 0; l < p.hidden.size(); ++l) {
    MlpLayer& layer = p.hidden[l];
    LayerCache cache;
    cache.input = h;
    cache.u = h * layer.W;
    cache.u.rowwise() += layer.b.transpose();
    if (p.batchnorm) {
      Eigen::RowVectorXd mu = cache.u.colwise().mean();
      Eigen::MatrixXd centered = cache.u.rowwise() - mu;
      Eigen::RowVectorXd var = centered.array().square().colwise().mean();
      cache.inv_std = (var.transpose().array() + kBnEps).rsqrt();
      cache.uhat = centered * cache.inv_std.asDiagonal();
      cache.y = cache.uhat * layer.gamma.asDiagonal();
      cache.y.rowwise() += layer.beta.transpose();
      if (update_stats) {
        layer.run_mean = (1.0 - bn_momentum) * layer.run_mean +
                         bn_momentum * mu.transpose();
        layer.run_var = (1.0 - bn_momentum) * layer.run_var +
                        bn_momentum * var.transpose();
      }
    } else {
      cache.y = cache.u;
    }
    cache.r = cache.y.cwiseMax(0.0);
    h = cache.r.cwiseProduct(masks[l]) / p.keep_prob;
    if (caches) caches->push_back(std::move(cache));
  }
  Eigen::MatrixXd logits = h * p.Wout;
  logits.rowwise() += p.bout.transpose();
  if (caches) {
    LayerCache out_cache;
    out_cache.input = h;  // input to the output layer
    caches->push_back(std::move(out_cache));
  }
  return logits;
}

double ce_loss(const Eigen::MatrixXd& logits, const std::vector<std::uint8_t>& labels) {
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    double m = logits.row(i).maxCoeff();
    double lse = std::log((logits.row(i).array() - m).exp().sum()) + m;
    loss += lse - logits(i, labels[i] ? 1 : 0);
  }
  return loss / logits.rows();
}

}  // namespace

double mlp_loss(const MlpParams& p, const Eigen::MatrixXd& X,
                const std::vector<std::uint8_t>& labels,
                const std::vector<Eigen::MatrixXd>& dropout_masks) {
  MlpParams copy = p;
  Eigen::MatrixXd logits =
      mlp_forward_train(copy, X, dropout_masks, 0.0, false, nullptr);
  return ce_loss(logits, labels);
}

Eigen::MatrixXd mlp_hidden_train(const MlpParams& p, const Eigen::MatrixXd& X,
                                 const std::vector<Eigen::MatrixXd>& dropout_masks) {
  MlpParams copy = p;
  std::vector<LayerCache> caches;
  mlp_forward_train(copy, X, dropout_masks, 0.0, false, &caches);
  return caches.back().input;  // input to the output layer
}

double mlp_loss_and_grads(MlpParams& p, const Eigen::MatrixXd& X,
                          const std::vector<std::uint8_t>& labels,
                          const std::vector<Eigen::MatrixXd>& dropout_masks,
                          double bn_momentum, bool update_stats, MlpGrads* grads) {
  const auto n = X.rows();
  std::vector<LayerCache> caches;
  Eigen::MatrixXd logits =
      mlp_forward_train(p, X, dropout_masks, bn_momentum, update_stats, &caches);
  Eigen::MatrixXd probs = softmax2(logits);
  double loss = ce_loss(logits, labels);
  if (!grads) return loss;

  Eigen::MatrixXd dlogits = probs;
  for (Eigen::Index i = 0; i < n; ++i) dlogits(i, labels[i] ? 1 : 0) -= 1.0;
  dlogits /= static_cast<double>(n);

  const Eigen::MatrixXd& h_last = caches.back().input;
  grads->Wout = h_last.transpose() * dlogits;
  grads->bout = dlogits.colwise().sum().transpose();
  Eigen::MatrixXd dh = dlogits * p.Wout.transpose();

  grads->hidden.resize(p.hidden.size());
  for (int l = static_cast<int>(p.hidden.size()) - 1; l >= 0; --l) {
    const LayerCache& cache = caches[l];
    const MlpLayer& layer = p.hidden[l];
    MlpLayer& g = grads->hidden[l];

    Eigen::MatrixXd dr = dh.cwiseProduct(dropout_masks[l]) / p.keep_prob;
    Eigen::MatrixXd dy =
        (cache.y.array() > 0.0).cast<double>().matrix().cwiseProduct(dr);
    Eigen::MatrixXd du;
    if (p.batchnorm) {
      g.gamma = dy.cwiseProduct(cache.uhat).colwise().sum().transpose();
      g.beta = dy.colwise().sum().transpose();
      Eigen::MatrixXd duhat = dy * layer.gamma.asDiagonal();
      // exact backprop through the batch statistics (biased variance)
      Eigen::RowVectorXd mean_duhat = duhat.colwise().mean();
      Eigen::RowVectorXd mean_duhat_uhat =
          duhat.cwiseProduct(cache.uhat).colwise().mean();
      du = duhat;
      du.rowwise() -= mean_duhat;
      du -= cache.uhat * mean_duhat_uhat.transpose().asDiagonal();
      du = du * cache.inv_std.asDiagonal();
    } else {
      du = dy;
      g.gamma = Eigen::VectorXd::Zero(layer.gamma.size());
      g.beta = Eigen::VectorXd::Zero(layer.beta.size());
    }
    g.W = cache.input.transpose() * du;
    g.b = du.colwise().sum().transpose();
    dh = du * layer.W.transpose();
  }
  return loss;
}

MlpParams train_mlp(const AttackDataset& ds, const MlpConfig& cfg, std::uint64_t seed) {
  int pos = 0;
  for (auto m : ds.member) pos += m;
  if (pos == 0 || pos == static_cast<int>(ds.member.size()))
    throw ConfigError("train_mlp: both classes required");

  MlpParams p = init_mlp(static_cast<int>(ds.embeddings.cols()), cfg, seed);
  const auto n = ds.embeddings.rows();
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<Eigen::MatrixXd> masks;
    masks.reserve(p.hidden.size());
    for (std::size_t l = 0; l < p.hidden.size(); ++l) {
      Rng rng(sub_seed(seed, "dropout", static_cast<std::uint64_t>(step),
                       static_cast<std::uint64_t>(l)));
      Eigen::MatrixXd mask(n, p.hidden[l].W.cols());
      if (cfg.keep_prob >= 1.0) {
        mask.setOnes();
      } else {
        for (Eigen::Index i = 0; i < mask.rows(); ++i)
          for (Eigen::Index j = 0; j < mask.cols(); ++j)
            mask(i, j) = rng.uniform01() < cfg.keep_prob ? 1.0 : 0.0;
      }
      masks.push_back(std::move(mask));
    }
    MlpGrads g;
    mlp_loss_and_grads(p, ds.embeddings, ds.member, masks, cfg.bn_momentum, true, &g);
    for (std::size_t l = 0; l < p.hidden.size(); ++l) {
      p.hidden[l].W -= cfg.lr * g.hidden[l].W;
      p.hidden[l].b -= cfg.lr * g.hidden[l].b;
      if (p.batchnorm) {
        p.hidden[l].gamma -= cfg.lr * g.hidden[l].gamma;
        p.hidden[l].beta -= cfg.lr * g.hidden[l].beta;
      }
    }
    p.Wout -= cfg.lr * g.Wout;
    p.bout -= cfg.lr * g.bout;
  }
  return p;
}

Eigen::VectorXd mlp_scores(const MlpParams& p, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd h = X;
  for (const auto& layer : p.hidden) {
    Eigen::MatrixXd u = h * layer.W;
    u.rowwise() += layer.b.transpose();
    if (p.batchnorm) {
      Eigen::VectorXd inv_std = (layer.run_var.array() + kBnEps).rsqrt();
      u.rowwise() -= layer.run_mean.transpose();
      u = u * inv_std.asDiagonal() * layer.gamma.asDiagonal();
      u.rowwise() += layer.beta.transpose();
    }
    h = u.cwiseMax(0.0);  // inference: no dropout scaling (inverted at train time)
  }
  Eigen::MatrixXd logits = h * p.Wout;
  logits.rowwise() += p.bout.transpose();
  return softmax2(logits).col(1);
}

Eigen::VectorXd infer_membership(const MlpParams& clf, const ModelParams& global,
                                 const Graph& target, const std::vector<int>& nodes) {
  Eigen::MatrixXd emb = first_layer_embedding(global, target);
  if (emb.cols() != (clf.hidden.empty() ? clf.Wout.rows() : clf.hidden[0].W.rows()))
    throw ConfigError("infer_membership: embedding width does not match classifier");
  Eigen::MatrixXd rows(nodes.size(), emb.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] < 0 || nodes[i] >= target.num_nodes)
      throw Error("infer_membership: bad node id");
    rows.row(i) = emb.row(nodes[i]);
  }
  return mlp_scores(clf, rows);
}

void save_mlp(const MlpParams& p, const std::filesystem::path& path) {
  TensorFile tf;
  for (std::size_t l = 0; l < p.hidden.size(); ++l) {
    std::string pre = "h" + std::to_string(l) + "_";
    tf.tensors.emplace_back(pre + "W", p.hidden[l].W);
    tf.tensors.emplace_back(pre + "b", p.hidden[l].b);
    tf.tensors.emplace_back(pre + "gamma", p.hidden[l].gamma);
    tf.tensors.emplace_back(pre + "beta", p.hidden[l].beta);
    tf.tensors.emplace_back(pre + "run_mean", p.hidden[l].run_mean);
    tf.tensors.emplace_back(pre + "run_var", p.hidden[l].run_var);
  }
  tf.tensors.emplace_back("Wout", p.Wout);
  tf.tensors.emplace_back("bout", p.bout);
  tf.meta = {{"hidden_layers", p.hidden.size()},
             {"keep_prob", p.keep_prob},
             {"batchnorm", p.batchnorm}};
  save_tensors(path, tf);
}

MlpParams load_mlp(const std::filesystem::path& path) {
  TensorFile tf = load_tensors(path);
  std::map<std::string, Eigen::MatrixXd> by_name;
  for (auto& [name, m] : tf.tensors) by_name[name] = std::move(m);
  MlpParams p;
  p.keep_prob = tf.meta.at("keep_prob").get<double>();
  p.batchnorm = tf.meta.at("batchnorm").get<bool>();
  int layers = tf.meta.at("hidden_layers").get<int>();
  auto get = [&](const std::string& n) -> Eigen::MatrixXd& {
    auto it = by_name.find(n);
    if (it == by_name.end()) throw Error("mlp checkpoint: missing tensor " + n);
    return it->second;
  };
  for (int l = 0; l < layers; ++l) {
    std::string pre = "h" + std::to_string(l) + "_";
    MlpLayer layer;
    layer.W = get(pre + "W");
    layer.b = get(pre + "b");
    layer.gamma = get(pre + "gamma");
    layer.beta = get(pre + "beta");
    layer.run_mean = get(pre + "run_mean");
    layer.run_var = get(pre + "run_var");
    p.hidden.push_back(std::move(layer));
  }
  p.Wout = get("Wout");
  p.bout = get("bout");
  return p;
}

}  // namespace ccmia

