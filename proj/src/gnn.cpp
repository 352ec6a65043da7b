#include "ccmia/gnn.hpp"

#include <cmath>

#include "ccmia/rng.hpp"
#include "ccmia/tensor_io.hpp"

namespace ccmia {

Gradients zeros_like(const ModelParams& p) {
  Gradients g;
  g.W1 = Eigen::MatrixXd::Zero(p.W1.rows(), p.W1.cols());
  g.b1 = Eigen::VectorXd::Zero(p.b1.size());
  g.W2 = Eigen::MatrixXd::Zero(p.W2.rows(), p.W2.cols());
  g.b2 = Eigen::VectorXd::Zero(p.b2.size());
  return g;
}

bool same_shape(const Gradients& a, const Gradients& b) {
  return a.W1.rows() == b.W1.rows() && a.W1.cols() == b.W1.cols() &&
         a.b1.size() == b.b1.size() && a.W2.rows() == b.W2.rows() &&
         a.W2.cols() == b.W2.cols() && a.b2.size() == b.b2.size();
}

void axpy(Gradients& y, double alpha, const Gradients& x) {
  y.W1 += alpha * x.W1;
  y.b1 += alpha * x.b1;
  y.W2 += alpha * x.W2;
  y.b2 += alpha * x.b2;
}

void scale(Gradients& g, double alpha) {
  g.W1 *= alpha;
  g.b1 *= alpha;
  g.W2 *= alpha;
  g.b2 *= alpha;
}

double squared_norm(const Gradients& g) {
  return g.W1.squaredNorm() + g.b1.squaredNorm() + g.W2.squaredNorm() +
         g.b2.squaredNorm();
}

ModelParams init_params(int num_features, int hidden, int num_classes,
                        PropagationMode mode, std::uint64_t seed) {
  ModelParams p;
  p.mode = mode;
  p.hidden = hidden;
  Rng rng(sub_seed(seed, "glorot_init"));
  auto glorot = [&](int in, int out) {
    double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd m(in, out);
    for (int i = 0; i < in; ++i)
      for (int j = 0; j < out; ++j) m(i, j) = rng.uniform(-limit, limit);
    return m;
  };
  p.W1 = glorot(num_features, hidden);
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.W2 = glorot(hidden, num_classes);
  p.b2 = Eigen::VectorXd::Zero(num_classes);
  return p;
}

namespace {

// Row softmax with the usual max-shift for stability.
Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double m = z.row(i).maxCoeff();
    Eigen::ArrayXd e = (z.row(i).array() - m).exp();
    out.row(i) = (e / e.sum()).matrix();
  }
  return out;
}

int mask_count(const Mask& mask) {
  int m = 0;
  for (auto v : mask) m += (v != 0);
  return m;
}

}  // namespace

ForwardResult forward(const ModelParams& p, const Eigen::MatrixXd& X,
                      const Eigen::MatrixXd& P) {
  if (X.cols() != p.W1.rows()) throw Error("forward: feature width mismatch");
  ForwardResult r;
  Eigen::MatrixXd z1 = P * (X * p.W1);
  z1.rowwise() += p.b1.transpose();
  r.first_layer = z1.cwiseMax(0.0);
  r.logits = P * (r.first_layer * p.W2);
  r.logits.rowwise() += p.b2.transpose();
  r.probs = row_softmax(r.logits);
  return r;
}

ForwardResult forward(const ModelParams& p, const Graph& g) {
  return forward(p, g.features, propagation_matrix(g, p.mode));
}

Eigen::MatrixXd first_layer_embedding(const ModelParams& p, const Graph& g) {
  Eigen::MatrixXd P = propagation_matrix(g, p.mode);
  Eigen::MatrixXd z1 = P * (g.features * p.W1);
  z1.rowwise() += p.b1.transpose();
  return z1.cwiseMax(0.0);
}

namespace {

// Shared backprop core; `targets` holds per-row target distributions scaled
// by the row's mask weight (1/m for masked rows, 0 otherwise).
LossGrads backprop(const ModelParams& p, const Eigen::MatrixXd& X,
                   const Eigen::MatrixXd& P, const Eigen::MatrixXd& targets,
                   const Mask& mask, int m) {
  ForwardResult f = forward(p, X, P);
  const auto n = X.rows();

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    // cross-entropy against the (unscaled) target row
    double row_max = f.logits.row(i).maxCoeff();
    double lse = std::log((f.logits.row(i).array() - row_max).exp().sum()) + row_max;
    for (Eigen::Index c = 0; c < f.logits.cols(); ++c) {
      double t = targets(i, c) * m;  // undo the 1/m scaling for the loss value
      if (t != 0.0) loss += t * (lse - f.logits(i, c));
    }
  }
  loss /= m;

  // dL/dZ2 = (probs - target)/m on masked rows
  Eigen::MatrixXd dz2 = Eigen::MatrixXd::Zero(n, f.probs.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    if (mask[i]) dz2.row(i) = f.probs.row(i) / m - targets.row(i);

  LossGrads out;
  out.loss = loss;
  Eigen::MatrixXd pdz2 = P.transpose() * dz2;
  out.grads.W2 = f.first_layer.transpose() * pdz2;
  out.grads.b2 = dz2.colwise().sum().transpose();
  Eigen::MatrixXd de1 = pdz2 * p.W2.transpose();
  Eigen::MatrixXd dz1 =
      (f.first_layer.array() > 0.0).cast<double>() * de1.array();
  Eigen::MatrixXd pdz1 = P.transpose() * dz1;
  out.grads.W1 = X.transpose() * pdz1;
  out.grads.b1 = dz1.colwise().sum().transpose();
  return out;
}

}  // namespace

LossGrads loss_and_grads(const ModelParams& p, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& P, const std::vector<int>& labels,
                         const Mask& mask) {
  int m = mask_count(mask);
  if (m == 0) throw Error("loss_and_grads: empty mask");
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(X.rows(), p.W2.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (mask[i]) targets(i, labels[i]) = 1.0 / m;
  return backprop(p, X, P, targets, mask, m);
}

LossGrads loss_and_grads(const ModelParams& p, const Graph& g, const Mask& mask) {
  return loss_and_grads(p, g.features, propagation_matrix(g, p.mode), g.labels, mask);
}

LossGrads loss_and_grads_soft(const ModelParams& p, const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& P,
                              const Eigen::MatrixXd& soft_targets, const Mask& mask) {
  int m = mask_count(mask);
  if (m == 0) throw Error("loss_and_grads_soft: empty mask");
  Eigen::MatrixXd targets = Eigen::MatrixXd::Zero(X.rows(), p.W2.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    if (mask[i]) targets.row(i) = soft_targets.row(i) / m;
  return backprop(p, X, P, targets, mask, m);
}

double loss_only(const ModelParams& p, const Eigen::MatrixXd& X,
                 const Eigen::MatrixXd& P, const std::vector<int>& labels,
                 const Mask& mask) {
  int m = mask_count(mask);
  if (m == 0) throw Error("loss_only: empty mask");
  ForwardResult f = forward(p, X, P);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    if (!mask[i]) continue;
    double row_max = f.logits.row(i).maxCoeff();
    double lse = std::log((f.logits.row(i).array() - row_max).exp().sum()) + row_max;
    loss += lse - f.logits(i, labels[i]);
  }
  return loss / m;
}

double grad_check(const ModelParams& p, const Graph& g, const Mask& mask,
                  double eps) {
  if (eps == 0.0) throw ConfigError("grad_check: eps must be nonzero");
  Eigen::MatrixXd P = propagation_matrix(g, p.mode);
  LossGrads analytic = loss_and_grads(p, g.features, P, g.labels, mask);

  ModelParams q = p;
  double max_rel = 0.0;
  auto probe = [&](double* param, double analytic_grad) {
    double save = *param;
    *param = save + eps;
    double up = loss_only(q, g.features, P, g.labels, mask);
    *param = save - eps;
    double dn = loss_only(q, g.features, P, g.labels, mask);
    *param = save;
    double numeric = (up - dn) / (2.0 * eps);
    double denom = std::max({std::abs(analytic_grad), std::abs(numeric), 1e-3});
    max_rel = std::max(max_rel, std::abs(analytic_grad - numeric) / denom);
  };

  for (Eigen::Index i = 0; i < q.W1.size(); ++i)
    probe(q.W1.data() + i, analytic.grads.W1(i));
  for (Eigen::Index i = 0; i < q.b1.size(); ++i)
    probe(q.b1.data() + i, analytic.grads.b1(i));
  for (Eigen::Index i = 0; i < q.W2.size(); ++i)
    probe(q.W2.data() + i, analytic.grads.W2(i));
  for (Eigen::Index i = 0; i < q.b2.size(); ++i)
    probe(q.b2.data() + i, analytic.grads.b2(i));
  return max_rel;
}

double accuracy(const ModelParams& p, const Graph& g, const Mask& mask) {
  int m = mask_count(mask);
  if (m == 0) throw Error("accuracy: empty mask");
  ForwardResult f = forward(p, g);
  int hits = 0;
  for (int i = 0; i < g.num_nodes; ++i) {
    if (!mask[i]) continue;
    Eigen::Index arg;
    f.logits.row(i).maxCoeff(&arg);
    hits += (static_cast<int>(arg) == g.labels[i]);
  }
  return static_cast<double>(hits) / m;
}

void save_params(const ModelParams& p, const std::filesystem::path& path) {
  TensorFile tf;
  tf.tensors = {{"W1", p.W1},
                {"b1", p.b1},
                {"W2", p.W2},
                {"b2", p.b2}};
  tf.meta = {{"mode", to_string(p.mode)}, {"hidden", p.hidden}};
  save_tensors(path, tf);
}

ModelParams load_params(const std::filesystem::path& path) {
  TensorFile tf = load_tensors(path);
  ModelParams p;
  for (auto& [name, m] : tf.tensors) {
    if (name == "W1")
      p.W1 = m;
    else if (name == "b1")
      p.b1 = m;
    else if (name == "W2")
      p.W2 = m;
    else if (name == "b2")
      p.b2 = m;
  }
  p.mode = propagation_mode_from_string(tf.meta.at("mode").get<std::string>());
  p.hidden = tf.meta.at("hidden").get<int>();
  return p;
}

}  // namespace ccmia
