#include "ccmia/inversion.hpp"

#include <algorithm>
#include <cmath>

#include "ccmia/rng.hpp"
#include "ccmia/tape.hpp"

namespace ccmia {

namespace tp = ccmia::tape;

void InversionConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("inversion: alpha, beta >= 0");
  if (epochs < 0) throw ConfigError("inversion: epochs >= 0");
  if (lr_x <= 0.0 || lr_a <= 0.0) throw ConfigError("inversion: step sizes > 0");
  if (n_nodes < 1) throw ConfigError("inversion: n_nodes >= 1");
  if (rho * n_nodes < 1.0) throw ConfigError("inversion: rho * n_nodes >= 1 required");
}

double cosine_grad_loss(const Eigen::MatrixXd& g_true, const Eigen::MatrixXd& g_syn) {
  if (g_true.rows() != g_syn.rows() || g_true.cols() != g_syn.cols())
    throw Error("cosine_grad_loss: shape mismatch");
  double nt = g_true.norm();
  if (nt == 0.0) throw Error("cosine_grad_loss: zero true gradient");
  double ns = g_syn.norm();
  if (ns == 0.0) return 1.0;  // guard: undefined cosine treated as orthogonal
  return 1.0 - g_true.cwiseProduct(g_syn).sum() / (nt * ns);
}

double smoothness(const Eigen::MatrixXd& X, const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() != X.rows())
    throw Error("smoothness: shape mismatch");
  if ((A.array() < 0.0).any()) throw Error("smoothness: A entries must be >= 0");
  Eigen::VectorXd d = A.rowwise().sum();
  Eigen::VectorXd guarded = d.array() + kDegreeEps;
  Eigen::VectorXd r = guarded.array().rsqrt();
  double term1 = (d.array() / guarded.array() * X.array().square().rowwise().sum()).sum();
  Eigen::MatrixXd xr = r.asDiagonal() * X;
  double term2 = xr.cwiseProduct(A * xr).sum();
  return term1 - term2;
}

Eigen::MatrixXd project_unit_interval(const Eigen::MatrixXd& a) {
  return a.cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::MatrixXd sample_top_edges(const Eigen::MatrixXd& a_cont, int n_edges) {
  if (a_cont.rows() != a_cont.cols()) throw Error("sample_top_edges: square matrix");
  const auto n = a_cont.rows();
  struct Entry {
    double w;
    int i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      entries.push_back({a_cont(i, j), i, j});
  if (n_edges < 0 || n_edges > static_cast<int>(entries.size()))
    throw Error("sample_top_edges: n_edges out of range");
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.w != b.w) return a.w > b.w;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < n_edges; ++e) {
    out(entries[e].i, entries[e].j) = 1.0;
    out(entries[e].j, entries[e].i) = 1.0;
  }
  return out;
}

namespace {

struct TapeObjective {
  tp::Var total;
  tp::Var x_leaf;
  tp::Var u_leaf;  // upper-triangle parameters; A = U_upper + U_upper^T
  TotalLossParts parts;
};

// Propagation operator on the tape, matching propagation_matrix_dense().
tp::Var tape_propagation(const tp::Var& a, PropagationMode mode, Eigen::Index n) {
  using namespace tp;
  if (mode == PropagationMode::sym_norm_adj_self_loops) {
    Var at = add(a, constant(Eigen::MatrixXd::Identity(n, n)));
    Var r = pow_scalar(sum_rows(at), -0.5);
    return mul(mul(at, bcast_col(r, n)), bcast_row(transpose(r), n));
  }
  Var d = sum_rows(a);
  Var guarded = add_scalar(d, kDegreeEps);
  Var diag_vals = mul(d, pow_scalar(guarded, -1.0));
  Var diag = mul(constant(Eigen::MatrixXd::Identity(n, n)), bcast_col(diag_vals, n));
  Var r = pow_scalar(guarded, -0.5);
  Var rar = mul(mul(a, bcast_col(r, n)), bcast_row(transpose(r), n));
  return sub(diag, rar);
}

tp::Var tape_smoothness(const tp::Var& x, const tp::Var& a, Eigen::Index n,
                        Eigen::Index d_in) {
  using namespace tp;
  Var d = sum_rows(a);
  Var guarded = add_scalar(d, kDegreeEps);
  Var term1 = sum_all(mul(mul(d, pow_scalar(guarded, -1.0)), sum_rows(mul(x, x))));
  Var r = pow_scalar(guarded, -0.5);
  Var xr = mul(x, bcast_col(r, d_in));
  Var term2 = sum_all(mul(xr, matmul(a, xr)));
  (void)n;
  return sub(term1, term2);
}

// Builds the full objective graph; gradients of the cosine term
// flow through the synthesized first-layer gradient (second-order path).
TapeObjective build_objective(const ModelParams& global,
                              const Eigen::MatrixXd& g_true_w1,
                              const Eigen::MatrixXd& X, const Eigen::MatrixXd& A_cont,
                              const std::vector<int>& labels,
                              const InversionConfig& cfg) {
  using namespace tp;
  const Eigen::Index n = X.rows();
  const Eigen::Index d_in = X.cols();
  const Eigen::Index classes = global.W2.cols();
  if (g_true_w1.rows() != global.W1.rows() || g_true_w1.cols() != global.W1.cols())
    throw Error("total_loss: gradient shape mismatch");
  if (d_in != global.W1.rows()) throw Error("total_loss: feature width mismatch");
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw Error("total_loss: label count mismatch");

  TapeObjective obj;
  obj.x_leaf = leaf(X);

  // Upper-triangle parameterization keeps A symmetric with zero diagonal.
  Eigen::MatrixXd upper_mask = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) upper_mask(i, j) = 1.0;
  obj.u_leaf = leaf(A_cont.cwiseProduct(upper_mask));
  Var up = mul(obj.u_leaf, constant(upper_mask));
  Var a = add(up, transpose(up));

  Var p = tape_propagation(a, global.mode, n);
  Var w1 = leaf(global.W1);
  Var z1 = add(matmul(p, matmul(obj.x_leaf, w1)),
               bcast_row(constant(global.b1.transpose()), n));
  Var e1 = relu(z1);
  Var z2 = add(matmul(p, matmul(e1, constant(global.W2))),
               bcast_row(constant(global.b2.transpose()), n));

  // Mean cross-entropy over all reconstructed nodes (labels are attack
  // inputs). Row max detached: softmax is shift invariant.
  Eigen::VectorXd row_max = z2.value().rowwise().maxCoeff();
  Var s = sub(z2, bcast_col(constant(row_max), classes));
  Var lse = log(sum_rows(exp(s)));
  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= classes)
      throw Error("total_loss: label out of range");
    onehot(i, labels[i]) = 1.0;
  }
  Var loss = scalar_mul(sub(sum_all(lse), dot(s, constant(onehot))),
                        1.0 / static_cast<double>(n));

  Var g_syn = grad(loss, {w1})[0];

  Var cos_term;
  double g_true_norm = g_true_w1.norm();
  if (g_true_norm == 0.0) throw Error("total_loss: zero true gradient");
  if (g_syn.value().norm() == 0.0) {
    // guard: cosine undefined, treated as maximally misaligned-but-finite
    cos_term = constant(Eigen::MatrixXd::Ones(1, 1));
  } else {
    Var num = dot(constant(g_true_w1), g_syn);
    Var den = scalar_mul(pow_scalar(frob2(g_syn), 0.5), g_true_norm);
    cos_term = sub(constant(Eigen::MatrixXd::Ones(1, 1)),
                   mul(num, pow_scalar(den, -1.0)));
  }

  Var smooth_term = tape_smoothness(obj.x_leaf, a, n, d_in);
  Var frob_term = frob2(a);
  obj.total = add(add(cos_term, scalar_mul(smooth_term, cfg.alpha)),
                  scalar_mul(frob_term, cfg.beta));
  obj.parts.cos = scalar(cos_term);
  obj.parts.smooth = scalar(smooth_term);
  obj.parts.frob = scalar(frob_term);
  obj.parts.total = scalar(obj.total);
  return obj;
}

}  // namespace

TotalLossParts total_loss(const ModelParams& global, const Eigen::MatrixXd& g_true_w1,
                          const Eigen::MatrixXd& X, const Eigen::MatrixXd& A_cont,
                          const std::vector<int>& labels, const InversionConfig& cfg) {
  return build_objective(global, g_true_w1, X, A_cont, labels, cfg).parts;
}

TotalLossGrads total_loss_grads(const ModelParams& global,
                                const Eigen::MatrixXd& g_true_w1,
                                const Eigen::MatrixXd& X, const Eigen::MatrixXd& A_cont,
                                const std::vector<int>& labels,
                                const InversionConfig& cfg) {
  TapeObjective obj = build_objective(global, g_true_w1, X, A_cont, labels, cfg);
  auto grads = tp::grad(obj.total, {obj.x_leaf, obj.u_leaf});
  TotalLossGrads out;
  out.parts = obj.parts;
  out.dX = grads[0].value();
  Eigen::MatrixXd du = grads[1].value();
  out.dA = du + du.transpose();  // mirror the upper-triangle derivative
  return out;
}

Reconstruction invert(const ModelParams& global, const Eigen::MatrixXd& g_true_w1,
                      const std::vector<int>& labels, const InversionConfig& cfg) {
  cfg.validate();
  const int n = cfg.n_nodes;
  if (static_cast<int>(labels.size()) != n)
    throw ConfigError("invert: labels.size() != n_nodes");
  const int d_in = static_cast<int>(global.W1.rows());

  Rng x_rng(sub_seed(cfg.seed, "invert_x"));
  Rng a_rng(sub_seed(cfg.seed, "invert_a"));
  Reconstruction rec;
  rec.labels = labels;
  rec.X.resize(n, d_in);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < d_in; ++f) rec.X(i, f) = 0.1 * x_rng.normal();
  rec.A_cont = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = a_rng.uniform01();
      rec.A_cont(i, j) = v;
      rec.A_cont(j, i) = v;
    }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    TotalLossGrads g =
        total_loss_grads(global, g_true_w1, rec.X, rec.A_cont, labels, cfg);
    if (!std::isfinite(g.parts.total))
      throw Error("invert: non-finite loss at epoch " + std::to_string(epoch) +
                  " (cos=" + std::to_string(g.parts.cos) +
                  ", smooth=" + std::to_string(g.parts.smooth) +
                  ", frob=" + std::to_string(g.parts.frob) + ")");
    rec.trace.push_back(
        {epoch, g.parts.total, g.parts.cos, g.parts.smooth, g.parts.frob});
    rec.X -= cfg.lr_x * g.dX;
    rec.A_cont = project_unit_interval(rec.A_cont - cfg.lr_a * g.dA);
  }

  // tiny nudge so rho given as an edge-count ratio floors to the exact count
  int n_edges = static_cast<int>(std::floor(cfg.rho * n + 1e-9));
  rec.A_bin = sample_top_edges(rec.A_cont, n_edges);
  return rec;
}

Graph reconstruction_to_graph(const Reconstruction& r, int num_classes) {
  Graph g;
  g.num_nodes = static_cast<int>(r.X.rows());
  g.num_features = static_cast<int>(r.X.cols());
  g.num_classes = num_classes;
  g.features = r.X;
  g.labels = r.labels;
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = i + 1; j < g.num_nodes; ++j)
      if (r.A_bin(i, j) != 0.0) g.edges.emplace_back(i, j);
  g.train_mask.assign(g.num_nodes, 1);
  g.val_mask.assign(g.num_nodes, 0);
  g.test_mask.assign(g.num_nodes, 0);
  return g;
}

}  // namespace ccmia
