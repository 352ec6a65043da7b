#include "ccmia/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccmia/errors.hpp"

namespace ccmia {

namespace {

std::pair<long, long> class_counts(const std::vector<std::uint8_t>& labels) {
  long pos = 0;
  for (auto y : labels) pos += (y != 0);
  long neg = static_cast<long>(labels.size()) - pos;
  if (pos == 0 || neg == 0) throw Error("auc: both classes required");
  return {pos, neg};
}

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw Error("auc: length mismatch");
  auto [pos, neg] = class_counts(labels);

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] > scores[b]; });

  // Sweep thresholds from high to low; tied scores advance in one step so the
  // ROC segment is a diagonal (half credit for ties under the trapezoid rule).
  double auc_sum = 0.0;
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double tp_step = 0.0, fp_step = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]])
        tp_step += 1.0;
      else
        fp_step += 1.0;
      ++j;
    }
    // trapezoid between (fp, tp) and (fp + fp_step, tp + tp_step)
    auc_sum += fp_step * (tp + tp_step / 2.0);
    tp += tp_step;
    fp += fp_step;
    i = j;
  }
  return auc_sum / (static_cast<double>(pos) * static_cast<double>(neg));
}

double auc_rank(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size()) throw Error("auc: length mismatch");
  auto [pos, neg] = class_counts(labels);

  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; AUC = (sum of positive ranks - P(P+1)/2) / (PN).
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) pos_rank_sum += midrank;
    i = j;
  }
  double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double auc_null_sigma(int positives, int negatives) {
  double p = positives, n = negatives;
  return std::sqrt((p + n + 1.0) / (12.0 * p * n));
}

double rnmse(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat) {
  if (x.size() != x_hat.size()) throw Error("rnmse: length mismatch");
  double ref = x.norm();
  if (ref == 0.0) throw Error("rnmse: zero-norm reference");
  return (x - x_hat).norm() / ref;
}

double rnmse(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
    throw Error("rnmse: shape mismatch");
  double ref = x.norm();
  if (ref == 0.0) throw Error("rnmse: zero-norm reference");
  return (x - x_hat).norm() / ref;
}

double edge_auc(const Eigen::MatrixXd& true_adj, const Eigen::MatrixXd& a_cont) {
  if (true_adj.rows() != a_cont.rows() || true_adj.cols() != a_cont.cols())
    throw Error("edge_auc: shape mismatch");
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (Eigen::Index i = 0; i < true_adj.rows(); ++i)
    for (Eigen::Index j = i + 1; j < true_adj.cols(); ++j) {
      scores.push_back(a_cont(i, j));
      labels.push_back(true_adj(i, j) != 0.0 ? 1 : 0);
    }
  return auc(scores, labels);
}

}  // namespace ccmia
