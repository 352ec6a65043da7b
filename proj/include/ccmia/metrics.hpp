#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ccmia/errors.hpp"

namespace ccmia {

// ROC AUC by trapezoidal integration over threshold sweeps. Tied scores are
// grouped into one sweep step, which credits ties at 1/2. Throws on
// single-class input.
double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// Same statistic via the rank / pairwise-concordance route:
//   [#(pos > neg) + 0.5 #(pos == neg)] / (P * N).
// Independent computation used to cross-check auc().
double auc_rank(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels);

// Standard deviation of AUC under the null (scores independent of labels);
// Mann-Whitney U null: sqrt((P + N + 1) / (12 P N)).
double auc_null_sigma(int positives, int negatives);

// ||x - x_hat|| / ||x||; throws on zero-norm reference.
double rnmse(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat);
double rnmse(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat);

// Upper-triangle entries of a_cont scored against true edge indicators.
double edge_auc(const Eigen::MatrixXd& true_adj, const Eigen::MatrixXd& a_cont);

}  // namespace ccmia
