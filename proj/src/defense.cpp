#include "ccmia/defense.hpp"

#include "ccmia/rng.hpp"

namespace ccmia {

Eigen::MatrixXd perturb_features(const Eigen::MatrixXd& X, const DefenseConfig& cfg) {
  if (!cfg.enabled()) return X;
  cfg.validate();
  const int d = static_cast<int>(X.cols());
  if (d == 0) return X;
  Eigen::MatrixXd out = X;
  Rng rng(sub_seed(cfg.seed, "dx_privacy"));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double r = rng.gamma_int(d, 1.0 / cfg.eta);
    Eigen::VectorXd u = rng.unit_sphere(d);
    out.row(i) += r * u.transpose();
  }
  return out;
}

}  // namespace ccmia
