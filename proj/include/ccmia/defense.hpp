#pragma once

#include <limits>

#include <Eigen/Dense>

#include "ccmia/errors.hpp"

namespace ccmia {

// Metric-DP feature perturbation. eta = infinity is the documented no-op
// sentinel (undefended run).
struct DefenseConfig {
  double eta = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;

  bool enabled() const { return std::isfinite(eta); }
  void validate() const {
    if (!(eta > 0.0)) throw ConfigError("defense: eta must be > 0");
  }
};

// Additive mechanism for the Euclidean metric: per row, x' = x + r*u with u
// uniform on the unit sphere and r ~ Gamma(shape=D, scale=1/eta). Expected
// displacement is D/eta. Deterministic per seed; identity when eta = inf.
Eigen::MatrixXd perturb_features(const Eigen::MatrixXd& X, const DefenseConfig& cfg);

}  // namespace ccmia
