#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace ccmia {

// Checkpoint container: a one-line JSON header naming each tensor's shape,
// then the payloads as row-major little-endian f64, in header order. The
// header carries an optional free-form "meta" object.
struct TensorFile {
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
  nlohmann::json meta;
};

void save_tensors(const std::filesystem::path& path, const TensorFile& tf);
TensorFile load_tensors(const std::filesystem::path& path);

}  // namespace ccmia
