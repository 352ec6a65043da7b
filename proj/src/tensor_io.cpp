#include "ccmia/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ccmia/csv.hpp"
#include "ccmia/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace ccmia {

using json = nlohmann::json;

void save_tensors(const std::filesystem::path& path, const TensorFile& tf) {
  json header;
  header["format"] = "ccmia-tensors-v1";
  header["tensors"] = json::array();
  for (const auto& [name, m] : tf.tensors)
    header["tensors"].push_back(
        {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  if (!tf.meta.is_null()) header["meta"] = tf.meta;

  std::string out = header.dump();
  out += '\n';
  for (const auto& [name, m] : tf.tensors) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double v = m(i, j);
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        out.append(buf, sizeof(double));
      }
  }
  atomic_write_file(path, out);
}

TensorFile load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing file: " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line))
    throw ParseError(path.string(), 1, "missing header line");
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 1, e.what());
  }
  if (header.value("format", "") != "ccmia-tensors-v1")
    throw ParseError(path.string(), 1, "unknown tensor file format");

  TensorFile tf;
  if (header.contains("meta")) tf.meta = header["meta"];
  for (const auto& t : header.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    Eigen::Index rows = t.at("rows").get<Eigen::Index>();
    Eigen::Index cols = t.at("cols").get<Eigen::Index>();
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        char buf[sizeof(double)];
        if (!in.read(buf, sizeof(double)))
          throw ParseError(path.string(), 2, "truncated tensor payload");
        double v;
        std::memcpy(&v, buf, sizeof(double));
        m(i, j) = v;
      }
    tf.tensors.emplace_back(std::move(name), std::move(m));
  }
  return tf;
}

}  // namespace ccmia
