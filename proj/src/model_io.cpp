#include "mlrwl/model_io.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace mlrwl {

namespace {

// Compact SHA-1 (FIPS 180-1); plumbing for the model-file provenance hash.
class Sha1 {
 public:
  void update(const unsigned char* data, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
      buffer_[buflen_++] = data[i];
      ++total_;
      if (buflen_ == 64) {
        process();
        buflen_ = 0;
      }
    }
  }

  std::string hex_digest() {
    const std::uint64_t bits = total_ * 8;
    unsigned char pad = 0x80;
    update(&pad, 1);
    unsigned char zero = 0;
    while (buflen_ != 56) update(&zero, 1);
    for (int i = 7; i >= 0; --i) {
      unsigned char b = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
      update(&b, 1);
    }
    std::ostringstream out;
    out << std::hex << std::nouppercase;
    for (std::uint32_t word : h_) {
      for (int i = 7; i >= 0; --i) out << "0123456789abcdef"[(word >> (4 * i)) & 0xf];
    }
    return out.str();
  }

 private:
  static std::uint32_t rol(std::uint32_t v, int bits) { return (v << bits) | (v >> (32 - bits)); }

  void process() {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(buffer_[4 * i]) << 24) | (std::uint32_t(buffer_[4 * i + 1]) << 16) |
             (std::uint32_t(buffer_[4 * i + 2]) << 8) | std::uint32_t(buffer_[4 * i + 3]);
    for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    std::uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | ((~b) & d);
        k = 0x5A827999;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDC;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6;
      }
      const std::uint32_t tmp = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  std::array<std::uint32_t, 5> h_{0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476, 0xC3D2E1F0};
  unsigned char buffer_[64] = {};
  std::size_t buflen_ = 0;
  std::uint64_t total_ = 0;
};

using json = nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string("model file: ") + what + " must be an array");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != cols)
      throw ParseError(std::string("model file: ragged rows in ") + what);
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string("model file: ") + what + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

std::string git_blob_sha1(const std::string& bytes) {
  Sha1 sha;
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  sha.update(reinterpret_cast<const unsigned char*>(header.data()), header.size());
  sha.update(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  return sha.hex_digest();
}

std::string git_blob_sha1_of_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for hashing");
  std::ostringstream ss;
  ss << in.rdbuf();
  return git_blob_sha1(ss.str());
}

void save_model(const std::string& path, const ModelFile& model) {
  model.params.validate();
  json j;
  j["schema_version"] = model.schema_version;
  j["kind"] = model.params.kind == RuleKind::linear ? "linear" : "kernel";
  j["k"] = model.params.num_treatments();
  j["p"] = model.params.dim();
  j["intercepts"] = vector_to_json(model.params.intercepts);
  if (model.params.kind == RuleKind::linear) {
    j["linear_coefs"] = matrix_to_json(model.params.linear_coefs);
  } else {
    j["dual_coefs"] = matrix_to_json(model.params.dual_coefs);
    j["train_x"] = matrix_to_json(model.params.train_X);
    j["kernel"] = {
        {"kind", model.params.kernel_spec.kind == KernelSpec::Kind::rbf ? "rbf" : "linear"},
        {"bandwidth", model.params.kernel_spec.bandwidth}};
  }
  j["fit_config"] = {{"lambda", model.fit_config.lambda},
                     {"epsilon", model.fit_config.epsilon},
                     {"max_iter", model.fit_config.max_iter},
                     {"n_restarts", model.fit_config.n_restarts},
                     {"weight_cap", std::isfinite(model.fit_config.weight_cap)
                                        ? json(model.fit_config.weight_cap)
                                        : json()},
                     {"propensity_floor", model.fit_config.propensity_floor},
                     {"rng_seed", model.fit_config.rng_seed}};
  j["train_csv_sha1"] = model.train_csv_sha1;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failure on '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("model file '" + path + "': " + e.what());
  }
  ModelFile model;
  try {
    model.schema_version = j.at("schema_version").get<int>();
    if (model.schema_version != 1)
      throw ParseError("model file '" + path + "': unsupported schema_version " +
                       std::to_string(model.schema_version));
    const std::string kind = j.at("kind").get<std::string>();
    model.params.kind = kind == "linear" ? RuleKind::linear : RuleKind::kernel;
    model.params.intercepts = vector_from_json(j.at("intercepts"), "intercepts");
    if (model.params.kind == RuleKind::linear) {
      model.params.linear_coefs = matrix_from_json(j.at("linear_coefs"), "linear_coefs");
    } else {
      model.params.dual_coefs = matrix_from_json(j.at("dual_coefs"), "dual_coefs");
      model.params.train_X = matrix_from_json(j.at("train_x"), "train_x");
      const auto& ks = j.at("kernel");
      model.params.kernel_spec.kind = ks.at("kind").get<std::string>() == "rbf"
                                          ? KernelSpec::Kind::rbf
                                          : KernelSpec::Kind::linear;
      model.params.kernel_spec.bandwidth = ks.at("bandwidth").get<double>();
    }
    const auto& fc = j.at("fit_config");
    model.fit_config.lambda = fc.at("lambda").get<double>();
    model.fit_config.epsilon = fc.at("epsilon").get<double>();
    model.fit_config.max_iter = fc.at("max_iter").get<int>();
    model.fit_config.n_restarts = fc.at("n_restarts").get<int>();
    model.fit_config.weight_cap = fc.at("weight_cap").is_null()
                                      ? std::numeric_limits<double>::infinity()
                                      : fc.at("weight_cap").get<double>();
    model.fit_config.propensity_floor = fc.at("propensity_floor").get<double>();
    model.fit_config.rng_seed = fc.at("rng_seed").get<std::uint64_t>();
    model.train_csv_sha1 = j.at("train_csv_sha1").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError("model file '" + path + "': " + e.what());
  }
  model.params.validate();
  return model;
}

}  // namespace mlrwl
