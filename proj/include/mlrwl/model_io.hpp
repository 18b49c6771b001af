#pragma once

#include <string>

#include "mlrwl/types.hpp"

namespace mlrwl {

struct ModelFile {
  int schema_version = 1;
  DecisionFunctionParams params;
  FitConfig fit_config;
  std::string train_csv_sha1;  // git-style blob hash of the training file
};

// Versioned JSON with shortest-round-trip numbers: a save/load cycle
// reproduces predictions bit-exactly.
void save_model(const std::string& path, const ModelFile& model);
ModelFile load_model(const std::string& path);

// SHA-1 of "blob <size>\0<bytes>", hex encoded.
std::string git_blob_sha1(const std::string& bytes);
std::string git_blob_sha1_of_file(const std::string& path);

}  // namespace mlrwl
