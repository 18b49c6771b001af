#pragma once

#include <Eigen/Dense>
#include <string>

#include "mlrwl/types.hpp"

namespace mlrwl {

// Shortest round-trip decimal representation.
std::string format_double(double v);

// Header: x1..xp,a1..aK,y[,prob]; '.' decimal separator, UTF-8, no quoting.
void write_dataset_csv(const std::string& path, const TrialDataset& data, bool include_propensity);

// Parses and validates; diagnostic messages carry 1-based line numbers.
TrialDataset read_dataset_csv(const std::string& path);

// Header: d1..dK,f1..fK (decisions, then raw decision-function values).
void write_predictions_csv(const std::string& path, const Eigen::MatrixXd& decision_values);

}  // namespace mlrwl
