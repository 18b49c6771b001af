#include "mlrwl/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace mlrwl {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

double parse_double(const std::string& tok, const std::string& path, int line) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ParseError(path + ": line " + std::to_string(line) + ": bad number '" + tok + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void write_dataset_csv(const std::string& path, const TrialDataset& data, bool include_propensity) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const int n = data.n(), p = data.p(), k = data.num_treatments();
  if (include_propensity && !data.propensity)
    throw InvalidInputError("write_dataset_csv: no propensities to write");
  std::ostringstream header;
  for (int j = 0; j < p; ++j) header << "x" << (j + 1) << ",";
  for (int j = 0; j < k; ++j) header << "a" << (j + 1) << ",";
  header << "y";
  if (include_propensity) header << ",prob";
  out << header.str() << "\n";
  for (int i = 0; i < n; ++i) {
    std::ostringstream row;
    for (int j = 0; j < p; ++j) row << format_double(data.X(i, j)) << ",";
    for (int j = 0; j < k; ++j) row << data.A[static_cast<std::size_t>(i)][j] << ",";
    row << format_double(data.Y[i]);
    if (include_propensity) row << "," << format_double((*data.propensity)[i]);
    out << row.str() << "\n";
  }
  if (!out) throw IoError("write failure on '" + path + "'");
}

TrialDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const std::vector<std::string> header = split(line);

  int p = 0, k = 0;
  std::size_t idx = 0;
  while (idx < header.size() && header[idx] == "x" + std::to_string(p + 1)) {
    ++p;
    ++idx;
  }
  while (idx < header.size() && header[idx] == "a" + std::to_string(k + 1)) {
    ++k;
    ++idx;
  }
  if (p == 0 || k == 0 || idx >= header.size() || header[idx] != "y")
    throw ParseError(path + ": line 1: header must read x1..xp,a1..aK,y[,prob]");
  ++idx;
  bool has_prob = false;
  if (idx < header.size()) {
    if (header[idx] != "prob" || idx + 1 != header.size())
      throw ParseError(path + ": line 1: unexpected trailing columns after y");
    has_prob = true;
    ++idx;
  }

  std::vector<std::vector<double>> xs;
  std::vector<TreatmentVector> as;
  std::vector<double> ys, probs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> toks = split(line);
    if (static_cast<int>(toks.size()) != p + k + 1 + (has_prob ? 1 : 0))
      throw ParseError(path + ": line " + std::to_string(lineno) + ": expected " +
                       std::to_string(p + k + 1 + (has_prob ? 1 : 0)) + " fields, got " +
                       std::to_string(toks.size()));
    std::vector<double> row(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j)
      row[static_cast<std::size_t>(j)] = parse_double(toks[static_cast<std::size_t>(j)], path, lineno);
    std::vector<int> a(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      const double v = parse_double(toks[static_cast<std::size_t>(p + j)], path, lineno);
      if (v != std::round(v))
        throw ParseError(path + ": line " + std::to_string(lineno) +
                         ": treatment entries must be integers");
      a[static_cast<std::size_t>(j)] = static_cast<int>(v);
    }
    xs.push_back(std::move(row));
    as.push_back(TreatmentVector::unchecked(std::move(a)));
    ys.push_back(parse_double(toks[static_cast<std::size_t>(p + k)], path, lineno));
    if (has_prob) probs.push_back(parse_double(toks.back(), path, lineno));
  }
  if (xs.empty()) throw ParseError(path + ": no data rows");

  TrialDataset data;
  const int n = static_cast<int>(xs.size());
  data.X.resize(n, p);
  data.Y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) data.X(i, j) = xs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    data.Y[i] = ys[static_cast<std::size_t>(i)];
  }
  data.A = std::move(as);
  if (has_prob) {
    Eigen::VectorXd pr(n);
    for (int i = 0; i < n; ++i) pr[i] = probs[static_cast<std::size_t>(i)];
    data.propensity = pr;
  }
  return validate_dataset(std::move(data), k, p);
}

void write_predictions_csv(const std::string& path, const Eigen::MatrixXd& decision_values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const int k = static_cast<int>(decision_values.cols());
  std::ostringstream header;
  for (int j = 0; j < k; ++j) header << "d" << (j + 1) << ",";
  for (int j = 0; j < k; ++j) header << "f" << (j + 1) << (j + 1 < k ? "," : "");
  out << header.str() << "\n";
  for (Eigen::Index i = 0; i < decision_values.rows(); ++i) {
    const TreatmentVector d = sign_decision(decision_values.row(i));
    std::ostringstream row;
    for (int j = 0; j < k; ++j) row << d[j] << ",";
    for (int j = 0; j < k; ++j)
      row << format_double(decision_values(i, j)) << (j + 1 < k ? "," : "");
    out << row.str() << "\n";
  }
  if (!out) throw IoError("write failure on '" + path + "'");
}

}  // namespace mlrwl
