#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "nclab/io.hpp"
#include "nclab/tensor.hpp"

namespace nclab {

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

DenseMatrix read_matrix(std::istream& in) {
  long rows = 0;
  long cols = 0;
  if (!(in >> rows >> cols)) throw IoError("matrix: missing 'rows cols' header");
  if (rows <= 0 || cols <= 0) {
    throw IoError("matrix: non-positive dimensions " + std::to_string(rows) + " " +
                  std::to_string(cols));
  }
  DenseMatrix m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      std::string token;
      if (!(in >> token)) {
        throw IoError("matrix: expected " + std::to_string(rows * cols) + " values, read " +
                      std::to_string(i * cols + j));
      }
      // strtod rather than operator>>: subnormals and inf/nan must survive the round trip.
      char* end = nullptr;
      m(i, j) = std::strtod(token.c_str(), &end);
      if (end != token.c_str() + token.size()) {
        throw IoError("matrix: entry (" + std::to_string(i) + ", " + std::to_string(j) + ") '" + token +
                      "' is not a number");
      }
    }
  }
  return m;
}

void write_matrix(std::ostream& out, const DenseMatrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ' ';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

DenseMatrix load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file '" + path + "'");
  try {
    return read_matrix(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_matrix(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix file '" + path + "'");
  write_matrix(out, m);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<int> read_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    long value = 0;
    std::string rest;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!(ls >> value) || (ls >> rest)) {
      throw IoError("labels: line " + std::to_string(lineno) + " is not a single integer");
    }
    if (value < 0) throw IoError("labels: negative class index " + std::to_string(value));
    labels.push_back(static_cast<int>(value));
  }
  return labels;
}

void write_labels(std::ostream& out, const std::vector<int>& labels) {
  for (int label : labels) out << label << '\n';
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels file '" + path + "'");
  try {
    return read_labels(in);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write labels file '" + path + "'");
  write_labels(out, labels);
}

}  // namespace nclab
