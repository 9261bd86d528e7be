#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>

#include "nclab/errors.hpp"

namespace nclab {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using DenseMatrix = Matrix<double>;
using DenseVector = Vector<double>;

/// Relative cut-off used by pseudo_inverse when none is given.
inline constexpr double kDefaultRankTolerance = 1e-10;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename DA, typename DB>
Matrix<typename DA::Scalar> matmul(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_string(a.rows(), a.cols()) + " times " +
                     shape_string(b.rows(), b.cols()));
  }
  return a * b;
}

template <typename Derived>
Matrix<typename Derived::Scalar> transpose(const Eigen::MatrixBase<Derived>& a) {
  return a.transpose();
}

template <typename Derived>
typename Derived::Scalar frobenius_norm(const Eigen::MatrixBase<Derived>& a) {
  return a.norm();
}

template <typename Derived>
typename Derived::Scalar trace(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() != a.cols()) {
    throw ShapeError("trace: non-square " + shape_string(a.rows(), a.cols()));
  }
  return a.trace();
}

/// a^T 1: the vector of column sums, as a (cols x 1) matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> column_ones_product(const Eigen::MatrixBase<Derived>& a) {
  return a.colwise().sum().transpose();
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite input");
  }
}

/// Singular values in non-increasing order, min(rows, cols) of them.
/// Two-sided Jacobi, so the result is a deterministic function of the input.
template <typename Derived>
Vector<typename Derived::Scalar> singular_values(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  require_finite(a, "singular_values");
  if (a.size() == 0) return Vector<Scalar>();
  Eigen::JacobiSVD<Matrix<Scalar>> svd(a.derived().eval());
  return svd.singularValues();
}

/// Moore-Penrose pseudo-inverse. Singular values sigma <= rank_tolerance * sigma_max
/// are treated as zero; an all-zero input maps to the zero (cols x rows) matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> pseudo_inverse(const Eigen::MatrixBase<Derived>& a,
                                                typename Derived::Scalar rank_tolerance =
                                                    kDefaultRankTolerance) {
  using Scalar = typename Derived::Scalar;
  if (rank_tolerance < Scalar(0)) throw DomainError("pseudo_inverse: negative rank tolerance");
  require_finite(a, "pseudo_inverse");
  Matrix<Scalar> result = Matrix<Scalar>::Zero(a.cols(), a.rows());
  if (a.size() == 0) return result;

  Eigen::JacobiSVD<Matrix<Scalar>> svd(a.derived().eval(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sigma = svd.singularValues();
  const Scalar sigma_max = sigma.size() > 0 ? sigma(0) : Scalar(0);
  if (sigma_max == Scalar(0)) return result;

  const Scalar cutoff = rank_tolerance * sigma_max;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) <= cutoff) break;
    result.noalias() += (svd.matrixV().col(i) / sigma(i)) * svd.matrixU().col(i).transpose();
  }
  return result;
}

// Text format: "rows cols" header, then one line per row of space-separated
// values printed with 17 significant digits.

DenseMatrix read_matrix(std::istream& in);
void write_matrix(std::ostream& out, const DenseMatrix& m);
DenseMatrix load_matrix(const std::string& path);
void save_matrix(const std::string& path, const DenseMatrix& m);

/// "%.17g" rendering used by every text/CSV writer in the project.
std::string format_real(double value);

}  // namespace nclab
