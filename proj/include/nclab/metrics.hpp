#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nclab/tensor.hpp"

namespace nclab {

/// Feature columns (P x N) with a class index per column.
template <typename Scalar>
struct LabeledFeatures {
  Matrix<Scalar> features;
  std::vector<int> labels;
  int num_classes = 0;

  std::vector<Eigen::Index> class_counts() const {
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
    for (int label : labels) {
      if (label >= 0 && label < num_classes) ++counts[static_cast<std::size_t>(label)];
    }
    return counts;
  }

  bool balanced() const {
    const auto counts = class_counts();
    for (auto c : counts) {
      if (c != counts.front()) return false;
    }
    return true;
  }

  void validate() const {
    if (num_classes < 1) throw DomainError("labeled features: num_classes must be positive");
    if (static_cast<Eigen::Index>(labels.size()) != features.cols()) {
      throw ShapeError("labeled features: " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(features.cols()) + " feature columns");
    }
    for (int label : labels) {
      if (label < 0 || label >= num_classes) {
        throw DomainError("labeled features: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(num_classes) + ")");
      }
    }
    const auto counts = class_counts();
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (counts[k] == 0) throw DomainError("labeled features: class " + std::to_string(k) + " is empty");
    }
  }
};

template <typename Scalar>
struct ClassStatistics {
  Matrix<Scalar> class_means;     // P x K, uncentered
  Vector<Scalar> global_mean;     // mean of the class means
  Matrix<Scalar> centered_means;  // M
  Matrix<Scalar> sigma_b;
  Matrix<Scalar> sigma_w;         // averaged over all N samples, not per class
  std::vector<Eigen::Index> per_class_counts;

  int num_classes() const { return static_cast<int>(class_means.cols()); }
  Eigen::Index feature_dim() const { return class_means.rows(); }
  bool between_degenerate() const { return (sigma_b.array() == Scalar(0)).all(); }
};

template <typename Scalar>
ClassStatistics<Scalar> compute_class_statistics(const LabeledFeatures<Scalar>& data) {
  data.validate();
  const Eigen::Index p = data.features.rows();
  const Eigen::Index n = data.features.cols();
  const int k_count = data.num_classes;

  ClassStatistics<Scalar> s;
  s.per_class_counts = data.class_counts();
  s.class_means = Matrix<Scalar>::Zero(p, k_count);
  for (Eigen::Index i = 0; i < n; ++i) s.class_means.col(data.labels[i]) += data.features.col(i);
  for (int k = 0; k < k_count; ++k) s.class_means.col(k) /= Scalar(s.per_class_counts[k]);

  s.global_mean = s.class_means.rowwise().mean();
  s.centered_means = s.class_means.colwise() - s.global_mean;
  s.sigma_b = s.centered_means * s.centered_means.transpose() / Scalar(k_count);

  Matrix<Scalar> deviations(p, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    deviations.col(i) = data.features.col(i) - s.class_means.col(data.labels[i]);
  }
  s.sigma_w = deviations * deviations.transpose() / Scalar(n);
  return s;
}

/// M* = (I - J/K) / sqrt(K - 1).
template <typename Scalar = double>
Matrix<Scalar> simplex_etf(int k) {
  if (k < 2) throw DomainError("simplex_etf: need K >= 2, got " + std::to_string(k));
  Matrix<Scalar> m = Matrix<Scalar>::Identity(k, k) - Matrix<Scalar>::Constant(k, k, Scalar(1) / Scalar(k));
  return m / std::sqrt(Scalar(k - 1));
}

// --- NC0 -------------------------------------------------------------------

template <typename Derived>
typename Derived::Scalar nc0_metric(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  return column_ones_product(w).norm() / Scalar(w.cols());
}

template <typename Derived>
typename Derived::Scalar nc0_alpha(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  return column_ones_product(w).squaredNorm() / Scalar(w.rows());
}

template <typename Derived>
typename Derived::Scalar nc0_normalized(const Eigen::MatrixBase<Derived>& w) {
  const auto norm = w.norm();
  if (!(norm > 0)) throw DomainError("nc0_normalized: zero weight matrix");
  return nc0_metric(w) / norm;
}

// --- NC1 -------------------------------------------------------------------

/// (1/K) Tr[Sigma_W Sigma_B^+]; zero when Sigma_B vanishes (see between_degenerate()).
template <typename Scalar>
Scalar nc1(const ClassStatistics<Scalar>& s) {
  return (s.sigma_w * pseudo_inverse(s.sigma_b)).trace() / Scalar(s.num_classes());
}

// --- ETF geometry shared by NC2 / NC2W / NC2M ------------------------------

/// (1/K^2) || G/||G||_F - M* ||_F for a K x K Gram-like product G.
template <typename Derived>
typename Derived::Scalar etf_deviation(const Eigen::MatrixBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  if (g.rows() != g.cols()) throw ShapeError("etf_deviation: non-square " + shape_string(g.rows(), g.cols()));
  const int k = static_cast<int>(g.rows());
  const Matrix<Scalar> product = g;
  const Scalar norm = product.norm();
  if (!(norm > 0)) throw DomainError("etf_deviation: zero product matrix");
  return (product / norm - simplex_etf<Scalar>(k)).norm() / Scalar(k * k);
}

/// std_k ||c_k|| / avg_k ||c_k|| over the columns c_k (population std).
template <typename Derived>
typename Derived::Scalar equinormality(const Eigen::MatrixBase<Derived>& columns) {
  using Scalar = typename Derived::Scalar;
  const Vector<Scalar> norms = columns.colwise().norm().transpose();
  const Scalar avg = norms.mean();
  if (!(avg > 0)) throw DomainError("equinormality: all columns are zero");
  const Scalar var = (norms.array() - avg).square().mean();
  return std::sqrt(var) / avg;
}

/// avg_{k != k'} |cos(c_k, c_k') + 1/(K-1)| over the columns c_k.
template <typename Derived>
typename Derived::Scalar equiangularity(const Eigen::MatrixBase<Derived>& columns) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index k = columns.cols();
  if (k < 2) throw DomainError("equiangularity: need at least two columns");
  const Vector<Scalar> norms = columns.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < k; ++i) {
    if (norms(i) < Scalar(1e-12)) {
      throw DomainError("equiangularity: column " + std::to_string(i) + " has (near-)zero norm");
    }
  }
  const Matrix<Scalar> unit = columns * norms.cwiseInverse().asDiagonal();
  const Matrix<Scalar> cosines = unit.transpose() * unit;
  const Scalar shift = Scalar(1) / Scalar(k - 1);
  Scalar total = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i != j) total += std::abs(cosines(i, j) + shift);
    }
  }
  return total / Scalar(k * (k - 1));
}

// --- NC2: class means -------------------------------------------------------

template <typename Scalar>
Scalar nc2(const ClassStatistics<Scalar>& s) {
  const auto& m = s.centered_means;
  return etf_deviation(m.transpose() * m);
}

template <typename Scalar>
Scalar nc2_n(const ClassStatistics<Scalar>& s) {
  return equinormality(s.centered_means);
}

template <typename Scalar>
Scalar nc2_a(const ClassStatistics<Scalar>& s) {
  return equiangularity(s.centered_means);
}

// --- NC2W / NC2M: weight rows -----------------------------------------------

template <typename Derived>
typename Derived::Scalar nc2w(const Eigen::MatrixBase<Derived>& w) {
  return etf_deviation(w * w.transpose());
}

template <typename Derived>
typename Derived::Scalar nc2w_n(const Eigen::MatrixBase<Derived>& w) {
  return equinormality(w.transpose());
}

template <typename Derived>
typename Derived::Scalar nc2w_a(const Eigen::MatrixBase<Derived>& w) {
  return equiangularity(w.transpose());
}

template <typename Derived, typename DerivedM>
typename Derived::Scalar nc2m(const Eigen::MatrixBase<Derived>& w, const Eigen::MatrixBase<DerivedM>& m) {
  return etf_deviation(matmul(w, m));
}

template <typename Derived>
typename Derived::Scalar nc2m(const Eigen::MatrixBase<Derived>& w,
                              const ClassStatistics<typename Derived::Scalar>& s) {
  return nc2m(w, s.centered_means);
}

// --- NC3 ---------------------------------------------------------------------

/// (1/(K p)) || W/||W||_F - M^T/||M||_F ||_F with W: K x p and M: p x K.
template <typename Derived, typename DerivedM>
typename Derived::Scalar nc3(const Eigen::MatrixBase<Derived>& w, const Eigen::MatrixBase<DerivedM>& m) {
  using Scalar = typename Derived::Scalar;
  if (w.rows() != m.cols() || w.cols() != m.rows()) {
    throw ShapeError("nc3: W " + shape_string(w.rows(), w.cols()) + " against M " +
                     shape_string(m.rows(), m.cols()));
  }
  const Scalar wn = w.norm();
  const Scalar mn = m.norm();
  if (!(wn > 0) || !(mn > 0)) throw DomainError("nc3: zero weight or zero centered means");
  return (w / wn - m.transpose() / mn).norm() / Scalar(w.rows() * w.cols());
}

template <typename Derived>
typename Derived::Scalar nc3(const Eigen::MatrixBase<Derived>& w,
                             const ClassStatistics<typename Derived::Scalar>& s) {
  return nc3(w, s.centered_means);
}

// --- NC4 ---------------------------------------------------------------------

/// Fraction of test columns where the linear classifier and the nearest
/// (uncentered) class mean agree. Ties resolve to the lowest class index.
template <typename Derived>
typename Derived::Scalar nc4(const Eigen::MatrixBase<Derived>& w,
                             const ClassStatistics<typename Derived::Scalar>& s,
                             const LabeledFeatures<typename Derived::Scalar>& test) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = test.features.cols();
  if (n == 0) throw DomainError("nc4: empty test set");
  if (w.cols() != test.features.rows() || s.class_means.rows() != test.features.rows() ||
      w.rows() != s.class_means.cols()) {
    throw ShapeError("nc4: W " + shape_string(w.rows(), w.cols()) + ", means " +
                     shape_string(s.class_means.rows(), s.class_means.cols()) + ", test " +
                     shape_string(test.features.rows(), n));
  }
  const Matrix<Scalar> scores = w * test.features;
  Eigen::Index agree = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best_score = 0;
    Eigen::Index nearest = 0;
    Scalar best_dist = (test.features.col(i) - s.class_means.col(0)).squaredNorm();
    for (Eigen::Index k = 1; k < scores.rows(); ++k) {
      if (scores(k, i) > scores(best_score, i)) best_score = k;
      const Scalar d = (test.features.col(i) - s.class_means.col(k)).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        nearest = k;
      }
    }
    if (best_score == nearest) ++agree;
  }
  return Scalar(agree) / Scalar(n);
}

// --- The full suite ------------------------------------------------------------

/// Every NC metric at once. A metric whose formula is undefined for the input
/// (zero norm and the like) is left empty rather than reported as zero.
struct MetricSuite {
  std::optional<double> nc0, nc0_alpha, nc0_normalized, nc1, nc2, nc2n, nc2a, nc2w, nc2wn, nc2wa, nc2m,
      nc3, nc4;
  bool sigma_b_degenerate = false;
};

namespace detail {
template <typename F>
std::optional<double> guarded(F&& f) {
  try {
    const double v = f();
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}
}  // namespace detail

/// NC4 is evaluated on `test` when given, otherwise on the training features.
inline MetricSuite compute_metric_suite(const DenseMatrix& w, const LabeledFeatures<double>& train,
                                        const LabeledFeatures<double>* test = nullptr) {
  const auto s = compute_class_statistics(train);
  MetricSuite r;
  r.nc0 = nc0_metric(w);
  r.nc0_alpha = nc0_alpha(w);
  r.nc0_normalized = detail::guarded([&] { return nc0_normalized(w); });
  r.nc1 = nc1(s);
  r.sigma_b_degenerate = s.between_degenerate();
  r.nc2 = detail::guarded([&] { return nc2(s); });
  r.nc2n = detail::guarded([&] { return nc2_n(s); });
  r.nc2a = detail::guarded([&] { return nc2_a(s); });
  r.nc2w = detail::guarded([&] { return nc2w(w); });
  r.nc2wn = detail::guarded([&] { return nc2w_n(w); });
  r.nc2wa = detail::guarded([&] { return nc2w_a(w); });
  r.nc2m = detail::guarded([&] { return nc2m(w, s); });
  r.nc3 = detail::guarded([&] { return nc3(w, s); });
  r.nc4 = nc4(w, s, test != nullptr ? *test : train);
  return r;
}

}  // namespace nclab
