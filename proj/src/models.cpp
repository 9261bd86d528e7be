#include "nclab/models.hpp"

#include <cmath>

#include "nclab/metrics.hpp"

namespace nclab {

DenseMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  DenseMatrix m(rows, cols);
  // Fill row by row so the draw order matches the text format.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

DenseMatrix one_hot(const std::vector<int>& labels, int num_classes) {
  DenseMatrix y = DenseMatrix::Zero(num_classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || labels[n] >= num_classes) {
      throw DomainError("one_hot: label " + std::to_string(labels[n]) + " outside [0, " +
                        std::to_string(num_classes) + ")");
    }
    y(labels[n], static_cast<Eigen::Index>(n)) = 1.0;
  }
  return y;
}

std::vector<int> labels_from_one_hot(const DenseMatrix& y) {
  std::vector<int> labels(static_cast<std::size_t>(y.cols()));
  for (Eigen::Index n = 0; n < y.cols(); ++n) {
    Eigen::Index k = 0;
    y.col(n).maxCoeff(&k);
    labels[static_cast<std::size_t>(n)] = static_cast<int>(k);
  }
  return labels;
}

DenseMatrix softmax_columns(const DenseMatrix& logits) {
  DenseMatrix s = logits.rowwise() - logits.colwise().maxCoeff();
  s = s.array().exp().matrix();
  s = s.array().rowwise() / s.colwise().sum().array();
  return s;
}

CrossEntropyResult ce_loss_and_grad(const DenseMatrix& w, const DenseMatrix& x, const DenseMatrix& y) {
  if (w.cols() != x.rows() || y.rows() != w.rows() || y.cols() != x.cols()) {
    throw ShapeError("ce_loss_and_grad: W " + shape_string(w.rows(), w.cols()) + ", X " +
                     shape_string(x.rows(), x.cols()) + ", Y " + shape_string(y.rows(), y.cols()));
  }
  const DenseMatrix logits = w * x;
  if (!logits.allFinite()) throw NumericError("ce_loss_and_grad: non-finite logits");

  const double n = static_cast<double>(x.cols());
  const DenseMatrix shifted = logits.rowwise() - logits.colwise().maxCoeff();
  const Eigen::RowVectorXd log_norm = shifted.array().exp().colwise().sum().log();
  const DenseMatrix log_probs = shifted.rowwise() - log_norm;

  CrossEntropyResult r;
  r.probabilities = log_probs.array().exp().matrix();
  r.loss = -(y.array() * log_probs.array()).sum() / n;
  const DenseMatrix residual = (r.probabilities - y) / n;
  r.grad_w = residual * x.transpose();
  r.grad_x = w.transpose() * residual;
  return r;
}

double accuracy(const DenseMatrix& logits, const std::vector<int>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.cols()) {
    throw ShapeError("accuracy: label count does not match logits");
  }
  if (labels.empty()) return 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index n = 0; n < logits.cols(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < logits.rows(); ++k) {
      if (logits(k, n) > logits(best, n)) best = k;
    }
    if (best == labels[static_cast<std::size_t>(n)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.cols());
}

// --- UFM -----------------------------------------------------------------------

void UFMModel::validate() const {
  if (W.cols() != H.rows() || Y.rows() != W.rows() || Y.cols() != H.cols()) {
    throw ShapeError("UFMModel: W " + shape_string(W.rows(), W.cols()) + ", H " + shape_string(H.rows(), H.cols()) +
                     ", Y " + shape_string(Y.rows(), Y.cols()));
  }
  for (Eigen::Index n = 0; n < Y.cols(); ++n) {
    const auto col = Y.col(n);
    if ((col.array() == 1.0).count() != 1 || (col.array() == 0.0).count() != Y.rows() - 1) {
      throw DomainError("UFMModel: label column " + std::to_string(n) + " is not one-hot");
    }
  }
  if (l2_lambda < 0) throw DomainError("UFMModel: negative l2_lambda");
}

UFMModel UFMModel::fixed_etf(int num_classes) {
  UFMModel m;
  m.H = simplex_etf(num_classes);
  m.W = DenseMatrix::Zero(num_classes, num_classes);
  m.Y = DenseMatrix::Identity(num_classes, num_classes);
  m.feature_trainable = false;
  return m;
}

UfmGradients ufm_loss_and_grads(const UFMModel& model) {
  model.validate();
  auto ce = ce_loss_and_grad(model.W, model.H, model.Y);
  UfmGradients g;
  g.loss = ce.loss;
  g.grad_w = std::move(ce.grad_w);
  if (model.feature_trainable) g.grad_h = std::move(ce.grad_x);
  return g;
}

// --- MLP -------------------------------------------------------------------------

void MLPModel::validate() const {
  Eigen::Index prev = input_dim();
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const auto& layer = hidden[l];
    if (layer.weight.cols() != prev || layer.bias.size() != layer.weight.rows()) {
      throw ShapeError("MLPModel: layer " + std::to_string(l) + " has weight " +
                       shape_string(layer.weight.rows(), layer.weight.cols()) + " after width " +
                       std::to_string(prev));
    }
    prev = layer.weight.rows();
  }
  if (W.cols() != prev) throw ShapeError("MLPModel: final layer does not match last hidden width");
}

DenseMatrix MLPModel::features(const DenseMatrix& x) const {
  DenseMatrix a = x;
  for (const auto& layer : hidden) {
    a = ((layer.weight * a).colwise() + layer.bias).cwiseMax(0.0);
  }
  return a;
}

MLPModel make_mlp(int input_dim, const std::vector<int>& hidden_sizes, int num_classes, double init_stddev, Rng& rng) {
  MLPModel m;
  int prev = input_dim;
  for (int width : hidden_sizes) {
    if (width <= 0) throw DomainError("make_mlp: non-positive hidden width");
    m.hidden.push_back({gaussian_matrix(width, prev, init_stddev, rng), DenseVector::Zero(width)});
    prev = width;
  }
  m.W = gaussian_matrix(num_classes, prev, init_stddev, rng);
  return m;
}

MlpGradients mlp_forward_backward(const MLPModel& model, const DenseMatrix& x, const DenseMatrix& y) {
  model.validate();
  if (x.rows() != model.input_dim()) {
    throw ShapeError("mlp_forward_backward: input has " + std::to_string(x.rows()) + " rows, model expects " +
                     std::to_string(model.input_dim()));
  }
  // Forward, keeping pre-activations for the rectifier masks.
  std::vector<DenseMatrix> activations{x};
  std::vector<DenseMatrix> pre;
  for (const auto& layer : model.hidden) {
    pre.push_back((layer.weight * activations.back()).colwise() + layer.bias);
    activations.push_back(pre.back().cwiseMax(0.0));
  }

  auto ce = ce_loss_and_grad(model.W, activations.back(), y);
  if (!std::isfinite(ce.loss)) throw NumericError("mlp_forward_backward: non-finite loss");

  MlpGradients g;
  g.loss = ce.loss;
  g.grad_w = std::move(ce.grad_w);
  g.features = activations.back();
  g.probabilities = std::move(ce.probabilities);
  g.hidden.resize(model.hidden.size());

  DenseMatrix upstream = std::move(ce.grad_x);
  for (std::size_t l = model.hidden.size(); l-- > 0;) {
    const DenseMatrix dz = upstream.cwiseProduct((pre[l].array() > 0.0).cast<double>().matrix());
    g.hidden[l].weight = dz * activations[l].transpose();
    g.hidden[l].bias = dz.rowwise().sum();
    if (l > 0) upstream = model.hidden[l].weight.transpose() * dz;
  }
  return g;
}

// --- Generators --------------------------------------------------------------------

DenseMatrix simplex_directions(int num_classes) {
  if (num_classes < 2) throw DomainError("simplex_directions: need K >= 2");
  const int k = num_classes;
  // Helmert basis of the sum-zero subspace; coordinates of e_k in that basis.
  DenseMatrix basis = DenseMatrix::Zero(k, k - 1);
  for (int j = 1; j < k; ++j) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
    basis.col(j - 1).head(j).setConstant(scale);
    basis(j, j - 1) = -j * scale;
  }
  DenseMatrix dirs = basis.transpose();  // column k = B^T e_k
  dirs.colwise().normalize();
  return dirs;
}

SyntheticDataset make_blob_dataset(int num_classes, int dim, int per_class, double margin, std::uint64_t seed) {
  if (num_classes < 2) throw DomainError("make_blob_dataset: need K >= 2");
  if (dim < num_classes - 1) {
    throw DomainError("make_blob_dataset: D = " + std::to_string(dim) + " < K - 1 = " +
                      std::to_string(num_classes - 1));
  }
  if (per_class < 1) throw DomainError("make_blob_dataset: per_class must be positive");
  if (!(margin > 0)) throw DomainError("make_blob_dataset: margin must be positive");

  DenseMatrix centers = DenseMatrix::Zero(dim, num_classes);
  centers.topRows(num_classes - 1) = simplex_directions(num_classes);
  const double min_distance = std::sqrt(2.0 * num_classes / (num_classes - 1.0));
  const double stddev = min_distance / (4.0 * margin * std::sqrt(static_cast<double>(dim)));

  SyntheticDataset ds;
  ds.num_classes = num_classes;
  ds.per_class = per_class;
  ds.seed = seed;
  ds.X.resize(dim, static_cast<Eigen::Index>(num_classes) * per_class);
  ds.labels.reserve(static_cast<std::size_t>(num_classes * per_class));

  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  Eigen::Index col = 0;
  for (int k = 0; k < num_classes; ++k) {
    for (int i = 0; i < per_class; ++i, ++col) {
      for (int d = 0; d < dim; ++d) ds.X(d, col) = centers(d, k) + noise(rng);
      ds.labels.push_back(k);
    }
  }
  return ds;
}

DenseMatrix random_isometry(int p, int k, std::uint64_t seed) {
  if (p < k) throw DomainError("random_isometry: P = " + std::to_string(p) + " < K = " + std::to_string(k));
  Rng rng(seed);
  const DenseMatrix g = gaussian_matrix(p, k, 1.0, rng);
  Eigen::HouseholderQR<DenseMatrix> qr(g);
  return qr.householderQ() * DenseMatrix::Identity(p, k);
}

NcSolution make_nc_solution(const DenseMatrix& isometry, double scale_w, double scale_h) {
  const int k = static_cast<int>(isometry.cols());
  if (isometry.rows() < k) throw DomainError("make_nc_solution: need P >= K");
  const DenseMatrix qm = isometry * simplex_etf(k);
  NcSolution s;
  s.H = scale_h * qm;
  s.W = scale_w * qm.transpose();
  s.labels.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) s.labels[static_cast<std::size_t>(i)] = i;
  return s;
}

NcSolution make_nc_solution(int num_classes, int p, double scale_w, double scale_h, std::uint64_t isometry_seed) {
  if (p < num_classes) {
    throw DomainError("make_nc_solution: P = " + std::to_string(p) + " < K = " + std::to_string(num_classes));
  }
  return make_nc_solution(random_isometry(p, num_classes, isometry_seed), scale_w, scale_h);
}

}  // namespace nclab
