#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "nclab/tensor.hpp"

namespace nclab {

using Rng = std::mt19937_64;

DenseMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

DenseMatrix one_hot(const std::vector<int>& labels, int num_classes);
std::vector<int> labels_from_one_hot(const DenseMatrix& y);

/// Column-wise softmax with per-column max subtraction.
DenseMatrix softmax_columns(const DenseMatrix& logits);

struct CrossEntropyResult {
  double loss = 0.0;
  DenseMatrix grad_w;         // (1/N)(S - Y) X^T
  DenseMatrix grad_x;         // (1/N) W^T (S - Y)
  DenseMatrix probabilities;  // S
};

/// Mean cross-entropy of softmax(W X) against one-hot Y and its gradients.
CrossEntropyResult ce_loss_and_grad(const DenseMatrix& w, const DenseMatrix& x, const DenseMatrix& y);

/// Column accuracy of argmax(logits) against labels, ties to the lowest index.
double accuracy(const DenseMatrix& logits, const std::vector<int>& labels);

// --- Unconstrained feature model ------------------------------------------

struct UFMModel {
  DenseMatrix W;  // K x P
  DenseMatrix H;  // P x N
  DenseMatrix Y;  // K x N one-hot
  bool feature_trainable = true;
  double l2_lambda = 0.0;  // applied by the optimizer as weight decay, never in the loss

  void validate() const;

  /// H = M*, Y = I, K = N = P, features frozen; W starts at zero.
  static UFMModel fixed_etf(int num_classes);
};

struct UfmGradients {
  double loss = 0.0;
  DenseMatrix grad_w;
  std::optional<DenseMatrix> grad_h;  // only when features are trainable
};

UfmGradients ufm_loss_and_grads(const UFMModel& model);

// --- Rectifier MLP -----------------------------------------------------------

struct DenseLayer {
  DenseMatrix weight;  // out x in
  DenseVector bias;    // out
};

/// h(x) = relu(... relu(W1 x + b1) ...), logits = W h(x) with no output bias.
struct MLPModel {
  std::vector<DenseLayer> hidden;
  DenseMatrix W;  // K x P

  Eigen::Index input_dim() const { return hidden.empty() ? W.cols() : hidden.front().weight.cols(); }
  Eigen::Index feature_dim() const { return W.cols(); }
  void validate() const;
  DenseMatrix features(const DenseMatrix& x) const;
};

MLPModel make_mlp(int input_dim, const std::vector<int>& hidden_sizes, int num_classes, double init_stddev, Rng& rng);

struct MlpGradients {
  double loss = 0.0;
  std::vector<DenseLayer> hidden;  // gradients, same layout as the model
  DenseMatrix grad_w;
  DenseMatrix features;  // h(X), P x N
  DenseMatrix probabilities;
};

MlpGradients mlp_forward_backward(const MLPModel& model, const DenseMatrix& x, const DenseMatrix& y);

// --- Synthetic data ------------------------------------------------------------

struct SyntheticDataset {
  DenseMatrix X;  // D x N, class-major column order
  std::vector<int> labels;
  int num_classes = 0;
  int per_class = 0;
  std::uint64_t seed = 0;
};

/// Gaussian blobs around unit simplex directions embedded in R^D. The per-entry
/// noise is scaled so that the smallest centre distance equals
/// 4 * margin * (RMS noise radius).
SyntheticDataset make_blob_dataset(int num_classes, int dim, int per_class, double margin, std::uint64_t seed);

/// Orthonormal directions of the K-simplex, one unit column per class, in R^(K-1).
DenseMatrix simplex_directions(int num_classes);

/// P x K matrix with orthonormal columns drawn from a Gaussian via QR.
DenseMatrix random_isometry(int p, int k, std::uint64_t seed);

struct NcSolution {
  DenseMatrix W;  // scale_w (Q M*)^T
  DenseMatrix H;  // scale_h Q M*
  std::vector<int> labels;
};

NcSolution make_nc_solution(int num_classes, int p, double scale_w, double scale_h, std::uint64_t isometry_seed);
NcSolution make_nc_solution(const DenseMatrix& isometry, double scale_w, double scale_h);

}  // namespace nclab
