#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nclab/errors.hpp"
#include "nclab/metrics.hpp"
#include "nclab/models.hpp"

using namespace nclab;

namespace {

std::vector<int> random_labels(int n, int k, Rng& rng) {
  std::uniform_int_distribution<int> d(0, k - 1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& l : out) l = d(rng);
  return out;
}

// Independent loss: explicit log-sum-exp per column.
double reference_loss(const DenseMatrix& w, const DenseMatrix& x, const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    double hi = -INFINITY;
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
      z[k] = w.row(k).dot(x.col(n));
      hi = std::max(hi, z[k]);
    }
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - hi);
    total -= z[labels[n]] - hi - std::log(sum);
  }
  return total / static_cast<double>(x.cols());
}

double relative_gap(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

// Nearest-class-centre accuracy from explicit per-class averages.
double ncc_accuracy(const DenseMatrix& x, const std::vector<int>& labels, int k) {
  DenseMatrix means = DenseMatrix::Zero(x.rows(), k);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    means.col(labels[n]) += x.col(n);
    ++counts[labels[n]];
  }
  for (int c = 0; c < k; ++c) means.col(c) /= counts[c];
  int correct = 0;
  for (Eigen::Index n = 0; n < x.cols(); ++n) {
    int best = 0;
    for (int c = 1; c < k; ++c) {
      if ((x.col(n) - means.col(c)).squaredNorm() < (x.col(n) - means.col(best)).squaredNorm()) best = c;
    }
    correct += best == labels[n] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(x.cols());
}

}  // namespace

// --- Cross-entropy -----------------------------------------------------------------

TEST(CrossEntropy, ZeroWeightsGiveLogK) {
  Rng rng(1);
  const DenseMatrix x = gaussian_matrix(5, 7, 1.0, rng);
  const auto r = ce_loss_and_grad(DenseMatrix::Zero(10, 5), x, one_hot(random_labels(7, 10, rng), 10));
  EXPECT_NEAR(r.loss, std::log(10.0), 1e-15);
  EXPECT_NEAR(r.loss, 2.3025851, 1e-7);
  EXPECT_LE((r.probabilities.array() - 0.1).abs().maxCoeff(), 1e-16);
}

TEST(CrossEntropy, HandSoftmax) {
  DenseMatrix y = DenseMatrix::Zero(2, 1);
  y(0, 0) = 1.0;
  const auto r = ce_loss_and_grad(DenseMatrix::Zero(2, 1), DenseMatrix::Ones(1, 1), y);
  EXPECT_NEAR(r.grad_w(0, 0), -0.5, 1e-16);
  EXPECT_NEAR(r.grad_w(1, 0), 0.5, 1e-16);
  EXPECT_EQ(r.grad_w.colwise().sum()(0), 0.0);
}

TEST(CrossEntropy, GradientColumnSumsVanish) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + trial % 9, d = 1 + trial % 6, n = 1 + trial % 11;
    const DenseMatrix w = gaussian_matrix(k, d, 2.0, rng);
    const DenseMatrix x = gaussian_matrix(d, n, 2.0, rng);
    const auto r = ce_loss_and_grad(w, x, one_hot(random_labels(n, k, rng), k));
    EXPECT_LE(r.grad_w.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((r.probabilities.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
    EXPECT_GE(r.loss, 0.0);
  }
}

TEST(CrossEntropy, MatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const DenseMatrix w = gaussian_matrix(4, 6, 1.0, rng);
    const DenseMatrix x = gaussian_matrix(6, 8, 1.0, rng);
    const auto labels = random_labels(8, 4, rng);
    const auto r = ce_loss_and_grad(w, x, one_hot(labels, 4));
    EXPECT_NEAR(r.loss, reference_loss(w, x, labels), 1e-13);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      DenseMatrix wp = w, wm = w;
      wp(i) += h;
      wm(i) -= h;
      const double fd = (reference_loss(wp, x, labels) - reference_loss(wm, x, labels)) / (2 * h);
      EXPECT_LE(relative_gap(fd, r.grad_w(i)), 1e-6);
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      DenseMatrix xp = x, xm = x;
      xp(i) += h;
      xm(i) -= h;
      const double fd = (reference_loss(w, xp, labels) - reference_loss(w, xm, labels)) / (2 * h);
      EXPECT_LE(relative_gap(fd, r.grad_x(i)), 1e-6);
    }
  }
}

TEST(CrossEntropy, LargeLogitsStayFinite) {
  DenseMatrix w(2, 1);
  w << 800.0, -800.0;
  DenseMatrix y = DenseMatrix::Zero(2, 1);
  y(1, 0) = 1.0;
  const auto r = ce_loss_and_grad(w, DenseMatrix::Ones(1, 1), y);
  EXPECT_NEAR(r.loss, 1600.0, 1e-9);
  EXPECT_TRUE(r.grad_w.allFinite());
}

TEST(CrossEntropy, Errors) {
  EXPECT_THROW(ce_loss_and_grad(DenseMatrix::Zero(2, 3), DenseMatrix::Zero(2, 3), DenseMatrix::Zero(2, 3)),
               ShapeError);
  DenseMatrix w = DenseMatrix::Zero(2, 1);
  w(0, 0) = INFINITY;
  EXPECT_THROW(ce_loss_and_grad(w, DenseMatrix::Ones(1, 1), one_hot({0}, 2)), NumericError);
  EXPECT_THROW(one_hot({2}, 2), DomainError);
}

TEST(Accuracy, TiesGoToLowestIndex) {
  DenseMatrix logits(3, 2);
  logits << 1, 0, 1, 2, 0, 2;
  EXPECT_EQ(accuracy(logits, {0, 1}), 1.0);
  EXPECT_EQ(accuracy(logits, {1, 2}), 0.0);
  EXPECT_THROW(accuracy(logits, {0}), ShapeError);
}

TEST(OneHot, RoundTrip) {
  const std::vector<int> labels{2, 0, 1, 1};
  EXPECT_EQ(labels_from_one_hot(one_hot(labels, 3)), labels);
}

// --- UFM ---------------------------------------------------------------------------

TEST(Ufm, FixedEtfGradientSignPattern) {
  for (int k = 3; k <= 10; ++k) {
    const auto model = UFMModel::fixed_etf(k);
    const auto g = ufm_loss_and_grads(model);
    const DenseMatrix expected = DenseMatrix::Ones(k, k) - 2.0 * DenseMatrix::Identity(k, k);
    EXPECT_EQ(g.grad_w.unaryExpr([](double v) { return double((0 < v) - (v < 0)); }), expected);
    EXPECT_FALSE(g.grad_h.has_value());
    EXPECT_NEAR(g.loss, std::log(static_cast<double>(k)), 1e-15);
  }
}

TEST(Ufm, TwoParameterFamilyGradient) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 3 + trial % 8;
    const double a = u(rng), b = u(rng);
    auto model = UFMModel::fixed_etf(k);
    const DenseMatrix i = DenseMatrix::Identity(k, k), j = DenseMatrix::Ones(k, k);
    model.W = (a + b) * i - b * j;
    const double root = std::sqrt(k - 1.0);
    const double psi = 1.0 / (k * root * (std::exp((a + b) / root) + k - 1.0));
    const DenseMatrix expected = psi * (j - k * i);
    EXPECT_LE((ufm_loss_and_grads(model).grad_w - expected).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Ufm, ZeroModelAndTrainableFeatures) {
  Rng rng(5);
  UFMModel m;
  m.W = DenseMatrix::Zero(3, 4);
  m.H = DenseMatrix::Zero(4, 6);
  m.Y = one_hot({0, 1, 2, 0, 1, 2}, 3);
  const auto g = ufm_loss_and_grads(m);
  EXPECT_EQ(g.loss, std::log(3.0));
  ASSERT_TRUE(g.grad_h.has_value());
  m.W = gaussian_matrix(3, 4, 1.0, rng);
  m.H = gaussian_matrix(4, 6, 1.0, rng);
  const auto ce = ce_loss_and_grad(m.W, m.H, m.Y);
  const auto u = ufm_loss_and_grads(m);
  EXPECT_EQ(u.grad_w, ce.grad_w);
  EXPECT_EQ(*u.grad_h, ce.grad_x);
}

TEST(Ufm, Validation) {
  UFMModel m = UFMModel::fixed_etf(3);
  m.Y(0, 1) = 1.0;
  EXPECT_THROW(m.validate(), DomainError);
  m = UFMModel::fixed_etf(3);
  m.H = DenseMatrix::Zero(2, 3);
  EXPECT_THROW(m.validate(), ShapeError);
  m = UFMModel::fixed_etf(3);
  m.l2_lambda = -1.0;
  EXPECT_THROW(m.validate(), DomainError);
}

// --- MLP -------------------------------------------------------------------------------

TEST(Mlp, MatchesFiniteDifferences) {
  Rng rng(6);
  auto model = make_mlp(5, {8, 8}, 4, 0.7, rng);
  for (auto& layer : model.hidden) layer.bias = gaussian_matrix(layer.bias.size(), 1, 0.3, rng);
  const DenseMatrix x = gaussian_matrix(5, 9, 1.0, rng);
  const DenseMatrix y = one_hot(random_labels(9, 4, rng), 4);
  const auto g = mlp_forward_backward(model, x, y);
  const double h = 1e-5;
  auto loss = [&](const MLPModel& m) { return ce_loss_and_grad(m.W, m.features(x), y).loss; };

  for (Eigen::Index i = 0; i < model.W.size(); ++i) {
    MLPModel p = model, m = model;
    p.W(i) += h;
    m.W(i) -= h;
    EXPECT_LE(relative_gap((loss(p) - loss(m)) / (2 * h), g.grad_w(i)), 1e-6);
  }
  for (std::size_t l = 0; l < model.hidden.size(); ++l) {
    for (Eigen::Index i = 0; i < model.hidden[l].weight.size(); ++i) {
      MLPModel p = model, m = model;
      p.hidden[l].weight(i) += h;
      m.hidden[l].weight(i) -= h;
      EXPECT_LE(relative_gap((loss(p) - loss(m)) / (2 * h), g.hidden[l].weight(i)), 1e-6)
          << "layer " << l << " entry " << i;
    }
    for (Eigen::Index i = 0; i < model.hidden[l].bias.size(); ++i) {
      MLPModel p = model, m = model;
      p.hidden[l].bias(i) += h;
      m.hidden[l].bias(i) -= h;
      EXPECT_LE(relative_gap((loss(p) - loss(m)) / (2 * h), g.hidden[l].bias(i)), 1e-6);
    }
  }
}

TEST(Mlp, LastLayerGradientColumnSumsVanish) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto model = make_mlp(6, {1 + trial % 7, 5}, 2 + trial % 6, 1.0, rng);
    const int k = static_cast<int>(model.W.rows());
    const auto g = mlp_forward_backward(model, gaussian_matrix(6, 10, 1.0, rng), one_hot(random_labels(10, k, rng), k));
    EXPECT_LE(g.grad_w.colwise().sum().cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mlp, ZeroDepthIsPlainCrossEntropy) {
  Rng rng(8);
  const auto model = make_mlp(4, {}, 3, 1.0, rng);
  const DenseMatrix x = gaussian_matrix(4, 6, 1.0, rng);
  const DenseMatrix y = one_hot(random_labels(6, 3, rng), 3);
  const auto g = mlp_forward_backward(model, x, y);
  const auto ce = ce_loss_and_grad(model.W, x, y);
  EXPECT_EQ(g.loss, ce.loss);
  EXPECT_EQ(g.grad_w, ce.grad_w);
  EXPECT_EQ(g.features, x);
  EXPECT_TRUE(g.hidden.empty());
}

TEST(Mlp, ShapeChecks) {
  Rng rng(9);
  auto model = make_mlp(4, {3}, 2, 1.0, rng);
  EXPECT_THROW(mlp_forward_backward(model, DenseMatrix::Zero(5, 2), one_hot({0, 1}, 2)), ShapeError);
  model.W = DenseMatrix::Zero(2, 4);
  EXPECT_THROW(model.validate(), ShapeError);
  EXPECT_THROW(make_mlp(4, {0}, 2, 1.0, rng), DomainError);
}

// --- Generators --------------------------------------------------------------------------

TEST(Blobs, DeterministicPerSeed) {
  const auto a = make_blob_dataset(4, 8, 25, 1.0, 11);
  const auto b = make_blob_dataset(4, 8, 25, 1.0, 11);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(a.X, make_blob_dataset(4, 8, 25, 1.0, 12).X);
}

TEST(Blobs, NearestCentreSeparatesTheReferenceSet) {
  const auto d = make_blob_dataset(4, 8, 25, 1.0, 11);
  EXPECT_EQ(d.X.cols(), 100);
  EXPECT_TRUE(d.X.allFinite());
  EXPECT_EQ(ncc_accuracy(d.X, d.labels, 4), 1.0);
}

TEST(Blobs, SingleSampleSitsNearItsCentre) {
  const auto d = make_blob_dataset(5, 6, 1, 1e6, 3);
  const DenseMatrix dirs = simplex_directions(5);
  for (int k = 0; k < 5; ++k) {
    EXPECT_LE((d.X.col(k).head(4) - dirs.col(k)).cwiseAbs().maxCoeff(), 1e-5);
  }
  EXPECT_EQ(ncc_accuracy(d.X, d.labels, 5), 1.0);
}

TEST(Blobs, CentreGeometry) {
  for (int k = 2; k <= 8; ++k) {
    const DenseMatrix dirs = simplex_directions(k);
    EXPECT_EQ(dirs.rows(), k - 1);
    const DenseMatrix gram = dirs.transpose() * dirs;
    for (int i = 0; i < k; ++i) {
      EXPECT_NEAR(gram(i, i), 1.0, 1e-14);
      for (int j = 0; j < k; ++j) {
        if (i != j) {
          EXPECT_NEAR(gram(i, j), -1.0 / (k - 1), 1e-14);
        }
      }
    }
  }
}

TEST(Blobs, Errors) {
  EXPECT_THROW(make_blob_dataset(5, 3, 2, 1.0, 0), DomainError);
  EXPECT_THROW(make_blob_dataset(1, 3, 2, 1.0, 0), DomainError);
  EXPECT_THROW(make_blob_dataset(3, 3, 2, 0.0, 0), DomainError);
}

TEST(NcSolution, IdentityIsometryGivesSimplex) {
  const auto s = make_nc_solution(DenseMatrix::Identity(5, 5), 1.0, 1.0);
  EXPECT_EQ(s.W, simplex_etf(5));
  EXPECT_EQ(s.H, simplex_etf(5));
}

TEST(NcSolution, MetricSuiteIsCollapsed) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int k = 3 + static_cast<int>(seed % 6);
    for (auto [sw, sh] : {std::pair{1.0, 1.0}, std::pair{3.0, 0.5}}) {
      const auto s = make_nc_solution(k, k + static_cast<int>(seed % 4), sw, sh, seed);
      const DenseMatrix q = random_isometry(k + static_cast<int>(seed % 4), k, seed);
      EXPECT_LE((q.transpose() * q - DenseMatrix::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-12);
      const auto m = compute_metric_suite(s.W, LabeledFeatures<double>{s.H, s.labels, k});
      EXPECT_LE(*m.nc0, 1e-8);
      EXPECT_LE(*m.nc2, 1e-8);
      EXPECT_LE(*m.nc3, 1e-8);
      EXPECT_EQ(*m.nc4, 1.0);
    }
  }
  EXPECT_THROW(make_nc_solution(5, 4, 1.0, 1.0, 0), DomainError);
}
