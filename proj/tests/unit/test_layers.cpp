#include "spdregime/error.hpp"
#include "spdregime/layers/eigen_backprop.hpp"
#include "spdregime/layers/layers.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace spdregime {
namespace {

using namespace layers;
using test::fd_gradient;
using test::fd_sym_gradient;

double pair(const SymMatrix& g, const Matrix& y) { return g.matrix().cwiseProduct(y).sum(); }

TEST(Stiefel, RandomPointsAreOrthonormal) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 3 + trial;
    const int cols = 1 + trial % rows;
    const Matrix w = random_stiefel(rows, cols, rng);
    EXPECT_EQ(w.rows(), rows);
    EXPECT_EQ(w.cols(), cols);
    EXPECT_LT(orthonormality_error(w), 1e-13);
  }
}

TEST(Stiefel, TangentProjectionIsTangentAndIdempotent) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix w = random_stiefel(8, 3, rng);
    const Matrix g = test::gaussian(8, 3, rng);
    const Matrix t = stiefel_tangent(w, g);
    const Matrix wt = w.transpose() * t;
    EXPECT_LT((wt + wt.transpose()).norm(), 1e-12);
    EXPECT_LT((stiefel_tangent(w, t) - t).norm(), 1e-12);
  }
}

TEST(Stiefel, QrRetractionAndStepStayOnManifold) {
  std::mt19937_64 rng(13);
  Matrix w = random_stiefel(10, 4, rng);
  Matrix buf = Matrix::Zero(10, 4);
  for (int step = 0; step < 200; ++step) {
    stiefel_step(w, test::gaussian(10, 4, rng), buf, 0.05, 0.9);
    ASSERT_LT(orthonormality_error(w), 1e-12);
  }
  const Matrix q = qr_retraction(test::gaussian(6, 3, rng));
  EXPECT_LT(orthonormality_error(q), 1e-13);
  const Matrix r = q.transpose() * qr_retraction(q);
  EXPECT_LT((r - Matrix::Identity(3, 3)).norm(), 1e-12);
  Matrix deficient = Matrix::Zero(5, 2);
  deficient(0, 0) = 1.0;
  EXPECT_THROW(qr_retraction(deficient), RetractionError);
}

TEST(Stiefel, SmallStepDecreasesLinearObjective) {
  std::mt19937_64 rng(14);
  const Matrix c = test::gaussian(7, 3, rng);
  Matrix w = random_stiefel(7, 3, rng);
  Matrix buf = Matrix::Zero(7, 3);
  const double before = (c.transpose() * w).trace();
  stiefel_step(w, c, buf, 1e-3, 0.0);
  EXPECT_LT((c.transpose() * w).trace(), before);
}

TEST(EuclideanStep, HeavyBall) {
  Matrix p = Matrix::Constant(2, 2, 1.0);
  Matrix v = Matrix::Zero(2, 2);
  const Matrix g = Matrix::Constant(2, 2, 0.5);
  euclidean_step(p, g, v, 0.1, 0.9);
  EXPECT_DOUBLE_EQ(p(0, 0), 0.95);
  euclidean_step(p, g, v, 0.1, 0.9);
  EXPECT_DOUBLE_EQ(v(1, 1), 0.95);
  EXPECT_DOUBLE_EQ(p(1, 0), 0.95 - 0.095);
}

TEST(Loewner, DividedDifferencesAndDegenerateGap) {
  const Vector s = (Vector(3) << 4.0, 1.0, 1.0).finished();
  const auto f = [](double x) { return x * x; };
  const auto fp = [](double x) { return 2.0 * x; };
  const Matrix k = loewner_kernel(s, f, fp);
  EXPECT_DOUBLE_EQ(k(0, 0), 8.0);
  EXPECT_DOUBLE_EQ(k(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(k(1, 2), 2.0);
  EXPECT_DOUBLE_EQ(k(2, 1), 2.0);
}

TEST(LayerGradients, BiMapMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 5; ++trial) {
    const BiMapLayer layer = BiMapLayer::random(6, 3, rng);
    const SPDMatrix x = test::random_spd(6, rng);
    const SymMatrix g = test::random_sym(3, rng);
    const auto grads = layer.backward(x, g);
    const Matrix fx = fd_sym_gradient(
        [&](const SymMatrix& xs) { return pair(g, layer.weight().transpose() * xs.matrix() * layer.weight()); },
        x.sym());
    EXPECT_LT(test::rel_diff(grads.input_grad.matrix(), fx), 1e-7);
    const Matrix fw = fd_gradient([&](const Matrix& w) { return pair(g, w.transpose() * x.matrix() * w); },
                                  layer.weight());
    EXPECT_LT(test::rel_diff(grads.weight_grad, fw), 1e-7);
    EXPECT_LT(test::rel_diff(layer.forward(x).matrix(),
                             layer.weight().transpose() * x.matrix() * layer.weight()),
              1e-14);
  }
  EXPECT_THROW(BiMapLayer(Matrix::Identity(3, 3)), ShapeError);
  EXPECT_THROW(BiMapLayer(Matrix::Constant(4, 2, 1.0)), DomainError);
}

TEST(LayerGradients, BiMapExpandMatchesFiniteDifferences) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 5; ++trial) {
    const BiMapExpandLayer layer = BiMapExpandLayer::random(3, 6, rng);
    const SPDMatrix x = test::random_spd(3, rng);
    const SymMatrix g = test::random_sym(6, rng);
    const auto fwd = [](const Matrix& w, const Matrix& xm) {
      const Matrix eye = Matrix::Identity(w.rows(), w.rows());
      return Matrix(w * xm * w.transpose() + eye - w * w.transpose());
    };
    const auto grads = layer.backward(x, g);
    EXPECT_LT(test::rel_diff(grads.input_grad.matrix(),
                             fd_sym_gradient([&](const SymMatrix& xs) { return pair(g, fwd(layer.weight(), xs.matrix())); },
                                             x.sym())),
              1e-7);
    EXPECT_LT(test::rel_diff(grads.weight_grad,
                             fd_gradient([&](const Matrix& w) { return pair(g, fwd(w, x.matrix())); }, layer.weight())),
              1e-7);
    const SPDMatrix y = layer.forward(x);
    EXPECT_LT(test::rel_diff(spd::spd_log(y).matrix(),
                             layer.weight() * spd::spd_log(x).matrix() * layer.weight().transpose()),
              1e-10);
  }
}

TEST(LayerGradients, ReEigMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const ReEigLayer layer(0.5);
  for (int trial = 0; trial < 8; ++trial) {
    // Spectrum straddles the threshold but stays clear of the kink.
    const Vector eigs = (Vector(5) << 2.5, 1.7, 0.9, 0.3, 0.1).finished();
    const SPDMatrix x = test::spd_with_spectrum(eigs, rng);
    const SymMatrix g = test::random_sym(5, rng);
    const Matrix fx = fd_sym_gradient(
        [&](const SymMatrix& xs) { return pair(g, layer.forward(SPDMatrix(xs)).matrix()); }, x.sym());
    EXPECT_LT(test::rel_diff(layer.backward(x, g).matrix(), fx), 1e-6);
    EXPECT_NEAR(layer.forward(x).min_eigenvalue(), 0.5, 1e-12);
  }
  EXPECT_DOUBLE_EQ(ReEigLayer().epsilon(), 1e-4);
}

TEST(LayerGradients, LogEigMatchesFiniteDifferences) {
  std::mt19937_64 rng(18);
  const LogEigLayer layer;
  for (int trial = 0; trial < 8; ++trial) {
    const SPDMatrix x = test::random_spd(5, rng, 0.3, 4.0);
    const SymMatrix g = test::random_sym(5, rng);
    const Matrix fx = fd_sym_gradient(
        [&](const SymMatrix& xs) { return pair(g, layer.forward(SPDMatrix(xs)).matrix()); }, x.sym());
    EXPECT_LT(test::rel_diff(layer.backward(x, g).matrix(), fx), 1e-7);
  }
}

TEST(LayerGradients, LogEigHandlesRepeatedEigenvalues) {
  std::mt19937_64 rng(19);
  const LogEigLayer layer;
  const SPDMatrix x = test::spd_with_spectrum((Vector(4) << 2.0, 2.0, 0.5, 0.5).finished(), rng);
  const SymMatrix g = test::random_sym(4, rng);
  const Matrix fx = fd_sym_gradient(
      [&](const SymMatrix& xs) { return pair(g, layer.forward(SPDMatrix(xs)).matrix()); }, x.sym());
  EXPECT_LT(test::rel_diff(layer.backward(x, g).matrix(), fx), 1e-6);
}

TEST(BatchNorm, TrainOutputsHaveBiasAsKarcherMean) {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 5; ++trial) {
    RiemannianBatchNorm rbn(4);
    rbn.set_bias_log(SymMatrix(0.3 * test::random_sym(4, rng).matrix()));
    std::vector<SPDMatrix> batch;
    for (int b = 0; b < 6; ++b) batch.push_back(test::random_spd(4, rng));
    const auto out = rbn.forward(batch, Mode::Train);
    const SPDMatrix m = spd::karcher_mean(out.outputs);
    EXPECT_LT(spd::affine_distance(m, rbn.bias()), 1e-7);
  }
}

TEST(BatchNorm, RunningMeanMovesAlongGeodesic) {
  std::mt19937_64 rng(21);
  RiemannianBatchNorm rbn(3, 0.75);
  std::vector<SPDMatrix> batch;
  for (int b = 0; b < 4; ++b) batch.push_back(test::random_spd(3, rng));
  const auto out = rbn.forward(batch, Mode::Train);
  const SPDMatrix want = spd::geodesic(SPDMatrix::identity(3), out.mean, 0.25);
  EXPECT_LT(test::rel_diff(rbn.running_mean().matrix(), want.matrix()), 1e-12);
  const auto eval = rbn.forward(batch, Mode::Eval);
  EXPECT_LT(test::rel_diff(eval.mean.matrix(), want.matrix()), 1e-15);
  EXPECT_LT(test::rel_diff(rbn.running_mean().matrix(), want.matrix()), 1e-15);
}

TEST(BatchNorm, BackwardWithFixedMeanMatchesFiniteDifferences) {
  std::mt19937_64 rng(22);
  RiemannianBatchNorm rbn(3);
  const SymMatrix bias_log(0.4 * test::random_sym(3, rng).matrix());
  rbn.set_bias_log(bias_log);
  std::vector<SPDMatrix> batch;
  std::vector<SymMatrix> up;
  for (int b = 0; b < 3; ++b) {
    batch.push_back(test::random_spd(3, rng));
    up.push_back(test::random_sym(3, rng));
  }
  const SPDMatrix mean = spd::karcher_mean(batch);
  const auto grads = rbn.backward(batch, mean, up);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Matrix fx = fd_sym_gradient(
        [&](const SymMatrix& xs) { return pair(up[b], rbn.apply(SPDMatrix(xs), mean).matrix()); },
        batch[b].sym());
    EXPECT_LT(test::rel_diff(grads.input_grads[b].matrix(), fx), 1e-7);
  }
  const Matrix fb = fd_sym_gradient(
      [&](const SymMatrix& bl) {
        RiemannianBatchNorm probe(3);
        probe.set_bias_log(bl);
        double total = 0.0;
        for (std::size_t b = 0; b < batch.size(); ++b) total += pair(up[b], probe.apply(batch[b], mean).matrix());
        return total;
      },
      bias_log);
  EXPECT_LT(test::rel_diff(grads.bias_grad.matrix(), fb), 1e-7);
}

}  // namespace
}  // namespace spdregime
