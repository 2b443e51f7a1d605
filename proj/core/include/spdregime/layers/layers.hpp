#pragma once

#include "spdregime/spd/geometry.hpp"
#include "spdregime/spd/matrix.hpp"

#include <optional>
#include <random>
#include <span>
#include <vector>

namespace spdregime::layers {

using spd::Matrix;
using spd::SPDMatrix;
using spd::SymMatrix;
using spd::Vector;

/// Random d_in x d_out matrix with orthonormal columns: Q factor of a
/// Gaussian matrix with the R-diagonal sign fix.
Matrix random_stiefel(int rows, int cols, std::mt19937_64& rng);

/// ||W^T W - I||_F.
double orthonormality_error(const Matrix& w);

struct BiMapGradients {
  SymMatrix input_grad;
  Matrix weight_grad;
};

/// X -> W^T X W with W (d_in x d_out) on the Stiefel manifold, d_in > d_out.
class BiMapLayer {
 public:
  explicit BiMapLayer(Matrix weight);
  static BiMapLayer random(int d_in, int d_out, std::mt19937_64& rng);

  int in_dim() const { return static_cast<int>(weight_.rows()); }
  int out_dim() const { return static_cast<int>(weight_.cols()); }
  const Matrix& weight() const { return weight_; }
  /// Mutable access for optimizers; callers re-establish orthonormality.
  Matrix& weight() { return weight_; }

  SPDMatrix forward(const SPDMatrix& x) const;
  BiMapGradients backward(const SPDMatrix& x, const SymMatrix& upstream) const;

 private:
  Matrix weight_;
};

/// Dimension-raising map used by the decoder: X -> W X W^T + (I - W W^T),
/// W (d_out x d_in) with orthonormal columns, d_out > d_in. The complement
/// of range(W) carries the identity, so the output is strictly SPD and
/// log(out) = W log(X) W^T.
class BiMapExpandLayer {
 public:
  explicit BiMapExpandLayer(Matrix weight);
  static BiMapExpandLayer random(int d_in, int d_out, std::mt19937_64& rng);

  int in_dim() const { return static_cast<int>(weight_.cols()); }
  int out_dim() const { return static_cast<int>(weight_.rows()); }
  const Matrix& weight() const { return weight_; }
  Matrix& weight() { return weight_; }

  SPDMatrix forward(const SPDMatrix& x) const;
  BiMapGradients backward(const SPDMatrix& x, const SymMatrix& upstream) const;

 private:
  Matrix weight_;
};

/// Eigenvalue rectification U max(Sigma, eps) U^T.
class ReEigLayer {
 public:
  explicit ReEigLayer(double epsilon = 1e-4);
  double epsilon() const { return epsilon_; }

  SPDMatrix forward(const SPDMatrix& x) const;
  SymMatrix backward(const SPDMatrix& x, const SymMatrix& upstream) const;

 private:
  double epsilon_;
};

/// Matrix logarithm onto the tangent space at the identity.
class LogEigLayer {
 public:
  SymMatrix forward(const SPDMatrix& x) const;
  SymMatrix backward(const SPDMatrix& x, const SymMatrix& upstream) const;
};

enum class Mode { Train, Eval };

struct RbnForward {
  std::vector<SPDMatrix> outputs;
  SPDMatrix mean;  // statistic used for centering
};

struct RbnGradients {
  std::vector<SymMatrix> input_grads;
  SymMatrix bias_grad;  // w.r.t. the symmetric log-parameter
};

/// Riemannian batch normalisation: congruence-centre each matrix at the
/// batch Karcher mean, then re-bias with B = exp(bias_log). The batch mean
/// is treated as a constant in backward.
class RiemannianBatchNorm {
 public:
  explicit RiemannianBatchNorm(int dim, double running_momentum = 0.9,
                               spd::KarcherOptions karcher = {});

  int dim() const { return running_mean_.dim(); }
  const SPDMatrix& running_mean() const { return running_mean_; }
  void set_running_mean(SPDMatrix m);
  SymMatrix bias_log() const { return SymMatrix(bias_log_); }
  void set_bias_log(const SymMatrix& b);
  /// Raw storage for optimisers; symmetric updates keep it exactly symmetric.
  Matrix& bias_log_storage() { return bias_log_; }
  SPDMatrix bias() const { return spd::spd_exp(bias_log()); }
  double running_momentum() const { return running_momentum_; }

  /// Train mode centres at the batch mean and moves the running mean toward
  /// it along the geodesic by (1 - running_momentum); Eval mode uses the
  /// running mean.
  RbnForward forward(std::span<const SPDMatrix> batch, Mode mode);

  /// Centre at `mean`, then re-bias. Pure.
  std::vector<SPDMatrix> apply(std::span<const SPDMatrix> batch, const SPDMatrix& mean) const;
  SPDMatrix apply(const SPDMatrix& x, const SPDMatrix& mean) const;

  RbnGradients backward(std::span<const SPDMatrix> batch, const SPDMatrix& mean,
                        std::span<const SymMatrix> upstream) const;

 private:
  SPDMatrix running_mean_;
  Matrix bias_log_;
  double running_momentum_;
  spd::KarcherOptions karcher_;
};

/// Riemannian gradient G - W sym(W^T G) at W.
Matrix stiefel_tangent(const Matrix& w, const Matrix& euclid_grad);

/// Q factor of a thin QR with R-diagonal made positive. Throws
/// RetractionError when the input is numerically rank deficient.
Matrix qr_retraction(const Matrix& y);

/// Riemannian SGD with momentum on the Stiefel manifold:
///   m <- momentum * m + tangent(W, G);  W <- qf(W - lr * m);
///   m <- tangent(W_new, m).
void stiefel_step(Matrix& weight, const Matrix& euclid_grad, Matrix& momentum_buffer, double lr,
                  double momentum);

/// Plain heavy-ball SGD: v <- momentum * v + g; p <- p - lr * v.
void euclidean_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
                    double momentum);

}  // namespace spdregime::layers
