#include "spdregime/layers/layers.hpp"

#include "spdregime/error.hpp"
#include "spdregime/layers/eigen_backprop.hpp"

#include <cmath>
#include <string>

namespace spdregime::layers {

namespace {

constexpr double kStiefelTol = 1e-8;

void require_stiefel(const Matrix& w, const char* who) {
  if (orthonormality_error(w) > kStiefelTol)
    throw DomainError(std::string(who) + ": weight columns are not orthonormal");
}

}  // namespace

Matrix random_stiefel(int rows, int cols, std::mt19937_64& rng) {
  if (rows < cols) throw ShapeError("random_stiefel needs rows >= cols");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) g(i, j) = normal(rng);
  return qr_retraction(g);
}

double orthonormality_error(const Matrix& w) {
  return (w.transpose() * w - Matrix::Identity(w.cols(), w.cols())).norm();
}

// --- BiMap -----------------------------------------------------------------

BiMapLayer::BiMapLayer(Matrix weight) : weight_(std::move(weight)) {
  if (!(weight_.rows() > weight_.cols()) || weight_.cols() < 1)
    throw ShapeError("BiMap weight must be d_in x d_out with d_in > d_out");
  require_stiefel(weight_, "BiMap");
}

BiMapLayer BiMapLayer::random(int d_in, int d_out, std::mt19937_64& rng) {
  return BiMapLayer(random_stiefel(d_in, d_out, rng));
}

SPDMatrix BiMapLayer::forward(const SPDMatrix& x) const {
  if (x.dim() != in_dim())
    throw ShapeError("BiMap input dim " + std::to_string(x.dim()) + ", expected " +
                     std::to_string(in_dim()));
  return SPDMatrix(SymMatrix(weight_.transpose() * x.matrix() * weight_), x.tolerance());
}

BiMapGradients BiMapLayer::backward(const SPDMatrix& x, const SymMatrix& upstream) const {
  if (x.dim() != in_dim() || upstream.dim() != out_dim()) throw ShapeError("BiMap backward");
  const Matrix& g = upstream.matrix();
  return {SymMatrix(weight_ * g * weight_.transpose()), 2.0 * x.matrix() * weight_ * g};
}

// --- BiMap expansion -------------------------------------------------------

BiMapExpandLayer::BiMapExpandLayer(Matrix weight) : weight_(std::move(weight)) {
  if (!(weight_.rows() > weight_.cols()) || weight_.cols() < 1)
    throw ShapeError("expanding BiMap weight must be d_out x d_in with d_out > d_in");
  require_stiefel(weight_, "BiMapExpand");
}

BiMapExpandLayer BiMapExpandLayer::random(int d_in, int d_out, std::mt19937_64& rng) {
  return BiMapExpandLayer(random_stiefel(d_out, d_in, rng));
}

SPDMatrix BiMapExpandLayer::forward(const SPDMatrix& x) const {
  if (x.dim() != in_dim()) throw ShapeError("BiMapExpand input dim");
  const Matrix shifted = x.matrix() - Matrix::Identity(in_dim(), in_dim());
  Matrix out = weight_ * shifted * weight_.transpose();
  out.diagonal().array() += 1.0;
  return SPDMatrix(SymMatrix(out), x.tolerance());
}

BiMapGradients BiMapExpandLayer::backward(const SPDMatrix& x, const SymMatrix& upstream) const {
  if (x.dim() != in_dim() || upstream.dim() != out_dim()) throw ShapeError("BiMapExpand backward");
  const Matrix& g = upstream.matrix();
  const Matrix shifted = x.matrix() - Matrix::Identity(in_dim(), in_dim());
  return {SymMatrix(weight_.transpose() * g * weight_), 2.0 * g * weight_ * shifted};
}

// --- ReEig -----------------------------------------------------------------

ReEigLayer::ReEigLayer(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("ReEig epsilon must be positive");
}

SPDMatrix ReEigLayer::forward(const SPDMatrix& x) const {
  const auto& e = x.eig();
  return SPDMatrix::from_spectrum(e.eigvecs, e.eigvals.cwiseMax(epsilon_), x.tolerance());
}

SymMatrix ReEigLayer::backward(const SPDMatrix& x, const SymMatrix& upstream) const {
  const double eps = epsilon_;
  return eigfunc_backward(
      x.eig(), upstream, [eps](double s) { return std::max(s, eps); },
      [eps](double s) { return s > eps ? 1.0 : 0.0; });
}

// --- LogEig ----------------------------------------------------------------

SymMatrix LogEigLayer::forward(const SPDMatrix& x) const { return spd::spd_log(x); }

SymMatrix LogEigLayer::backward(const SPDMatrix& x, const SymMatrix& upstream) const {
  if (x.eig().eigvals.minCoeff() <= 0.0) throw DomainError("LogEig: non-positive eigenvalue");
  return eigfunc_backward(
      x.eig(), upstream, [](double s) { return std::log(s); }, [](double s) { return 1.0 / s; });
}

// --- Riemannian batch norm -------------------------------------------------

RiemannianBatchNorm::RiemannianBatchNorm(int dim, double running_momentum,
                                         spd::KarcherOptions karcher)
    : running_mean_(SPDMatrix::identity(dim)),
      bias_log_(Matrix::Zero(dim, dim)),
      running_momentum_(running_momentum),
      karcher_(karcher) {
  if (!(running_momentum > 0.0 && running_momentum < 1.0))
    throw DomainError("RBN running momentum must lie in (0, 1)");
}

void RiemannianBatchNorm::set_running_mean(SPDMatrix m) {
  if (m.dim() != dim()) throw ShapeError("RBN running mean");
  running_mean_ = std::move(m);
}

void RiemannianBatchNorm::set_bias_log(const SymMatrix& b) {
  if (b.dim() != dim()) throw ShapeError("RBN bias");
  bias_log_ = b.matrix();
}

RbnForward RiemannianBatchNorm::forward(std::span<const SPDMatrix> batch, Mode mode) {
  if (mode == Mode::Eval) return {apply(batch, running_mean_), running_mean_};
  SPDMatrix mean = spd::karcher_mean(batch, karcher_);
  running_mean_ = spd::geodesic(running_mean_, mean, 1.0 - running_momentum_);
  auto outputs = apply(batch, mean);
  return {std::move(outputs), std::move(mean)};
}

namespace {

// P = B^{1/2} G^{-1/2}, so that out = P X P^T.
Matrix rbn_transform(const SymMatrix& bias_log, const SPDMatrix& mean) {
  const Matrix half_bias = spd::spd_exp(bias_log * 0.5).matrix();
  return half_bias * spd::spd_invsqrt(mean).matrix();
}

}  // namespace

std::vector<SPDMatrix> RiemannianBatchNorm::apply(std::span<const SPDMatrix> batch,
                                                  const SPDMatrix& mean) const {
  if (mean.dim() != dim()) throw ShapeError("RBN mean");
  const Matrix p = rbn_transform(bias_log(), mean);
  std::vector<SPDMatrix> out;
  out.reserve(batch.size());
  for (const auto& x : batch) {
    if (x.dim() != dim()) throw ShapeError("RBN input");
    out.emplace_back(SymMatrix(p * x.matrix() * p.transpose()), x.tolerance());
  }
  return out;
}

SPDMatrix RiemannianBatchNorm::apply(const SPDMatrix& x, const SPDMatrix& mean) const {
  return apply(std::span<const SPDMatrix>(&x, 1), mean).front();
}

RbnGradients RiemannianBatchNorm::backward(std::span<const SPDMatrix> batch, const SPDMatrix& mean,
                                           std::span<const SymMatrix> upstream) const {
  if (batch.size() != upstream.size()) throw ShapeError("RBN backward batch size");
  const SymMatrix half_log = bias_log() * 0.5;
  const spd::EigenDecomposition half_eig = spd::sym_eig(half_log);
  const Matrix s = spd::reconstruct(half_eig.eigvecs, half_eig.eigvals.array().exp().matrix());
  const Matrix gis = spd::spd_invsqrt(mean).matrix();
  const Matrix p = s * gis;

  RbnGradients grads{{}, SymMatrix::zero(dim())};
  grads.input_grads.reserve(batch.size());
  Matrix ds = Matrix::Zero(dim(), dim());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Matrix& g = upstream[i].matrix();
    grads.input_grads.emplace_back(p.transpose() * g * p);
    const Matrix centered = gis * batch[i].matrix() * gis;
    const Matrix m = g * s * centered;
    ds += m + m.transpose();
  }
  const auto exp_fn = [](double v) { return std::exp(v); };
  grads.bias_grad = eigfunc_backward(half_eig, SymMatrix(ds), exp_fn, exp_fn) * 0.5;
  return grads;
}

// --- Stiefel optimiser -----------------------------------------------------

Matrix stiefel_tangent(const Matrix& w, const Matrix& euclid_grad) {
  const Matrix wg = w.transpose() * euclid_grad;
  return euclid_grad - w * (0.5 * (wg + wg.transpose()));
}

Matrix qr_retraction(const Matrix& y) {
  const Eigen::Index rows = y.rows();
  const Eigen::Index cols = y.cols();
  Eigen::HouseholderQR<Matrix> qr(y);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix& r = qr.matrixQR();
  const double scale = std::max(1e-300, y.norm());
  for (Eigen::Index j = 0; j < cols; ++j) {
    if (std::abs(r(j, j)) < 1e-12 * scale)
      throw RetractionError("QR retraction: rank-deficient input at column " + std::to_string(j));
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

void stiefel_step(Matrix& weight, const Matrix& euclid_grad, Matrix& momentum_buffer, double lr,
                  double momentum) {
  if (euclid_grad.rows() != weight.rows() || euclid_grad.cols() != weight.cols())
    throw ShapeError("stiefel_step gradient shape");
  if (momentum_buffer.size() == 0) momentum_buffer = Matrix::Zero(weight.rows(), weight.cols());
  momentum_buffer = momentum * momentum_buffer + stiefel_tangent(weight, euclid_grad);
  if (lr == 0.0 || momentum_buffer.squaredNorm() == 0.0) return;
  weight = qr_retraction(weight - lr * momentum_buffer);
  momentum_buffer = stiefel_tangent(weight, momentum_buffer);
}

void euclidean_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
                    double momentum) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols())
    throw ShapeError("euclidean_step gradient shape");
  if (velocity.size() == 0) velocity = Matrix::Zero(param.rows(), param.cols());
  velocity = momentum * velocity + grad;
  param -= lr * velocity;
}

}  // namespace spdregime::layers
