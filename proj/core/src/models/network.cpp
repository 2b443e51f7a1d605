#include "spdregime/models/network.hpp"

#include "spdregime/error.hpp"
#include "spdregime/models/spdnet.hpp"
#include "spdregime/models/uspdnet.hpp"
#include "spdregime/spd/geometry.hpp"

#include <cmath>
#include <numbers>

namespace spdregime::models {

int Network::predict(const SPDMatrix& x) const { return argmax(logits(x)); }

std::unique_ptr<Network> build_model(const ModelConfig& config) {
  config.validate();
  if (config.is_unet()) return std::make_unique<USpdNet>(config);
  return std::make_unique<SpdNet>(config);
}

Vector tangent_flatten(const SymMatrix& s) {
  const int n = s.dim();
  Vector v(tangent_size(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    v(k++) = s(i, i);
    for (int j = i + 1; j < n; ++j) v(k++) = std::numbers::sqrt2 * s(i, j);
  }
  return v;
}

SymMatrix tangent_flatten_backward(const Vector& grad, int dim) {
  if (grad.size() != tangent_size(dim)) throw ShapeError("tangent_flatten_backward");
  Matrix g(dim, dim);
  int k = 0;
  for (int i = 0; i < dim; ++i) {
    g(i, i) = grad(k++);
    for (int j = i + 1; j < dim; ++j) {
      const double v = grad(k++) * (std::numbers::sqrt2 / 2.0);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return SymMatrix(g);
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

double cross_entropy(const Vector& logits, int label) {
  if (label < 0 || label >= logits.size()) throw DomainError("label out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(label);
}

Vector cross_entropy_grad(const Vector& logits, int label) {
  Vector g = softmax(logits);
  g(label) -= 1.0;
  return g;
}

double loss_total(const Vector& logits, int label, const SPDMatrix& reconstruction,
                  const SPDMatrix& input, double recon_weight) {
  double loss = cross_entropy(logits, label);
  if (recon_weight != 0.0) {
    const double d = spd::log_euclidean_distance(reconstruction, input);
    loss += recon_weight * d * d;
  }
  return loss;
}

int argmax(const Vector& v) {
  Eigen::Index idx = 0;
  v.maxCoeff(&idx);
  return static_cast<int>(idx);
}

}  // namespace spdregime::models
