#pragma once

#include "spdregime/layers/layers.hpp"
#include "spdregime/models/config.hpp"
#include "spdregime/spd/matrix.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spdregime::models {

using layers::Mode;
using spd::Matrix;
using spd::SPDMatrix;
using spd::SymMatrix;
using spd::Vector;

/// How the optimiser treats a parameter.
enum class ParamKind {
  Stiefel,    // orthonormal columns, Riemannian SGD with QR retraction
  Euclidean,  // classifier weights and biases
  Symmetric,  // log-parameterised SPD bias, updated in the flat space
};

struct ParamRef {
  std::string name;
  ParamKind kind;
  Matrix* value;
};

/// Inputs and integer class labels (0 stressed, 1 normal, 2 rally).
struct LabeledSet {
  std::vector<SPDMatrix> inputs;
  std::vector<int> labels;

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }
};

struct BatchOptions {
  Mode mode = Mode::Train;
  bool compute_grads = true;
  /// Pins every RBN centring statistic (stop-gradient checks); the running
  /// means are left untouched when set.
  std::optional<std::vector<SPDMatrix>> pinned_means;
};

struct BatchResult {
  double loss = 0.0;        // mean total loss
  double ce_loss = 0.0;     // mean cross-entropy
  double recon_loss = 0.0;  // mean squared log-Euclidean reconstruction error
  std::vector<Vector> logits;
  /// Gradients of the mean loss, aligned with Network::parameters().
  std::vector<Matrix> grads;
  /// RBN centring statistics used, one per RBN layer.
  std::vector<SPDMatrix> rbn_means;
};

/// Common surface of the SPDNet-family classifiers.
class Network {
 public:
  virtual ~Network() = default;

  virtual const ModelConfig& config() const = 0;
  virtual std::vector<ParamRef> parameters() = 0;

  /// Inference-mode logits (RBN uses its running mean).
  virtual Vector logits(const SPDMatrix& x) const = 0;

  virtual BatchResult compute_batch(std::span<const SPDMatrix> xs, std::span<const int> labels,
                                    const BatchOptions& opts) = 0;

  virtual std::unique_ptr<Network> clone() const = 0;

  /// Non-trainable state (RBN running means) for checkpoints.
  virtual std::vector<std::pair<std::string, SPDMatrix>> state() const = 0;
  virtual void set_state(const std::vector<std::pair<std::string, SPDMatrix>>& s) = 0;

  /// Layer list in forward order, e.g. "BiMap 60->20", "ReEig", "Linear 210->3".
  virtual std::vector<std::string> describe() const = 0;

  int predict(const SPDMatrix& x) const;
  int input_dim() const { return config().tmd.front(); }
};

/// Builds the layer stack for `config` with weights drawn from config.seed.
/// Throws ConfigError for invalid configurations.
std::unique_ptr<Network> build_model(const ModelConfig& config);

// --- tangent flattening and losses -----------------------------------------

/// Upper triangle (row-major, i <= j) with off-diagonals scaled by sqrt(2),
/// so the Euclidean norm equals the Frobenius norm.
Vector tangent_flatten(const SymMatrix& s);
/// Gradient w.r.t. the symmetric matrix given the gradient w.r.t. its flattening.
SymMatrix tangent_flatten_backward(const Vector& grad, int dim);
inline int tangent_size(int dim) { return dim * (dim + 1) / 2; }

Vector softmax(const Vector& logits);
double cross_entropy(const Vector& logits, int label);
/// d CE / d logits = softmax - onehot.
Vector cross_entropy_grad(const Vector& logits, int label);

/// CE(softmax(logits), label) + recon_weight * d_LE(reconstruction, input)^2.
double loss_total(const Vector& logits, int label, const SPDMatrix& reconstruction,
                  const SPDMatrix& input, double recon_weight);

int argmax(const Vector& v);

/// Linear map from the flattened tangent vector to class logits.
struct LinearHead {
  Matrix weight;  // classes x features
  Matrix bias;    // classes x 1

  Vector apply(const Vector& features) const { return weight * features + bias.col(0); }
};

}  // namespace spdregime::models
