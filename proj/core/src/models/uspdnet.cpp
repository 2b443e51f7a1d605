#include "spdregime/models/uspdnet.hpp"

#include "spdregime/error.hpp"
#include "spdregime/layers/eigen_backprop.hpp"
#include "spdregime/spd/geometry.hpp"

#include <cmath>
#include <random>

namespace spdregime::models {

namespace {

struct Blend {
  spd::EigenDecomposition z;  // eigen-decomposition of the log-domain blend
  SPDMatrix out;
};

Blend blend_forward(const SPDMatrix& up, const SPDMatrix& skip, double w) {
  const SymMatrix z = spd::spd_log(up) * w + spd::spd_log(skip) * (1.0 - w);
  auto e = spd::sym_eig(z);
  if (e.eigvals.maxCoeff() > spd::kExpCap) throw OverflowError("skip blend: exponent too large");
  SPDMatrix out = SPDMatrix::from_spectrum(e.eigvecs, e.eigvals.array().exp().matrix(),
                                           up.tolerance());
  return {std::move(e), std::move(out)};
}

SymMatrix exp_backward(const spd::EigenDecomposition& z, const SymMatrix& upstream) {
  const auto exp_fn = [](double v) { return std::exp(v); };
  return layers::eigfunc_backward(z, upstream, exp_fn, exp_fn);
}

// Per-sample activations kept for the backward pass.
struct Trace {
  std::vector<SPDMatrix> enc;      // E_0 .. E_L
  std::vector<SPDMatrix> enc_pre;  // BiMap outputs before ReEig, one per encoder step
  std::vector<SPDMatrix> dec_in;   // input of decoder step j
  std::vector<SPDMatrix> dec_pre;  // expanded, before ReEig
  std::vector<SPDMatrix> dec_up;   // after ReEig
  std::vector<spd::EigenDecomposition> blend_z;  // per step with a skip
  Vector features;
  Vector logits;
  SPDMatrix recon = SPDMatrix::identity(1);
};

}  // namespace

SPDMatrix skip_blend(const SPDMatrix& up, const SPDMatrix& skip, double w) {
  if (up.dim() != skip.dim()) throw ShapeError("skip blend dims differ");
  return blend_forward(up, skip, w).out;
}

USpdNet::USpdNet(ModelConfig config)
    : config_(std::move(config)), reeig_(config_.reeig_epsilon) {
  config_.validate();
  if (!config_.is_unet()) throw ConfigError("USpdNet needs a U-SPDNet configuration");
  std::mt19937_64 rng(config_.seed);
  const auto dims = config_.stages();
  for (std::size_t k = 0; k + 1 < dims.size(); ++k)
    encoder_.push_back(layers::BiMapLayer::random(dims[k], dims[k + 1], rng));
  for (std::size_t k = dims.size() - 1; k > 0; --k)
    decoder_.push_back(layers::BiMapExpandLayer::random(dims[k], dims[k - 1], rng));
  const int features = tangent_size(dims.back());
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(features)));
  head_ = LinearHead{Matrix(kNumClasses, features), Matrix::Zero(kNumClasses, 1)};
  for (int j = 0; j < features; ++j)
    for (int i = 0; i < kNumClasses; ++i) head_.weight(i, j) = normal(rng);
}

std::vector<ParamRef> USpdNet::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < encoder_.size(); ++l)
    out.push_back({"enc" + std::to_string(l) + ".weight", ParamKind::Stiefel, &encoder_[l].weight()});
  for (std::size_t j = 0; j < decoder_.size(); ++j)
    out.push_back({"dec" + std::to_string(j) + ".weight", ParamKind::Stiefel, &decoder_[j].weight()});
  out.push_back({"head.weight", ParamKind::Euclidean, &head_.weight});
  out.push_back({"head.bias", ParamKind::Euclidean, &head_.bias});
  return out;
}

void USpdNet::set_state(const std::vector<std::pair<std::string, SPDMatrix>>& s) {
  if (!s.empty()) throw DataError("U-SPDNet has no running state");
}

std::vector<std::string> USpdNet::describe() const {
  std::vector<std::string> out;
  for (const auto& l : encoder_) {
    out.push_back("BiMap " + std::to_string(l.in_dim()) + "->" + std::to_string(l.out_dim()));
    out.emplace_back("ReEig");
  }
  out.emplace_back("LogEig");
  out.push_back("Linear " + std::to_string(head_.weight.cols()) + "->" +
                std::to_string(head_.weight.rows()));
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    const auto& l = decoder_[j];
    out.push_back("BiMapUp " + std::to_string(l.in_dim()) + "->" + std::to_string(l.out_dim()));
    out.emplace_back("ReEig");
    if (j + 1 < decoder_.size()) out.emplace_back("SkipBlend " + std::to_string(l.out_dim()));
  }
  return out;
}

namespace {

Trace run_forward(const SPDMatrix& x, const std::vector<layers::BiMapLayer>& encoder,
                  const std::vector<layers::BiMapExpandLayer>& decoder,
                  const layers::ReEigLayer& reeig, const LinearHead& head, double w,
                  bool with_decoder) {
  Trace t;
  t.enc.push_back(x);
  for (const auto& l : encoder) {
    t.enc_pre.push_back(l.forward(t.enc.back()));
    t.enc.push_back(reeig.forward(t.enc_pre.back()));
  }
  t.features = tangent_flatten(spd::spd_log(t.enc.back()));
  t.logits = head.apply(t.features);
  if (!with_decoder) return t;

  const std::size_t depth = encoder.size();
  SPDMatrix cur = t.enc.back();
  for (std::size_t j = 0; j < decoder.size(); ++j) {
    t.dec_in.push_back(cur);
    t.dec_pre.push_back(decoder[j].forward(cur));
    t.dec_up.push_back(reeig.forward(t.dec_pre.back()));
    const std::size_t level = depth - 1 - j;
    if (level >= 1) {
      auto b = blend_forward(t.dec_up.back(), t.enc[level], w);
      t.blend_z.push_back(std::move(b.z));
      cur = std::move(b.out);
    } else {
      cur = t.dec_up.back();
    }
  }
  t.recon = cur;
  return t;
}

}  // namespace

USpdNet::Output USpdNet::forward(const SPDMatrix& x) const {
  if (x.dim() != input_dim()) throw ShapeError("USpdNet input dim");
  Trace t = run_forward(x, encoder_, decoder_, reeig_, head_, config_.skip_combine_weight, true);
  return {std::move(t.logits), t.enc[latent_level()], std::move(t.recon)};
}

Vector USpdNet::logits(const SPDMatrix& x) const {
  if (x.dim() != input_dim()) throw ShapeError("USpdNet input dim");
  return run_forward(x, encoder_, decoder_, reeig_, head_, config_.skip_combine_weight, false)
      .logits;
}

BatchResult USpdNet::compute_batch(std::span<const SPDMatrix> xs, std::span<const int> labels,
                                   const BatchOptions& opts) {
  if (xs.empty()) throw DomainError("empty batch");
  if (xs.size() != labels.size()) throw ShapeError("batch inputs and labels differ in length");
  const std::size_t n = xs.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double w = config_.skip_combine_weight;
  const double lambda = config_.recon_weight;
  const std::size_t depth = encoder_.size();
  const layers::LogEigLayer log_layer;

  BatchResult result;
  std::vector<Matrix> enc_grads, dec_grads;
  Matrix head_w_grad, head_b_grad;
  if (opts.compute_grads) {
    for (const auto& l : encoder_) enc_grads.push_back(Matrix::Zero(l.weight().rows(), l.weight().cols()));
    for (const auto& l : decoder_) dec_grads.push_back(Matrix::Zero(l.weight().rows(), l.weight().cols()));
    head_w_grad = Matrix::Zero(head_.weight.rows(), head_.weight.cols());
    head_b_grad = Matrix::Zero(head_.bias.rows(), 1);
  }

  for (std::size_t i = 0; i < n; ++i) {
    const SPDMatrix& x = xs[i];
    if (x.dim() != input_dim()) throw ShapeError("USpdNet input dim");
    Trace t = run_forward(x, encoder_, decoder_, reeig_, head_, w, true);
    const double ce = cross_entropy(t.logits, labels[i]);
    const SymMatrix log_diff = spd::spd_log(t.recon) - spd::spd_log(x);
    const double d2 = log_diff.frobenius_norm() * log_diff.frobenius_norm();
    result.ce_loss += ce * inv_n;
    result.recon_loss += d2 * inv_n;
    result.logits.push_back(t.logits);
    if (!opts.compute_grads) continue;

    // Gradients w.r.t. each encoder feature, accumulated from every consumer.
    std::vector<SymMatrix> d_enc(depth + 1, SymMatrix::zero(1));
    for (std::size_t l = 0; l <= depth; ++l) d_enc[l] = SymMatrix::zero(t.enc[l].dim());

    const Vector dlogits = cross_entropy_grad(t.logits, labels[i]) * inv_n;
    head_w_grad += dlogits * t.features.transpose();
    head_b_grad.col(0) += dlogits;
    d_enc[depth] = d_enc[depth] +
                   log_layer.backward(t.enc[depth],
                                      tangent_flatten_backward(head_.weight.transpose() * dlogits,
                                                               t.enc[depth].dim()));

    if (lambda != 0.0) {
      SymMatrix up = log_layer.backward(t.recon, log_diff * (2.0 * lambda * inv_n));
      std::size_t blend_idx = t.blend_z.size();
      for (std::size_t j = decoder_.size(); j-- > 0;) {
        const std::size_t level = depth - 1 - j;
        if (level >= 1) {
          const SymMatrix dz = exp_backward(t.blend_z[--blend_idx], up);
          if (1.0 - w != 0.0) d_enc[level] = d_enc[level] + log_layer.backward(t.enc[level], dz * (1.0 - w));
          up = log_layer.backward(t.dec_up[j], dz * w);
        }
        up = reeig_.backward(t.dec_pre[j], up);
        auto g = decoder_[j].backward(t.dec_in[j], up);
        dec_grads[j] += g.weight_grad;
        up = std::move(g.input_grad);
      }
      d_enc[depth] = d_enc[depth] + up;
    }

    for (std::size_t l = depth; l >= 1; --l) {
      const SymMatrix pre = reeig_.backward(t.enc_pre[l - 1], d_enc[l]);
      auto g = encoder_[l - 1].backward(t.enc[l - 1], pre);
      enc_grads[l - 1] += g.weight_grad;
      d_enc[l - 1] = d_enc[l - 1] + g.input_grad;
    }
  }
  result.loss = result.ce_loss + lambda * result.recon_loss;
  if (!opts.compute_grads) return result;

  for (auto& g : enc_grads) result.grads.push_back(std::move(g));
  for (auto& g : dec_grads) result.grads.push_back(std::move(g));
  result.grads.push_back(std::move(head_w_grad));
  result.grads.push_back(std::move(head_b_grad));
  return result;
}

}  // namespace spdregime::models
