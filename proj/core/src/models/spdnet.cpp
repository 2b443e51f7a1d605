#include "spdregime/models/spdnet.hpp"

#include "spdregime/error.hpp"

#include <cmath>
#include <random>

namespace spdregime::models {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

LinearHead random_head(int features, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(features)));
  LinearHead head{Matrix(kNumClasses, features), Matrix::Zero(kNumClasses, 1)};
  for (int j = 0; j < features; ++j)
    for (int i = 0; i < kNumClasses; ++i) head.weight(i, j) = normal(rng);
  return head;
}

}  // namespace

SpdNet::SpdNet(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.is_unet()) throw ConfigError("SpdNet cannot build a U-SPDNet configuration");
  std::mt19937_64 rng(config_.seed);
  const auto dims = config_.stages();
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    layers_.emplace_back(layers::BiMapLayer::random(dims[k], dims[k + 1], rng));
    if (config_.use_rbn) layers_.emplace_back(layers::RiemannianBatchNorm(dims[k + 1], config_.rbn_momentum));
    layers_.emplace_back(layers::ReEigLayer(config_.reeig_epsilon));
  }
  layers_.emplace_back(layers::LogEigLayer{});
  head_ = random_head(tangent_size(dims.back()), rng);
}

std::vector<ParamRef> SpdNet::parameters() {
  std::vector<ParamRef> out;
  int nb = 0;
  int nr = 0;
  for (auto& layer : layers_) {
    if (auto* b = std::get_if<layers::BiMapLayer>(&layer))
      out.push_back({"bimap" + std::to_string(nb++) + ".weight", ParamKind::Stiefel, &b->weight()});
    else if (auto* r = std::get_if<layers::RiemannianBatchNorm>(&layer))
      out.push_back({"rbn" + std::to_string(nr++) + ".bias_log", ParamKind::Symmetric,
                     &r->bias_log_storage()});
  }
  out.push_back({"head.weight", ParamKind::Euclidean, &head_.weight});
  out.push_back({"head.bias", ParamKind::Euclidean, &head_.bias});
  return out;
}

Vector SpdNet::logits(const SPDMatrix& x) const {
  if (x.dim() != input_dim()) throw ShapeError("SpdNet input dim");
  SPDMatrix cur = x;
  Vector features;
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](const layers::BiMapLayer& l) { cur = l.forward(cur); },
                   [&](const layers::RiemannianBatchNorm& l) { cur = l.apply(cur, l.running_mean()); },
                   [&](const layers::ReEigLayer& l) { cur = l.forward(cur); },
                   [&](const layers::LogEigLayer& l) { features = tangent_flatten(l.forward(cur)); },
               },
               layer);
  }
  return head_.apply(features);
}

BatchResult SpdNet::compute_batch(std::span<const SPDMatrix> xs, std::span<const int> labels,
                                  const BatchOptions& opts) {
  if (xs.empty()) throw DomainError("empty batch");
  if (xs.size() != labels.size()) throw ShapeError("batch inputs and labels differ in length");
  for (const auto& x : xs)
    if (x.dim() != input_dim()) throw ShapeError("SpdNet input dim");

  const std::size_t n = xs.size();
  BatchResult result;

  // inputs[k] holds the batch entering layer k.
  std::vector<std::vector<SPDMatrix>> inputs;
  inputs.reserve(layers_.size());
  std::vector<SPDMatrix> cur(xs.begin(), xs.end());
  std::vector<SymMatrix> logs;
  std::size_t rbn_index = 0;
  for (auto& layer : layers_) {
    inputs.push_back(cur);
    std::visit(Overloaded{
                   [&](layers::BiMapLayer& l) {
                     for (auto& m : cur) m = l.forward(m);
                   },
                   [&](layers::RiemannianBatchNorm& l) {
                     if (opts.pinned_means) {
                       if (rbn_index >= opts.pinned_means->size())
                         throw ShapeError("too few pinned RBN means");
                       const SPDMatrix& mean = (*opts.pinned_means)[rbn_index];
                       cur = l.apply(cur, mean);
                       result.rbn_means.push_back(mean);
                     } else {
                       auto fwd = l.forward(cur, opts.mode);
                       cur = std::move(fwd.outputs);
                       result.rbn_means.push_back(std::move(fwd.mean));
                     }
                     ++rbn_index;
                   },
                   [&](layers::ReEigLayer& l) {
                     for (auto& m : cur) m = l.forward(m);
                   },
                   [&](layers::LogEigLayer& l) {
                     logs.reserve(n);
                     for (const auto& m : cur) logs.push_back(l.forward(m));
                   },
               },
               layer);
  }

  const int stage = logs.front().dim();
  std::vector<Vector> features;
  features.reserve(n);
  result.logits.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    features.push_back(tangent_flatten(logs[i]));
    result.logits.push_back(head_.apply(features.back()));
    result.ce_loss += cross_entropy(result.logits.back(), labels[i]);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  result.ce_loss *= inv_n;
  result.loss = result.ce_loss;
  if (!opts.compute_grads) return result;

  Matrix head_w_grad = Matrix::Zero(head_.weight.rows(), head_.weight.cols());
  Matrix head_b_grad = Matrix::Zero(head_.bias.rows(), 1);
  std::vector<SymMatrix> upstream;
  upstream.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector dlogits = cross_entropy_grad(result.logits[i], labels[i]) * inv_n;
    head_w_grad += dlogits * features[i].transpose();
    head_b_grad.col(0) += dlogits;
    upstream.push_back(tangent_flatten_backward(head_.weight.transpose() * dlogits, stage));
  }

  // Walk back through the stack; layer grads are collected in reverse.
  std::vector<Matrix> layer_grads;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& batch = inputs[k];
    std::visit(Overloaded{
                   [&](const layers::BiMapLayer& l) {
                     Matrix wg = Matrix::Zero(l.weight().rows(), l.weight().cols());
                     for (std::size_t i = 0; i < n; ++i) {
                       auto g = l.backward(batch[i], upstream[i]);
                       wg += g.weight_grad;
                       upstream[i] = std::move(g.input_grad);
                     }
                     layer_grads.push_back(std::move(wg));
                   },
                   [&](const layers::RiemannianBatchNorm& l) {
                     --rbn_index;
                     auto g = l.backward(batch, result.rbn_means[rbn_index], upstream);
                     upstream = std::move(g.input_grads);
                     layer_grads.push_back(g.bias_grad.matrix());
                   },
                   [&](const layers::ReEigLayer& l) {
                     for (std::size_t i = 0; i < n; ++i) upstream[i] = l.backward(batch[i], upstream[i]);
                   },
                   [&](const layers::LogEigLayer& l) {
                     for (std::size_t i = 0; i < n; ++i) upstream[i] = l.backward(batch[i], upstream[i]);
                   },
               },
               layers_[k]);
  }
  result.grads.assign(layer_grads.rbegin(), layer_grads.rend());
  result.grads.push_back(std::move(head_w_grad));
  result.grads.push_back(std::move(head_b_grad));
  return result;
}

std::vector<std::pair<std::string, SPDMatrix>> SpdNet::state() const {
  std::vector<std::pair<std::string, SPDMatrix>> out;
  int nr = 0;
  for (const auto& layer : layers_)
    if (const auto* r = std::get_if<layers::RiemannianBatchNorm>(&layer))
      out.emplace_back("rbn" + std::to_string(nr++) + ".running_mean", r->running_mean());
  return out;
}

void SpdNet::set_state(const std::vector<std::pair<std::string, SPDMatrix>>& s) {
  std::size_t next = 0;
  for (auto& layer : layers_) {
    auto* r = std::get_if<layers::RiemannianBatchNorm>(&layer);
    if (!r) continue;
    const std::string name = "rbn" + std::to_string(next) + ".running_mean";
    if (next >= s.size() || s[next].first != name) throw DataError("model state is missing " + name);
    r->set_running_mean(s[next].second);
    ++next;
  }
  if (next != s.size()) throw DataError("model state has unexpected entries");
}

std::vector<std::string> SpdNet::describe() const {
  std::vector<std::string> out;
  for (const auto& layer : layers_) {
    std::visit(Overloaded{
                   [&](const layers::BiMapLayer& l) {
                     out.push_back("BiMap " + std::to_string(l.in_dim()) + "->" +
                                   std::to_string(l.out_dim()));
                   },
                   [&](const layers::RiemannianBatchNorm& l) {
                     out.push_back("RBN " + std::to_string(l.dim()));
                   },
                   [&](const layers::ReEigLayer&) { out.emplace_back("ReEig"); },
                   [&](const layers::LogEigLayer&) { out.emplace_back("LogEig"); },
               },
               layer);
  }
  out.push_back("Linear " + std::to_string(head_.weight.cols()) + "->" +
                std::to_string(head_.weight.rows()));
  return out;
}

}  // namespace spdregime::models
