#pragma once

#include "spdregime/models/network.hpp"

#include <variant>

namespace spdregime::models {

/// Sequential SPDNet / SPDNetBN stack:
///   [BiMap (-> RBN) -> ReEig] x stages, LogEig, linear classifier.
/// With RBN enabled the normalisation sits between each BiMap and its ReEig.
class SpdNet final : public Network {
 public:
  using Layer = std::variant<layers::BiMapLayer, layers::RiemannianBatchNorm, layers::ReEigLayer,
                             layers::LogEigLayer>;

  explicit SpdNet(ModelConfig config);

  const ModelConfig& config() const override { return config_; }
  std::vector<ParamRef> parameters() override;
  Vector logits(const SPDMatrix& x) const override;
  BatchResult compute_batch(std::span<const SPDMatrix> xs, std::span<const int> labels,
                            const BatchOptions& opts) override;
  std::unique_ptr<Network> clone() const override { return std::make_unique<SpdNet>(*this); }
  std::vector<std::pair<std::string, SPDMatrix>> state() const override;
  void set_state(const std::vector<std::pair<std::string, SPDMatrix>>& s) override;

  const std::vector<Layer>& layers() const { return layers_; }
  const LinearHead& head() const { return head_; }
  std::vector<std::string> describe() const override;

 private:
  ModelConfig config_;
  std::vector<Layer> layers_;
  LinearHead head_;
};

}  // namespace spdregime::models
