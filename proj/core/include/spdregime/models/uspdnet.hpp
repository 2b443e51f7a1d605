#pragma once

#include "spdregime/models/network.hpp"

namespace spdregime::models {

/// Encoder/decoder SPD network with a classifier on the deepest stage.
///
/// Encoder: E_0 = X, E_l = ReEig(BiMap_l(E_{l-1})) for each stage drop.
/// Head:    LogEig(E_last) -> Linear.
/// Decoder: mirrors the encoder with dimension-raising BiMaps and ReEig; at
/// every level above the input the upsampled feature U is blended with the
/// encoder feature S as exp(w log U + (1 - w) log S). The last decoder step
/// returns to the input dimension and is the reconstruction.
class USpdNet final : public Network {
 public:
  struct Output {
    Vector logits;
    SPDMatrix latent;          // encoder feature one stage above the deepest
    SPDMatrix reconstruction;  // same dim as the input
  };

  explicit USpdNet(ModelConfig config);

  const ModelConfig& config() const override { return config_; }
  std::vector<ParamRef> parameters() override;
  Vector logits(const SPDMatrix& x) const override;
  BatchResult compute_batch(std::span<const SPDMatrix> xs, std::span<const int> labels,
                            const BatchOptions& opts) override;
  std::unique_ptr<Network> clone() const override { return std::make_unique<USpdNet>(*this); }
  std::vector<std::pair<std::string, SPDMatrix>> state() const override { return {}; }
  void set_state(const std::vector<std::pair<std::string, SPDMatrix>>& s) override;
  std::vector<std::string> describe() const override;

  Output forward(const SPDMatrix& x) const;
  /// Index into stages() of the latent feature.
  int latent_level() const { return static_cast<int>(encoder_.size()) - 1; }

  const std::vector<layers::BiMapLayer>& encoder() const { return encoder_; }
  const std::vector<layers::BiMapExpandLayer>& decoder() const { return decoder_; }
  const LinearHead& head() const { return head_; }

 private:
  ModelConfig config_;
  std::vector<layers::BiMapLayer> encoder_;
  std::vector<layers::BiMapExpandLayer> decoder_;
  layers::ReEigLayer reeig_;
  LinearHead head_;
};

/// exp(w log up + (1 - w) log skip).
SPDMatrix skip_blend(const SPDMatrix& up, const SPDMatrix& skip, double w);

}  // namespace spdregime::models
