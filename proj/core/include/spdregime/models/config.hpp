#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace spdregime::models {

enum class ModelKind { SPDNet, SPDNetBN, SPDNet3BiRe, SPDNetBN3BiRe, USPDNet6BiRe };

std::string to_string(ModelKind kind);
/// Accepts the display names ("SPDNet", "SPDNetBN-3BiRe", "U-SPDNet-6BiRe", ...).
ModelKind parse_model_kind(std::string_view name);

inline constexpr int kNumClasses = 3;

/// Declarative description of one architecture plus its training settings.
/// `tmd` lists the SPD stage dimensions followed by the class count.
struct ModelConfig {
  ModelKind kind = ModelKind::SPDNet;
  std::vector<int> tmd{60, 20, 3};
  bool use_rbn = false;
  double lr_start = 1e-3;
  double lr_end = 1e-3;
  double momentum = 0.9;
  int epochs = 600;
  int batch_size = 30;
  std::uint64_t seed = 0;
  double recon_weight = 1.0;
  double skip_combine_weight = 0.5;
  double reeig_epsilon = 1e-4;
  double rbn_momentum = 0.9;
  bool oversample = true;

  /// Architecture and learning rate for one of the five reference models.
  static ModelConfig preset(ModelKind kind);

  bool is_unet() const { return kind == ModelKind::USPDNet6BiRe; }
  bool annealed() const { return lr_start != lr_end; }
  /// SPD stage dimensions (tmd without the trailing class count).
  std::vector<int> stages() const { return {tmd.begin(), tmd.end() - 1}; }

  /// Throws ConfigError on inconsistent dims or hyper-parameters.
  void validate() const;
};

/// Learning rate for a 1-based epoch: geometric decay from lr_start to
/// lr_end across `epochs`, constant when they are equal.
double learning_rate_at(const ModelConfig& config, int epoch);

/// JSON object text for `config` with a stable key order.
std::string model_config_to_json(const ModelConfig& config);
/// Parses a JSON object: `model` selects the preset, remaining keys override
/// it. `learning_rate` is a number or a [start, end] pair. Unknown keys and
/// invalid values throw ConfigError.
ModelConfig model_config_from_json(std::string_view text);

}  // namespace spdregime::models
