#include "spdregime/models/config.hpp"

#include "spdregime/error.hpp"

#include <cmath>

namespace spdregime::models {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::SPDNet: return "SPDNet";
    case ModelKind::SPDNetBN: return "SPDNetBN";
    case ModelKind::SPDNet3BiRe: return "SPDNet-3BiRe";
    case ModelKind::SPDNetBN3BiRe: return "SPDNetBN-3BiRe";
    case ModelKind::USPDNet6BiRe: return "U-SPDNet-6BiRe";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::SPDNet, ModelKind::SPDNetBN, ModelKind::SPDNet3BiRe,
                      ModelKind::SPDNetBN3BiRe, ModelKind::USPDNet6BiRe}) {
    if (name == to_string(k)) return k;
  }
  if (name == "U-SPDNet") return ModelKind::USPDNet6BiRe;
  throw ConfigError("unknown model '" + std::string(name) + "'");
}

ModelConfig ModelConfig::preset(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  switch (kind) {
    case ModelKind::SPDNet:
      c.tmd = {60, 20, 3};
      c.lr_start = c.lr_end = 1e-3;
      break;
    case ModelKind::SPDNetBN:
      c.tmd = {60, 20, 3};
      c.use_rbn = true;
      c.lr_start = c.lr_end = 1e-3;
      break;
    case ModelKind::SPDNet3BiRe:
      c.tmd = {60, 40, 20, 10, 3};
      c.lr_start = c.lr_end = 1e-4;
      break;
    case ModelKind::SPDNetBN3BiRe:
      c.tmd = {60, 40, 20, 10, 3};
      c.use_rbn = true;
      c.lr_start = c.lr_end = 1e-4;
      break;
    case ModelKind::USPDNet6BiRe:
      c.tmd = {60, 40, 20, 10, 3};
      c.lr_start = 1e-2;
      c.lr_end = 1e-5;
      break;
  }
  return c;
}

void ModelConfig::validate() const {
  if (tmd.size() < 3) throw ConfigError("tmd needs at least one SPD stage pair and a class count");
  if (tmd.back() != kNumClasses)
    throw ConfigError("tmd must end with the class count " + std::to_string(kNumClasses));
  for (std::size_t i = 0; i + 1 < tmd.size(); ++i) {
    if (tmd[i] < 1) throw ConfigError("tmd entries must be positive");
    if (i + 2 < tmd.size() && !(tmd[i] > tmd[i + 1]))
      throw ConfigError("tmd SPD stages must be strictly decreasing");
  }
  const bool bn_kind = kind == ModelKind::SPDNetBN || kind == ModelKind::SPDNetBN3BiRe;
  if (use_rbn != bn_kind) throw ConfigError("use_rbn does not match model " + to_string(kind));
  if (is_unet() && tmd.size() < 5)
    throw ConfigError("U-SPDNet needs at least three stage transitions");
  if (!(lr_start >= 0.0) || !(lr_end >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if ((lr_start == 0.0) != (lr_end == 0.0))
    throw ConfigError("annealing endpoints must both be zero or both positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(recon_weight >= 0.0)) throw ConfigError("recon_weight must be >= 0");
  if (!(skip_combine_weight >= 0.0 && skip_combine_weight <= 1.0))
    throw ConfigError("skip_combine_weight must lie in [0, 1]");
  if (!(reeig_epsilon > 0.0)) throw ConfigError("reeig_epsilon must be positive");
  if (!(rbn_momentum > 0.0 && rbn_momentum < 1.0))
    throw ConfigError("rbn_momentum must lie in (0, 1)");
}

double learning_rate_at(const ModelConfig& config, int epoch) {
  if (!config.annealed() || config.epochs <= 1) return config.lr_start;
  const double frac = static_cast<double>(epoch - 1) / static_cast<double>(config.epochs - 1);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, frac);
}

}  // namespace spdregime::models
