#include "spdregime/models/config.hpp"

#include "../json_util.hpp"

namespace spdregime::models {

using detail::Json;

std::string model_config_to_json(const ModelConfig& c) {
  Json j;
  j["model"] = to_string(c.kind);
  j["tmd"] = c.tmd;
  j["use_rbn"] = c.use_rbn;
  if (c.annealed())
    j["learning_rate"] = {c.lr_start, c.lr_end};
  else
    j["learning_rate"] = c.lr_start;
  j["momentum"] = c.momentum;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["recon_weight"] = c.recon_weight;
  j["skip_combine_weight"] = c.skip_combine_weight;
  j["reeig_epsilon"] = c.reeig_epsilon;
  j["rbn_momentum"] = c.rbn_momentum;
  j["oversample"] = c.oversample;
  return j.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
  const std::string what = "model config";
  const Json j = detail::parse_json(text, what);
  detail::require_object(j, what);
  detail::reject_unknown_keys(
      j,
      {"model", "tmd", "use_rbn", "learning_rate", "momentum", "epochs", "batch_size", "seed",
       "recon_weight", "skip_combine_weight", "reeig_epsilon", "rbn_momentum", "oversample"},
      what);
  if (!j.contains("model")) throw ConfigError(what + ": missing key 'model'");
  ModelConfig c = ModelConfig::preset(parse_model_kind(detail::get_as<std::string>(j, "model", what)));
  detail::read_if(j, "tmd", c.tmd, what);
  detail::read_if(j, "use_rbn", c.use_rbn, what);
  if (j.contains("learning_rate")) {
    const Json& lr = j.at("learning_rate");
    if (lr.is_number()) {
      c.lr_start = c.lr_end = lr.get<double>();
    } else if (lr.is_array() && lr.size() == 2 && lr[0].is_number() && lr[1].is_number()) {
      c.lr_start = lr[0].get<double>();
      c.lr_end = lr[1].get<double>();
    } else {
      throw ConfigError(what + ": learning_rate must be a number or [start, end]");
    }
  }
  detail::read_if(j, "momentum", c.momentum, what);
  detail::read_if(j, "epochs", c.epochs, what);
  detail::read_if(j, "batch_size", c.batch_size, what);
  detail::read_if(j, "seed", c.seed, what);
  detail::read_if(j, "recon_weight", c.recon_weight, what);
  detail::read_if(j, "skip_combine_weight", c.skip_combine_weight, what);
  detail::read_if(j, "reeig_epsilon", c.reeig_epsilon, what);
  detail::read_if(j, "rbn_momentum", c.rbn_momentum, what);
  detail::read_if(j, "oversample", c.oversample, what);
  c.validate();
  return c;
}

}  // namespace spdregime::models
