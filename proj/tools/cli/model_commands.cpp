#include "common.hpp"

#include "spdregime/error.hpp"
#include "spdregime/io/dataset.hpp"
#include "spdregime/models/checkpoint.hpp"
#include "spdregime/models/training.hpp"

#include <fstream>
#include <sstream>

namespace spdregime::cli {

using regimes::Split;

namespace {

const std::array<std::string, 3> kRegimeKeys{"stressed", "normal", "rally"};

std::vector<int> dataset_input_order(const io::Dataset& data) {
  const Json meta = Json::parse(data.meta_json);
  std::vector<int> order;
  if (meta.contains("input_order")) order = meta.at("input_order").get<std::vector<int>>();
  if (!order.empty() && !regimes::is_permutation(order, data.dim))
    throw DataError("dataset input_order is not a permutation");
  return order;
}

models::LabeledSet subset(const io::Dataset& data, std::optional<Split> split, std::vector<std::size_t>* idx = nullptr) {
  models::LabeledSet out;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    if (split && s.split != *split) continue;
    out.inputs.push_back(s.corr);
    out.labels.push_back(regimes::to_int(s.regime));
    if (idx) idx->push_back(i);
  }
  return out;
}

/// CSV `index,predicted` with regime names or 0..2.
std::map<std::size_t, int> read_predictions(const fs::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::getline(in, line);
  if (line != "index,predicted") throw DataError(path.string() + ": header must be 'index,predicted'");
  std::map<std::size_t, int> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError(path.string() + ": bad row '" + line + "'");
    std::size_t index = 0;
    try {
      std::size_t used = 0;
      index = std::stoul(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("index");
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad index in '" + line + "'");
    }
    if (!out.emplace(index, regimes::to_int(regimes::parse_regime(line.substr(comma + 1)))).second)
      throw DataError(path.string() + ": duplicate index " + std::to_string(index));
  }
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

}  // namespace

void cmd_train(const Invocation& inv) {
  const RunConfig cfg = load_config(inv);
  const std::string what = "train config";
  detail::reject_unknown_keys(cfg.json, {"seed", "dataset", "model"}, what);
  if (!cfg.json.contains("model")) throw ConfigError(what + ": missing required key 'model'");
  detail::require_object(cfg.json.at("model"), what + ".model");
  models::ModelConfig mc = models::model_config_from_json(cfg.json.at("model").dump());
  if (inv.seed || cfg.json.contains("seed")) mc.seed = cfg.seed(inv);
  mc.validate();
  const fs::path dataset_path = existing_path(cfg, "dataset", what);

  const io::Dataset data = io::read_dataset(dataset_path);
  if (data.dim != mc.tmd.front())
    throw DataError("dataset matrices are " + std::to_string(data.dim) + "x" + std::to_string(data.dim) +
                    " but the model expects " + std::to_string(mc.tmd.front()));
  const auto train_set = subset(data, Split::Train);
  const auto val_set = subset(data, Split::Val);
  if (train_set.empty()) throw DataError("dataset has no training samples");
  const auto input_order = dataset_input_order(data);

  begin_output(inv, cfg);
  auto model = models::build_model(mc);
  const auto report = models::train(*model, train_set, val_set);
  models::save_checkpoint(inv.out / "checkpoint.bin", *report.best, input_order, report.best_epoch);
  {
    auto out = open_out(inv.out / "report.csv");
    models::write_report_csv(report, out);
  }
  Json summary;
  summary["model"] = models::to_string(mc.kind);
  summary["layers"] = model->describe();
  summary["seed"] = mc.seed;
  summary["train_samples"] = train_set.size();
  summary["val_samples"] = val_set.size();
  summary["epochs"] = report.epochs.size();
  summary["best_epoch"] = report.best_epoch;
  summary["best_val_acc"] = std::isnan(report.best_val_acc) ? Json(nullptr) : Json(report.best_val_acc);
  summary["final_train_loss"] = report.epochs.back().train_loss;
  summary["final_train_acc"] = report.epochs.back().train_acc;
  write_json(inv.out / "summary.json", summary);
}

void cmd_eval(const Invocation& inv) {
  const RunConfig cfg = load_config(inv);
  const std::string what = "eval config";
  detail::reject_unknown_keys(cfg.json, {"seed", "dataset", "checkpoint", "predictions", "split"}, what);
  const std::string split_name = string_or(cfg.json, "split", "test", what);
  std::optional<Split> split;
  if (split_name != "all") {
    try {
      split = regimes::parse_split(split_name);
    } catch (const DataError&) {
      throw ConfigError(what + ": split must be train, val, test or all");
    }
  }
  const bool has_ckpt = cfg.json.contains("checkpoint");
  if (has_ckpt == cfg.json.contains("predictions"))
    throw ConfigError(what + ": give exactly one of 'checkpoint' and 'predictions'");
  const fs::path dataset_path = existing_path(cfg, "dataset", what);
  const fs::path source = existing_path(cfg, has_ckpt ? "checkpoint" : "predictions", what);

  const io::Dataset data = io::read_dataset(dataset_path);
  std::vector<std::size_t> idx;
  const auto set = subset(data, split, &idx);
  if (set.empty()) throw DataError("no samples in split '" + split_name + "'");

  std::vector<int> predicted;
  std::string model_name = "predictions";
  if (has_ckpt) {
    const auto ckpt = models::load_checkpoint(source);
    if (ckpt.model->input_dim() != data.dim) throw DataError("checkpoint input dim differs from dataset dim");
    model_name = models::to_string(ckpt.model->config().kind);
    for (const auto& x : set.inputs) predicted.push_back(ckpt.model->predict(x));
  } else {
    const auto preds = read_predictions(source);
    for (std::size_t i : idx) {
      const auto it = preds.find(i);
      if (it == preds.end()) throw DataError("no prediction for sample " + std::to_string(i));
      predicted.push_back(it->second);
    }
  }
  const auto result = models::evaluate_predictions(set.labels, predicted);

  begin_output(inv, cfg);
  Json metrics;
  metrics["model"] = model_name;
  metrics["split"] = split_name;
  metrics["n"] = set.size();
  metrics["accuracy"] = result.accuracy;
  const double n = static_cast<double>(set.size());
  for (std::size_t r = 0; r < 3; ++r) {
    long pred_count = 0;
    long true_count = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      pred_count += result.confusion[c][r];
      true_count += result.confusion[r][c];
    }
    metrics["recall"][kRegimeKeys[r]] = result.recall[r];
    metrics["predicted_share"][kRegimeKeys[r]] = static_cast<double>(pred_count) / n;
    metrics["true_share"][kRegimeKeys[r]] = static_cast<double>(true_count) / n;
  }
  metrics["corner_solution"] = result.corner_solution;
  write_json(inv.out / "metrics.json", metrics);
  {
    auto out = open_out(inv.out / "confusion.csv");
    out << "true,stressed,normal,rally\n";
    for (std::size_t r = 0; r < 3; ++r)
      out << kRegimeKeys[r] << ',' << result.confusion[r][0] << ',' << result.confusion[r][1] << ','
          << result.confusion[r][2] << '\n';
  }
  auto out = open_out(inv.out / "predictions.csv");
  out << "index,true,predicted\n";
  for (std::size_t k = 0; k < idx.size(); ++k)
    out << idx[k] << ',' << kRegimeKeys[static_cast<std::size_t>(set.labels[k])] << ','
        << kRegimeKeys[static_cast<std::size_t>(predicted[k])] << '\n';
}

}  // namespace spdregime::cli
