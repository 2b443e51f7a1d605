#include "spdregime/models/checkpoint.hpp"

#include "../binary_util.hpp"
#include "../json_util.hpp"
#include "spdregime/error.hpp"

#include <fstream>

namespace spdregime::models {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'D', 'R', 'C', 'K', 'P', 'T'};

void put_matrix(std::ostream& out, const Matrix& m) {
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::put<double>(out, m(i, j));
}

Matrix get_matrix(std::istream& in) {
  const auto rows = detail::get<std::uint32_t>(in, "rows");
  const auto cols = detail::get<std::uint32_t>(in, "cols");
  if (rows > 4096 || cols > 4096) throw DataError("checkpoint: implausible tensor shape");
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = detail::get<double>(in, "tensor");
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Network& model,
                     const std::vector<int>& input_order, int epoch) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const ModelConfig& cfg = model.config();

  out.write(kMagic, sizeof kMagic);
  detail::put<std::uint32_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.kind));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.tmd.size()));
  for (int d : cfg.tmd) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  detail::put<std::uint64_t>(out, cfg.seed);

  detail::Json meta;
  meta["config"] = detail::Json::parse(model_config_to_json(cfg));
  meta["input_order"] = input_order;
  meta["epoch"] = epoch;
  detail::put_string(out, meta.dump());

  const auto layers = model.describe();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) detail::put_string(out, l);

  const auto params = model.parameters();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    detail::put_string(out, p.name);
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(p.kind));
    put_matrix(out, *p.value);
  }

  const auto state = model.state();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(state.size()));
  for (const auto& [name, m] : state) {
    detail::put_string(out, name);
    put_matrix(out, m.matrix());
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());

  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + sizeof magic, kMagic))
    throw DataError("not a checkpoint file: " + path.string());
  const auto version = detail::get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto kind = detail::get<std::uint32_t>(in, "model kind");
  const auto n_tmd = detail::get<std::uint32_t>(in, "tmd length");
  if (n_tmd > 64) throw DataError("checkpoint: implausible tmd length");
  std::vector<int> tmd;
  for (std::uint32_t i = 0; i < n_tmd; ++i)
    tmd.push_back(static_cast<int>(detail::get<std::uint32_t>(in, "tmd")));
  const auto seed = detail::get<std::uint64_t>(in, "seed");

  const detail::Json meta = detail::Json::parse(detail::get_string(in, "metadata"), nullptr, false);
  if (meta.is_discarded() || !meta.contains("config")) throw DataError("checkpoint: bad metadata");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(meta.at("config").dump());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  if (static_cast<std::uint32_t>(cfg.kind) != kind || cfg.tmd != tmd || cfg.seed != seed)
    throw DataError("checkpoint: header disagrees with config echo");

  Checkpoint ck;
  ck.model = build_model(cfg);
  ck.input_order = meta.value("input_order", std::vector<int>{});
  ck.epoch = meta.value("epoch", 0);

  const auto n_layers = detail::get<std::uint32_t>(in, "layer count");
  std::vector<std::string> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) layers.push_back(detail::get_string(in, "layer"));
  if (layers != ck.model->describe()) throw DataError("checkpoint: layer list mismatch");

  auto params = ck.model->parameters();
  if (detail::get<std::uint32_t>(in, "parameter count") != params.size())
    throw DataError("checkpoint: parameter count mismatch");
  for (auto& p : params) {
    if (detail::get_string(in, "parameter name") != p.name)
      throw DataError("checkpoint: unexpected parameter, expected " + p.name);
    if (detail::get<std::uint8_t>(in, "parameter kind") != static_cast<std::uint8_t>(p.kind))
      throw DataError("checkpoint: parameter kind mismatch for " + p.name);
    Matrix m = get_matrix(in);
    if (m.rows() != p.value->rows() || m.cols() != p.value->cols())
      throw DataError("checkpoint: shape mismatch for " + p.name);
    if (p.kind == ParamKind::Stiefel && layers::orthonormality_error(m) > 1e-8)
      throw DataError("checkpoint: " + p.name + " is not orthonormal");
    *p.value = std::move(m);
  }

  const auto n_state = detail::get<std::uint32_t>(in, "state count");
  std::vector<std::pair<std::string, SPDMatrix>> state;
  for (std::uint32_t i = 0; i < n_state; ++i) {
    std::string name = detail::get_string(in, "state name");
    state.emplace_back(std::move(name), SPDMatrix(get_matrix(in)));
  }
  ck.model->set_state(state);
  return ck;
}

}  // namespace spdregime::models
