#pragma once

#include "spdregime/models/network.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace spdregime::models {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::unique_ptr<Network> model;
  /// Asset permutation applied to inputs before the model (empty = identity).
  std::vector<int> input_order;
  int epoch = 0;
};

/// Binary container: magic "SPDRCKPT", version, model kind, tmd, seed, a
/// JSON config echo, the layer list, every parameter tensor in declaration
/// order and the RBN running means. Little-endian doubles.
void save_checkpoint(const std::filesystem::path& path, Network& model,
                     const std::vector<int>& input_order = {}, int epoch = 0);

/// Throws IoError when the file cannot be read, DataError when it is corrupt
/// or inconsistent with the model it describes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace spdregime::models
