#pragma once

// Text checkpoints. Values are written as hexadecimal floats so a save/load
// round trip is bit-exact and two identical runs give identical files.
//
//   tailorsum-checkpoint 1
//   dims <vocab> <embed> <hidden> <attention>
//   block <name> <count>
//   <count values, 8 per line>
//   ...
//   adagrad <learning_rate> <initial_accumulator> <count>   (optional)
//   <count values>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "tailorsum/model.hpp"
#include "tailorsum/training.hpp"

namespace tailorsum {

struct Checkpoint {
  ModelParams params;
  std::optional<AdagradState> optimizer;
};

std::string serialize_checkpoint(const ModelParams& params, const AdagradState* optimizer = nullptr);
// Throws std::runtime_error naming the line on malformed or truncated input.
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const AdagradState* optimizer = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tailorsum
