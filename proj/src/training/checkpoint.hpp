#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "model/params.hpp"
#include "training/adam.hpp"
#include "training/run_config.hpp"

namespace lesion {

inline constexpr char kCheckpointMagic[8] = {'L', 'S', 'N', 'F', 'R', 'M', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (all integers little-endian u64):
//   magic "LSNFRMT1"
//   header length, header bytes (UTF-8 `key=value` lines)
//   per array: name length, name bytes, element count, elements
// Elements are IEEE little-endian floats of `element_bits` (header key) width.
// Arrays are the model parameters in order, then optionally `adam.m.<name>`
// and `adam.v.<name>` for each parameter.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  RunConfig config;
  ModelParams params;
  std::optional<AdamState> optimizer;
  std::uint64_t global_step = 0;  // the training stream position (rng state)

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint, int element_bits = kScalarBits);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lesion
