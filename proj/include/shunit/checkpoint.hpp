#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace shunit {

inline constexpr uint32_t kCheckpointVersion = 1;

// On-disk layout (little-endian):
//   "SHUNITCK" | u32 version | str config | i64 iteration | str rng_state
//   | u64 count | count x { str name | u8 dtype | u32 ndim | i64 dims[ndim] | raw bytes }
//   | u64 FNV-1a checksum of everything before it
// where str = u64 length + bytes. dtype: 0 f32, 1 f64, 2 i64, 3 bool.
// Arrays are written in the order given; the trainer sorts them by name.
struct CheckpointContents {
  uint32_t version = kCheckpointVersion;
  std::string config_text;
  int64_t iteration = 0;
  std::string rng_state;
  std::vector<std::pair<std::string, torch::Tensor>> arrays;

  const torch::Tensor* find(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointContents& contents);

// Reads and validates the whole file before returning; throws CheckpointError
// on truncation, checksum mismatch, bad magic or an unsupported version.
CheckpointContents read_checkpoint(const std::filesystem::path& path);

}  // namespace shunit
