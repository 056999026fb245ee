#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace shunit::png {

struct Image8 {
  int64_t height = 0;
  int64_t width = 0;
  int64_t channels = 0;  // 1 or 3
  std::vector<uint8_t> pixels;  // row-major, interleaved
};

// Reads any PNG; `channels` selects the decoded format (1 = gray, 3 = RGB).
// Throws DataError if the file is unreadable or its native format does not
// match (a label file must be single-channel).
Image8 read(const std::filesystem::path& path, int64_t channels);

void write(const std::filesystem::path& path, const Image8& image);

}  // namespace shunit::png
