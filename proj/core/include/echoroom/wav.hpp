#pragma once

#include <filesystem>
#include <vector>

namespace echoroom {

struct WavData {
  std::vector<std::vector<double>> channels;
  double sample_rate = 0.0;

  std::size_t frames() const { return channels.empty() ? 0 : channels.front().size(); }
};

/// 32-bit IEEE float, interleaved. All channels must have equal length.
void write_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
               double sample_rate);

/// Reads float32/float64 and 16/24/32-bit PCM files (plain or extensible format).
WavData read_wav(const std::filesystem::path& path);

}  // namespace echoroom
