#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "echoroom/annotate.hpp"

namespace echoroom {

/// Locale-independent "%.*g" rendering; non-finite values become inf, -inf, nan.
std::string format_number(double v, int precision = 9);

/// CSV with a header row. Column names carry their units, e.g. "rt60_s".
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string to_string() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct SkylineImageOptions {
  std::size_t max_samples = 0;  // crop the time axis; 0 keeps everything
  double gamma = 0.5;           // applied to |value| before quantization
  std::size_t column_width = 4;  // pixels per microphone
};

/// Grayscale PNG with time running down and one column band per microphone.
void export_skyline_png(const std::filesystem::path& path, const Skyline& skyline,
                        const SkylineImageOptions& options = {});

}  // namespace echoroom
