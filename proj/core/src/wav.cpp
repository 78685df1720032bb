#include "echoroom/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "echoroom/errors.hpp"

namespace echoroom {
namespace {

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav(const std::filesystem::path& path, const std::vector<std::vector<double>>& channels,
               double sample_rate) {
  if (channels.empty()) throw ValidationError("no channels to write");
  const std::size_t frames = channels.front().size();
  for (const auto& c : channels) {
    if (c.size() != frames) throw ValidationError("channels differ in length");
  }
  if (!(sample_rate > 0.0) || sample_rate != std::floor(sample_rate)) {
    throw ValidationError("WAV sample rate must be a positive integer");
  }
  const auto nch = static_cast<std::uint16_t>(channels.size());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * channels.size() * 4);
  const auto fs = static_cast<std::uint32_t>(sample_rate);

  std::string b;
  b.reserve(44 + data_bytes);
  b += "RIFF";
  put_u32(b, 36 + data_bytes);
  b += "WAVEfmt ";
  put_u32(b, 16);
  put_u16(b, 3);
  put_u16(b, nch);
  put_u32(b, fs);
  put_u32(b, fs * nch * 4);
  put_u16(b, static_cast<std::uint16_t>(nch * 4));
  put_u16(b, 32);
  b += "data";
  put_u32(b, data_bytes);
  for (std::size_t n = 0; n < frames; ++n) {
    for (const auto& c : channels) {
      const float v = static_cast<float>(c[n]);
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      put_u32(b, bits);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw ValidationError("failed writing " + path.string());
}

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 12 || raw.compare(0, 4, "RIFF") != 0 || raw.compare(8, 4, "WAVE") != 0) {
    throw ValidationError(path.string() + " is not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, nch = 0, bits = 0;
  std::uint32_t fs = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const std::string id = raw.substr(pos, 4);
    const std::size_t size = get_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > raw.size()) {
      if (id != "data") throw ValidationError(path.string() + ": truncated chunk " + id);
    }
    if (id == "fmt ") {
      if (size < 16) throw ValidationError(path.string() + ": short fmt chunk");
      format = get_u16(p + body);
      nch = get_u16(p + body + 2);
      fs = get_u32(p + body + 4);
      bits = get_u16(p + body + 14);
      if (format == 0xFFFE && size >= 26) format = get_u16(p + body + 24);
    } else if (id == "data") {
      data = p + body;
      data_size = std::min(size, raw.size() - body);
      if (data_size != size) throw ValidationError(path.string() + ": data chunk declares " + std::to_string(size) +
                                                   " bytes, found " + std::to_string(data_size));
    }
    pos = body + size + (size & 1);
  }
  if (nch == 0 || fs == 0 || !data) throw ValidationError(path.string() + ": missing fmt or data chunk");
  const bool is_float = format == 3;
  if (!(format == 1 || is_float)) throw ValidationError(path.string() + ": unsupported WAV format");
  if (is_float && bits != 32 && bits != 64) throw ValidationError(path.string() + ": unsupported float width");
  if (!is_float && bits != 16 && bits != 24 && bits != 32) throw ValidationError(path.string() + ": unsupported PCM width");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_size / (width * nch);
  WavData out;
  out.sample_rate = fs;
  out.channels.assign(nch, std::vector<double>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < nch; ++c) {
      const unsigned char* s = data + (n * nch + c) * width;
      double v = 0.0;
      if (is_float && bits == 32) {
        float f;
        const std::uint32_t u = get_u32(s);
        std::memcpy(&f, &u, 4);
        v = f;
      } else if (is_float) {
        const std::uint64_t u = static_cast<std::uint64_t>(get_u32(s)) | (static_cast<std::uint64_t>(get_u32(s + 4)) << 32);
        std::memcpy(&v, &u, 8);
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(get_u16(s)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t x = s[0] | (s[1] << 8) | (s[2] << 16);
        if (x & 0x800000) x -= 0x1000000;
        v = x / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(get_u32(s)) / 2147483648.0;
      }
      out.channels[c][n] = v;
    }
  }
  return out;
}

}  // namespace echoroom
