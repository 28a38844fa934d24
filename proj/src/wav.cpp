#include "emophon/wav.hpp"

#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace emophon {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

std::uint32_t le32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t le16(const unsigned char* b) {
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void put32(unsigned char* b, std::uint32_t v) {
  b[0] = v & 0xff; b[1] = (v >> 8) & 0xff; b[2] = (v >> 16) & 0xff; b[3] = (v >> 24) & 0xff;
}

void put16(unsigned char* b, std::uint16_t v) {
  b[0] = v & 0xff; b[1] = (v >> 8) & 0xff;
}

}  // namespace

std::vector<std::int16_t> read_wav_16k_mono(const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "rb");
  if (!raw) throw std::runtime_error("wav: cannot open " + path);
  std::unique_ptr<std::FILE, FileCloser> guard(raw);

  unsigned char hdr[12];
  if (std::fread(hdr, 1, 12, raw) != 12 || std::memcmp(hdr, "RIFF", 4) != 0 ||
      std::memcmp(hdr + 8, "WAVE", 4) != 0)
    throw std::runtime_error("wav: not a RIFF WAVE file: " + path);

  bool have_fmt = false;
  std::vector<std::int16_t> samples;
  unsigned char chunk[8];
  while (std::fread(chunk, 1, 8, raw) == 8) {
    const std::uint32_t size = le32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      std::vector<unsigned char> fmt(size);
      if (std::fread(fmt.data(), 1, size, raw) != size)
        throw std::runtime_error("wav: truncated fmt chunk: " + path);
      const std::uint16_t format = le16(fmt.data());
      const std::uint16_t channels = le16(fmt.data() + 2);
      const std::uint32_t rate = le32(fmt.data() + 4);
      const std::uint16_t bits = le16(fmt.data() + 14);
      if (format != 1) throw std::runtime_error("wav: not PCM: " + path);
      if (channels != 1) throw std::runtime_error("wav: not mono: " + path);
      if (rate != 16000) throw std::runtime_error("wav: not 16 kHz: " + path);
      if (bits != 16) throw std::runtime_error("wav: not 16-bit: " + path);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw std::runtime_error("wav: data before fmt: " + path);
      samples.resize(size / 2);
      if (std::fread(samples.data(), 1, samples.size() * 2, raw) !=
          samples.size() * 2)
        throw std::runtime_error("wav: truncated data chunk: " + path);
      return samples;
    } else {
      if (std::fseek(raw, static_cast<long>(size + (size & 1)), SEEK_CUR) != 0)
        throw std::runtime_error("wav: seek failed: " + path);
    }
  }
  throw std::runtime_error("wav: no data chunk: " + path);
}

void write_wav_16k_mono(const std::vector<std::int16_t>& samples,
                        const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "wb");
  if (!raw) throw std::runtime_error("wav: cannot write " + path);
  std::unique_ptr<std::FILE, FileCloser> guard(raw);

  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  unsigned char hdr[44];
  std::memcpy(hdr, "RIFF", 4);
  put32(hdr + 4, 36 + data_bytes);
  std::memcpy(hdr + 8, "WAVE", 4);
  std::memcpy(hdr + 12, "fmt ", 4);
  put32(hdr + 16, 16);
  put16(hdr + 20, 1);        // PCM
  put16(hdr + 22, 1);        // mono
  put32(hdr + 24, 16000);    // rate
  put32(hdr + 28, 32000);    // byte rate
  put16(hdr + 32, 2);        // block align
  put16(hdr + 34, 16);       // bits
  std::memcpy(hdr + 36, "data", 4);
  put32(hdr + 40, data_bytes);
  if (std::fwrite(hdr, 1, 44, raw) != 44 ||
      (!samples.empty() &&
       std::fwrite(samples.data(), 1, data_bytes, raw) != data_bytes))
    throw std::runtime_error("wav: write failed: " + path);
}

}  // namespace emophon
