#include "emophon/fmx.hpp"

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

void write_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  if (std::fwrite(b, 1, 4, f) != 4) throw std::runtime_error("fmx: write failed");
}

std::uint32_t read_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("fmx: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

FeatureMatrix read_fmx(const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "rb");
  if (!raw) throw std::runtime_error("fmx: cannot open " + path);
  std::unique_ptr<std::FILE, FileCloser> f(raw);

  char magic[4];
  if (std::fread(magic, 1, 4, raw) != 4 || std::memcmp(magic, "APFM", 4) != 0)
    throw std::runtime_error("fmx: bad magic in " + path);
  const std::uint32_t version = read_u32(raw);
  if (version != 1)
    throw std::runtime_error("fmx: unsupported version in " + path);

  FeatureMatrix m;
  m.frames = read_u32(raw);
  m.bins = read_u32(raw);
  std::uint32_t hop_bits = read_u32(raw);
  std::memcpy(&m.frame_hop_ms, &hop_bits, 4);

  m.data.resize(static_cast<std::size_t>(m.frames) * m.bins);
  if (!m.data.empty() &&
      std::fread(m.data.data(), 4, m.data.size(), raw) != m.data.size())
    throw std::runtime_error("fmx: truncated data in " + path);
  return m;
}

void write_fmx(const FeatureMatrix& m, const std::string& path) {
  std::FILE* raw = std::fopen(path.c_str(), "wb");
  if (!raw) throw std::runtime_error("fmx: cannot write " + path);
  std::unique_ptr<std::FILE, FileCloser> f(raw);

  if (std::fwrite("APFM", 1, 4, raw) != 4)
    throw std::runtime_error("fmx: write failed");
  write_u32(raw, 1);
  write_u32(raw, m.frames);
  write_u32(raw, m.bins);
  std::uint32_t hop_bits;
  std::memcpy(&hop_bits, &m.frame_hop_ms, 4);
  write_u32(raw, hop_bits);
  if (!m.data.empty() &&
      std::fwrite(m.data.data(), 4, m.data.size(), raw) != m.data.size())
    throw std::runtime_error("fmx: write failed");
}

}  // namespace emophon
