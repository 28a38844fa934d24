#ifndef EMOPHON_FMX_HPP
#define EMOPHON_FMX_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace emophon {

// T x M grid of 32-bit floats, row-major (frame-major).
struct FeatureMatrix {
  std::uint32_t frames = 0;  // T
  std::uint32_t bins = 0;    // M
  float frame_hop_ms = 10.0f;
  std::vector<float> data;   // frames * bins

  float& at(std::uint32_t t, std::uint32_t m) { return data[t * bins + m]; }
  float at(std::uint32_t t, std::uint32_t m) const { return data[t * bins + m]; }
  const float* row(std::uint32_t t) const { return data.data() + t * bins; }
};

// .fmx binary format: "APFM", u32 version=1, u32 T, u32 M,
// f32 frame_hop_ms, then T*M floats row-major, little-endian.
FeatureMatrix read_fmx(const std::string& path);
void write_fmx(const FeatureMatrix& m, const std::string& path);

}  // namespace emophon

#endif
