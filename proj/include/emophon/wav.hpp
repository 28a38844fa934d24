#ifndef EMOPHON_WAV_HPP
#define EMOPHON_WAV_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace emophon {

// Reads a RIFF WAV file. Only PCM 16-bit mono at 16 kHz is accepted;
// anything else throws (resampling is out of scope).
std::vector<std::int16_t> read_wav_16k_mono(const std::string& path);

// Test helper: writes samples as PCM 16-bit mono 16 kHz.
void write_wav_16k_mono(const std::vector<std::int16_t>& samples,
                        const std::string& path);

}  // namespace emophon

#endif
