#ifndef EMOPHON_DSP_HPP
#define EMOPHON_DSP_HPP

#include <cstdint>
#include <vector>

#include "emophon/fmx.hpp"

namespace emophon {

struct DspConfig {
  int sample_rate_hz = 16000;
  int frame_len = 400;   // 25 ms
  int frame_hop = 160;   // 10 ms
  int n_fft = 512;
  int n_mels = 40;
  double preemphasis = 0.97;
  double log_floor = 1e-10;
};

// |DFT_k|^2 for k = 0..n_fft/2, radix-2 iterative FFT. The frame is
// zero-padded to n_fft; n_fft must be a power of two >= frame size.
std::vector<double> fft_power(const std::vector<double>& frame, int n_fft);

// mel(f) = 2595 * log10(1 + f/700)
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x (n_fft/2 + 1) triangular filters, peak 1, spanning 0..sr/2.
// Throws if any filter has empty support.
std::vector<std::vector<double>> mel_filterbank(int n_fft, int n_mels, int sr_hz);

// Full pipeline: pre-emphasis, Hann window, FFT power, mel, natural
// log with floor, per-utterance per-bin mean/variance normalization.
// T = 1 + floor((L - frame_len) / frame_hop).
FeatureMatrix log_mel(const std::vector<std::int16_t>& samples,
                      const DspConfig& config = {});

int log_mel_frame_count(std::size_t n_samples, const DspConfig& config = {});

// Serial reference kernels used by the tests and the benchmark; these
// never run in the main path.
namespace reference {

// Direct O(n^2) DFT power spectrum.
std::vector<double> dft_power(const std::vector<double>& frame, int n_fft);

}  // namespace reference

}  // namespace emophon

#endif
