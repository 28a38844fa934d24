#include "emophon/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace emophon {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT over interleaved complex (re, im).
void fft_inplace(std::vector<double>& re, std::vector<double>& im) {
  const std::size_t n = re.size();
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (std::size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (std::size_t k = 0; k < len / 2; ++k) {
        const double ur = re[i + k], ui = im[i + k];
        const double vr = re[i + k + len / 2] * cr - im[i + k + len / 2] * ci;
        const double vi = re[i + k + len / 2] * ci + im[i + k + len / 2] * cr;
        re[i + k] = ur + vr;
        im[i + k] = ui + vi;
        re[i + k + len / 2] = ur - vr;
        im[i + k + len / 2] = ui - vi;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

}  // namespace

std::vector<double> fft_power(const std::vector<double>& frame, int n_fft) {
  if (!is_pow2(n_fft))
    throw std::runtime_error("fft_power: n_fft must be a power of two");
  if (static_cast<int>(frame.size()) > n_fft)
    throw std::runtime_error("fft_power: frame longer than n_fft");

  std::vector<double> re(static_cast<std::size_t>(n_fft), 0.0);
  std::vector<double> im(static_cast<std::size_t>(n_fft), 0.0);
  std::copy(frame.begin(), frame.end(), re.begin());
  fft_inplace(re, im);

  std::vector<double> power(static_cast<std::size_t>(n_fft / 2 + 1));
  for (int k = 0; k <= n_fft / 2; ++k)
    power[k] = re[k] * re[k] + im[k] * im[k];
  return power;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::vector<double>> mel_filterbank(int n_fft, int n_mels, int sr_hz) {
  if (n_mels < 2) throw std::runtime_error("mel_filterbank: n_mels must be >= 2");
  const int n_bins = n_fft / 2 + 1;
  const double mel_max = hz_to_mel(sr_hz / 2.0);

  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    edges[i] = mel_to_hz(mel_max * i / (n_mels + 1));

  std::vector<std::vector<double>> fb(
      static_cast<std::size_t>(n_mels),
      std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    bool any = false;
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sr_hz / n_fft;
      double w = 0.0;
      if (f > lo && f < mid)
        w = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi)
        w = (hi - f) / (hi - mid);
      if (w > 0.0) {
        fb[m][k] = w;
        any = true;
      }
    }
    if (!any)
      throw std::runtime_error(
          "mel_filterbank: filter " + std::to_string(m) +
          " has empty support; n_mels too large for FFT resolution");
  }
  return fb;
}

int log_mel_frame_count(std::size_t n_samples, const DspConfig& config) {
  if (n_samples < static_cast<std::size_t>(config.frame_len)) return 0;
  return 1 + static_cast<int>((n_samples - config.frame_len) / config.frame_hop);
}

FeatureMatrix log_mel(const std::vector<std::int16_t>& samples,
                      const DspConfig& config) {
  const int T = log_mel_frame_count(samples.size(), config);
  if (T <= 0)
    throw std::runtime_error("log_mel: audio too short (need at least " +
                             std::to_string(config.frame_len) + " samples)");

  // pre-emphasis over the whole signal
  std::vector<double> x(samples.size());
  x[0] = static_cast<double>(samples[0]);
  for (std::size_t i = 1; i < samples.size(); ++i)
    x[i] = static_cast<double>(samples[i]) -
           config.preemphasis * static_cast<double>(samples[i - 1]);

  std::vector<double> hann(static_cast<std::size_t>(config.frame_len));
  for (int i = 0; i < config.frame_len; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (config.frame_len - 1));

  const auto fb = mel_filterbank(config.n_fft, config.n_mels, config.sample_rate_hz);
  const int M = config.n_mels;

  FeatureMatrix out;
  out.frames = static_cast<std::uint32_t>(T);
  out.bins = static_cast<std::uint32_t>(M);
  out.frame_hop_ms =
      1000.0f * config.frame_hop / static_cast<float>(config.sample_rate_hz);
  out.data.resize(static_cast<std::size_t>(T) * M);

  // frames are independent
#pragma omp parallel for schedule(static)
  for (int t = 0; t < T; ++t) {
    std::vector<double> frame(static_cast<std::size_t>(config.frame_len));
    const std::size_t off = static_cast<std::size_t>(t) * config.frame_hop;
    for (int i = 0; i < config.frame_len; ++i) frame[i] = x[off + i] * hann[i];
    const auto power = fft_power(frame, config.n_fft);
    for (int m = 0; m < M; ++m) {
      double acc = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) acc += fb[m][k] * power[k];
      out.data[static_cast<std::size_t>(t) * M + m] =
          static_cast<float>(std::log(std::max(acc, config.log_floor)));
    }
  }

  // per-bin mean/variance normalization; constant bins become zero
  for (int m = 0; m < M; ++m) {
    double mean = 0.0;
    for (int t = 0; t < T; ++t) mean += out.at(t, m);
    mean /= T;
    double var = 0.0;
    for (int t = 0; t < T; ++t) {
      const double d = out.at(t, m) - mean;
      var += d * d;
    }
    var /= T;
    if (var < 1e-12) {
      for (int t = 0; t < T; ++t) out.at(t, m) = 0.0f;
    } else {
      const double inv_std = 1.0 / std::sqrt(var);
      for (int t = 0; t < T; ++t)
        out.at(t, m) = static_cast<float>((out.at(t, m) - mean) * inv_std);
    }
  }

  return out;
}

namespace reference {

std::vector<double> dft_power(const std::vector<double>& frame, int n_fft) {
  std::vector<double> power(static_cast<std::size_t>(n_fft / 2 + 1));
  for (int k = 0; k <= n_fft / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < frame.size(); ++n) {
      const double ang = -2.0 * kPi * k * static_cast<double>(n) / n_fft;
      re += frame[n] * std::cos(ang);
      im += frame[n] * std::sin(ang);
    }
    power[k] = re * re + im * im;
  }
  return power;
}

}  // namespace reference

}  // namespace emophon
