// Benchmark comparing the parallel kernels against their serial
// reference implementations.

#include <chrono>
#include <cstdio>
#include <vector>

#include "emophon/dsp.hpp"
#include "emophon/model.hpp"
#include "emophon/rng.hpp"

using namespace emophon;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void bench_fft() {
  Rng rng(7);
  const int n_fft = 512;
  const int reps = 2000;
  std::vector<double> frame(400);
  for (auto& v : frame) v = rng.uniform(-1.0, 1.0);

  auto t0 = Clock::now();
  double sink = 0.0;
  for (int i = 0; i < reps; ++i) sink += fft_power(frame, n_fft)[1];
  const double fast = ms_since(t0);

  t0 = Clock::now();
  for (int i = 0; i < reps / 20; ++i) sink += reference::dft_power(frame, n_fft)[1];
  const double slow = ms_since(t0) * 20.0;

  std::printf("fft_power      %8.1f ms   direct DFT %8.1f ms   speedup %6.1fx   (%d reps, sink %.3g)\n",
              fast, slow, slow / fast, reps, sink);
}

void bench_conv() {
  Rng rng(11);
  ModelConfig mc;
  mc.vocab_size = 8;
  const auto params = ModelParams<float>::init(mc, rng);

  FeatureMatrix feats;
  feats.frames = 512;
  feats.bins = static_cast<std::uint32_t>(mc.n_mels);
  feats.data.resize(feats.frames * feats.bins);
  for (auto& v : feats.data) v = static_cast<float>(rng.normal());

  const int reps = 200;
  ForwardTrace<float> tr;

  auto t0 = Clock::now();
  float sink = 0.0f;
  for (int i = 0; i < reps; ++i) {
    conv_keys(feats, params, tr);
    sink += tr.keys[0][0];
  }
  const double par = ms_since(t0);

  t0 = Clock::now();
  for (int i = 0; i < reps; ++i)
    sink += reference::conv_keys_serial(feats, params)[0][0];
  const double ser = ms_since(t0);

  std::printf("conv_keys      %8.1f ms   serial ref %8.1f ms   speedup %6.1fx   (%d reps, sink %.3g)\n",
              par, ser, ser / par, reps, sink);
}

void bench_log_mel() {
  Rng rng(13);
  std::vector<std::int16_t> samples(16000 * 4);
  for (auto& s : samples)
    s = static_cast<std::int16_t>(rng.uniform(-8000.0, 8000.0));

  const int reps = 20;
  auto t0 = Clock::now();
  float sink = 0.0f;
  for (int i = 0; i < reps; ++i) sink += log_mel(samples).data[0];
  std::printf("log_mel (4 s)  %8.1f ms                                            (%d reps, sink %.3g)\n",
              ms_since(t0), reps, sink);
}

}  // namespace

int main() {
  bench_fft();
  bench_conv();
  bench_log_mel();
  return 0;
}
