// Copyright 2026 The zvq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "zvq/error.hpp"
#include "zvq/features/features.hpp"

namespace zvq {
namespace {

// fftw planning is not thread-safe; execution on a shared plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// [n_mels x n_bins] triangular weights, HTK mel scale from 0 Hz to Nyquist.
std::vector<double> mel_filterbank(std::size_t n_mels, std::size_t nfft, int rate) {
  const std::size_t n_bins = nfft / 2 + 1;
  const double mel_hi = hz_to_mel(rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  std::vector<double> fb(n_mels * n_bins, 0.0);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(nfft);
      double w = 0.0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      fb[m * n_bins + k] = w;
    }
  }
  return fb;
}

}  // namespace

std::size_t window_samples(const MfccConfig& cfg, int sample_rate_hz) {
  return static_cast<std::size_t>(std::lround(cfg.win_ms * sample_rate_hz / 1000.0));
}

std::size_t hop_samples(const MfccConfig& cfg, int sample_rate_hz) {
  return static_cast<std::size_t>(std::lround(cfg.hop_ms * sample_rate_hz / 1000.0));
}

FeatureSequence mfcc(const AudioClip& clip, const MfccConfig& cfg) {
  if (clip.sample_rate_hz <= 0) throw DataError("sample rate must be positive");
  const std::size_t win = window_samples(cfg, clip.sample_rate_hz);
  const std::size_t hop = hop_samples(cfg, clip.sample_rate_hz);
  if (win == 0 || hop == 0) throw UsageError("window and hop must be at least one sample");
  if (cfg.n_ceps == 0 || cfg.n_ceps > cfg.n_mels) throw UsageError("n_ceps must be in [1, n_mels]");
  if (clip.samples.size() < win)
    throw DataError("clip has " + std::to_string(clip.samples.size()) + " samples, shorter than one window (" +
                    std::to_string(win) + ")");

  const std::size_t n = clip.samples.size();
  std::vector<double> emph(n);
  emph[0] = clip.samples[0];
  for (std::size_t i = 1; i < n; ++i)
    emph[i] = static_cast<double>(clip.samples[i]) - cfg.preemphasis * static_cast<double>(clip.samples[i - 1]);

  const std::size_t nfft = next_pow2(win);
  const std::size_t n_bins = nfft / 2 + 1;
  const auto fb = mel_filterbank(cfg.n_mels, nfft, clip.sample_rate_hz);

  std::vector<double> hamming(win);
  for (std::size_t i = 0; i < win; ++i)
    hamming[i] = win == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / static_cast<double>(win - 1));

  // Orthonormal DCT-II rows.
  const std::size_t M = cfg.n_mels;
  std::vector<double> dct(cfg.n_ceps * M);
  for (std::size_t k = 0; k < cfg.n_ceps; ++k) {
    const double norm = k == 0 ? std::sqrt(1.0 / M) : std::sqrt(2.0 / M);
    for (std::size_t m = 0; m < M; ++m)
      dct[k * M + m] = norm * std::cos(std::numbers::pi * k * (m + 0.5) / static_cast<double>(M));
  }

  float* buf = fftwf_alloc_real(nfft);
  fftwf_complex* spec = fftwf_alloc_complex(n_bins);
  fftwf_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftwf_plan_dft_r2c_1d(static_cast<int>(nfft), buf, spec, FFTW_ESTIMATE);
  }

  FeatureSequence out;
  out.num_frames = (n - win) / hop + 1;
  out.dim = cfg.n_ceps;
  out.frame_rate_hz = static_cast<float>(1000.0 / cfg.hop_ms);
  out.frames.resize(out.num_frames * out.dim);

  std::vector<double> power(n_bins), logmel(M);
  for (std::size_t t = 0; t < out.num_frames; ++t) {
    const std::size_t start = t * hop;
    for (std::size_t i = 0; i < win; ++i) buf[i] = static_cast<float>(emph[start + i] * hamming[i]);
    std::fill(buf + win, buf + nfft, 0.0f);
    fftwf_execute(plan);
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double re = spec[k][0], im = spec[k][1];
      power[k] = re * re + im * im;
    }
    for (std::size_t m = 0; m < M; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) e += fb[m * n_bins + k] * power[k];
      logmel[m] = std::log(std::max(e, static_cast<double>(cfg.log_floor)));
    }
    for (std::size_t k = 0; k < cfg.n_ceps; ++k) {
      double c = 0.0;
      for (std::size_t m = 0; m < M; ++m) c += dct[k * M + m] * logmel[m];
      out.at(t, k) = static_cast<float>(c);
    }
  }

  {
    std::lock_guard lock(planner_mutex());
    fftwf_destroy_plan(plan);
  }
  fftwf_free(spec);
  fftwf_free(buf);
  return out;
}

FeatureSequence add_deltas(const FeatureSequence& feat, std::size_t window) {
  if (window == 0) throw UsageError("delta window must be at least 1");
  const std::size_t T = feat.num_frames, D = feat.dim;
  if (T == 0) throw DataError("cannot compute deltas of an empty sequence");
  double denom = 0.0;
  for (std::size_t k = 1; k <= window; ++k) denom += static_cast<double>(k * k);
  denom *= 2.0;

  auto delta = [&](const std::vector<float>& src) {
    std::vector<float> dst(T * D);
    const auto clamp_t = [&](std::ptrdiff_t t) {
      return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(t, 0, static_cast<std::ptrdiff_t>(T) - 1));
    };
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < D; ++d) {
        double acc = 0.0;
        for (std::size_t k = 1; k <= window; ++k) {
          const auto kk = static_cast<std::ptrdiff_t>(k);
          const auto ti = static_cast<std::ptrdiff_t>(t);
          acc += static_cast<double>(k) *
                 (static_cast<double>(src[clamp_t(ti + kk) * D + d]) - static_cast<double>(src[clamp_t(ti - kk) * D + d]));
        }
        dst[t * D + d] = static_cast<float>(acc / denom);
      }
    }
    return dst;
  };

  const auto d1 = delta(feat.frames);
  const auto d2 = delta(d1);

  FeatureSequence out;
  out.num_frames = T;
  out.dim = 3 * D;
  out.frame_rate_hz = feat.frame_rate_hz;
  out.utterance_id = feat.utterance_id;
  out.frames.resize(T * out.dim);
  for (std::size_t t = 0; t < T; ++t) {
    float* row = out.frames.data() + t * out.dim;
    std::copy_n(feat.frames.data() + t * D, D, row);
    std::copy_n(d1.data() + t * D, D, row + D);
    std::copy_n(d2.data() + t * D, D, row + 2 * D);
  }
  return out;
}

}  // namespace zvq
