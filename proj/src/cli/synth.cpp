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

#include "zvq/cli/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "zvq/cli/manifest.hpp"
#include "zvq/error.hpp"
#include "zvq/eval/abx.hpp"
#include "zvq/features/audio.hpp"
#include "zvq/numerics/init.hpp"

namespace zvq::cli {
namespace {

constexpr double kFormantGain[3] = {1.0, 0.7, 0.4};
constexpr double kCrossfadeMs = 10.0;

std::string padded(std::size_t v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, v);
  return buf;
}

double envelope(const Formants& ph, const SynthVoice& voice, double f) {
  double a = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double x = (f - ph.f[i]) / (0.5 * ph.bandwidth[i]);
    a += kFormantGain[i] / std::sqrt(1.0 + x * x);
  }
  return a * std::pow(10.0, voice.tilt_db_per_octave * std::log2(f / 100.0) / 20.0);
}

void check(const SynthConfig& cfg) {
  if (cfg.n_speakers < 1 || cfg.n_phones < 2 || cfg.utts_per_speaker < 1)
    throw UsageError("synth: need >= 1 speaker, >= 2 phones and >= 1 utterance per speaker");
  if (cfg.min_phones < 1 || cfg.max_phones < cfg.min_phones) throw UsageError("synth: bad phone count range");
  if (cfg.min_phone_ms <= 0.0 || cfg.max_phone_ms < cfg.min_phone_ms) throw UsageError("synth: bad phone duration range");
  if (cfg.sample_rate_hz < 8000) throw UsageError("synth: sample rate below 8 kHz");
  if (cfg.formant_jitter < 0.0 || cfg.formant_jitter >= 0.5 || cfg.pitch_slope < 0.0 || cfg.pitch_slope >= 1.0 ||
      cfg.gain_jitter_db < 0.0)
    throw UsageError("synth: jitter settings out of range");
  if (cfg.test_fraction < 0.0 || cfg.test_fraction >= 1.0) throw UsageError("synth: test_fraction must be in [0, 1)");
}

}  // namespace

std::vector<Formants> synth_phones(const SynthConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x5e1));
  std::uniform_real_distribution<double> f1(250.0, 900.0), f2(900.0, 2500.0), f3(2500.0, 3500.0);
  std::vector<Formants> phones;
  // rejection sampling keeps templates apart in the (F1, F2) plane
  double min_sep = 250.0;
  for (int tries = 0; phones.size() < cfg.n_phones; ++tries) {
    if (tries > 0 && tries % 2000 == 0) min_sep *= 0.8;
    Formants p{{f1(rng), f2(rng), f3(rng)}, {100.0, 140.0, 200.0}};
    const bool far = std::all_of(phones.begin(), phones.end(), [&](const Formants& q) {
      return std::hypot(p.f[0] - q.f[0], 0.5 * (p.f[1] - q.f[1])) >= min_sep;
    });
    if (far) phones.push_back(p);
  }
  return phones;
}

std::vector<SynthVoice> synth_voices(const SynthConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x701ce));
  std::uniform_real_distribution<double> jitter(-5.0, 5.0);
  std::vector<std::size_t> tilt_rank(cfg.n_speakers);
  for (std::size_t s = 0; s < cfg.n_speakers; ++s) tilt_rank[s] = s;
  std::shuffle(tilt_rank.begin(), tilt_rank.end(), rng);
  const double span = cfg.n_speakers > 1 ? static_cast<double>(cfg.n_speakers - 1) : 1.0;
  std::vector<SynthVoice> voices;
  for (std::size_t s = 0; s < cfg.n_speakers; ++s)
    voices.push_back({100.0 + 100.0 * s / span + jitter(rng), -2.0 - 8.0 * tilt_rank[s] / span});
  return voices;
}

SynthSummary make_synth_corpus(const SynthConfig& cfg, const MfccConfig& mfcc, std::uint64_t seed,
                               const std::filesystem::path& out_dir) {
  check(cfg);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wavs", ec);
  if (ec) throw UsageError("cannot create " + (out_dir / "wavs").string() + ": " + ec.message());

  const auto phones = synth_phones(cfg, seed);
  const auto voices = synth_voices(cfg, seed);
  const double sr = cfg.sample_rate_hz;
  const std::size_t win = window_samples(mfcc, cfg.sample_rate_hz), hop = hop_samples(mfcc, cfg.sample_rate_hz);
  const auto n_test = static_cast<std::size_t>(std::floor(cfg.test_fraction * cfg.utts_per_speaker));

  std::vector<ManifestEntry> manifest;
  std::vector<ItemSpec> items;
  for (std::size_t s = 0; s < cfg.n_speakers; ++s) {
    const auto& voice = voices[s];
    for (std::size_t u = 0; u < cfg.utts_per_speaker; ++u) {
      std::mt19937_64 rng(mix_seed(seed, (s << 32) | u));
      const std::string utt = "spk" + std::to_string(s) + "_utt" + padded(u, 3);

      std::uniform_int_distribution<std::size_t> count(cfg.min_phones, cfg.max_phones);
      std::uniform_int_distribution<std::size_t> which(0, cfg.n_phones - 1);
      std::uniform_real_distribution<double> dur(cfg.min_phone_ms, cfg.max_phone_ms);
      std::vector<std::size_t> seq(count(rng)), bounds{0};
      for (auto& p : seq) {
        p = which(rng);
        bounds.push_back(bounds.back() + static_cast<std::size_t>(std::lround(dur(rng) * sr / 1000.0)));
      }
      const std::size_t n = std::max(bounds.back(), win);

      // f0 follows a linear contour over the utterance; phases integrate it
      const double f0 = voice.f0_hz * std::uniform_real_distribution<double>(0.97, 1.03)(rng);
      const double slope = std::uniform_real_distribution<double>(-cfg.pitch_slope, cfg.pitch_slope)(rng);
      auto f0_at = [&](double i) { return f0 * (1.0 + slope * (i / static_cast<double>(n) - 0.5)); };
      const auto n_harm = static_cast<std::size_t>(0.45 * sr / (f0 * (1.0 + 0.5 * std::abs(slope))));
      std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
      std::vector<double> phi(n_harm);
      for (auto& p : phi) p = phase(rng);
      // amp[j * n_harm + k]: harmonic k+1 during phone j, at the phone's mid-point pitch
      std::uniform_real_distribution<double> fj(1.0 - cfg.formant_jitter, 1.0 + cfg.formant_jitter);
      std::uniform_real_distribution<double> gj(-cfg.gain_jitter_db, cfg.gain_jitter_db);
      std::vector<double> amp(seq.size() * n_harm);
      for (std::size_t j = 0; j < seq.size(); ++j) {
        Formants ph = phones[seq[j]];
        for (double& f : ph.f) f *= fj(rng);
        const double gain = std::pow(10.0, gj(rng) / 20.0);
        const double mid_f0 = f0_at(0.5 * static_cast<double>(bounds[j] + bounds[j + 1]));
        for (std::size_t k = 0; k < n_harm; ++k) amp[j * n_harm + k] = gain * envelope(ph, voice, (k + 1) * mid_f0);
      }

      const double xf = kCrossfadeMs * sr / 1000.0;
      std::vector<double> x(n, 0.0);
      double theta = 0.0;
      for (std::size_t i = 0, j = 0; i < n; ++i) {
        while (j + 1 < seq.size() && i >= bounds[j + 1]) ++j;
        const double into = static_cast<double>(i) - static_cast<double>(bounds[j]);
        const double w = (j > 0 && into < xf) ? into / xf : 1.0;
        const double* cur = &amp[j * n_harm];
        const double* prev = j > 0 ? &amp[(j - 1) * n_harm] : cur;
        double v = 0.0;
        for (std::size_t k = 0; k < n_harm; ++k)
          v += (w * cur[k] + (1.0 - w) * prev[k]) * std::sin((k + 1) * theta + phi[k]);
        x[i] = v;
        theta += 2.0 * std::numbers::pi * f0_at(static_cast<double>(i)) / sr;
      }
      double peak = 0.0;
      for (double v : x) peak = std::max(peak, std::abs(v));
      std::uniform_real_distribution<double> noise(-cfg.noise, cfg.noise);
      AudioClip clip;
      clip.sample_rate_hz = cfg.sample_rate_hz;
      clip.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        clip.samples[i] = static_cast<float>(std::clamp(0.5 * x[i] / peak + noise(rng), -1.0, 1.0));

      const auto wav = out_dir / "wavs" / (utt + ".wav");
      write_wav(wav, clip);
      manifest.push_back({utt, wav, "spk" + std::to_string(s),
                          u + n_test >= cfg.utts_per_speaker && n_test > 0 ? Role::test : Role::train_unit});

      // frames whose window centre falls inside the phone
      const auto n_frames = static_cast<long>((n - win) / hop + 1);
      const auto centre = static_cast<double>(win) / 2.0;
      for (std::size_t j = 0; j < seq.size(); ++j) {
        const auto first = [&](std::size_t sample) {
          return std::clamp(static_cast<long>(std::ceil((static_cast<double>(sample) - centre) / hop)), 0L, n_frames);
        };
        const long a = first(bounds[j]), b = first(bounds[j + 1]);
        if (b > a)
          items.push_back({utt, static_cast<std::size_t>(a), static_cast<std::size_t>(b), "ph" + std::to_string(seq[j]),
                           "spk" + std::to_string(s)});
      }
    }
  }
  SynthSummary summary;
  summary.n_wavs = manifest.size();
  summary.n_items = items.size();
  summary.manifest = out_dir / "manifest.tsv";
  summary.item_file = out_dir / "items.txt";
  write_manifest(summary.manifest, manifest);
  write_item_file(summary.item_file, items);
  return summary;
}

}  // namespace zvq::cli
