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

#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "test_util.hpp"
#include "zvq/error.hpp"
#include "zvq/features/audio.hpp"
#include "zvq/features/features.hpp"

using namespace zvq;
using zvq::testing::ScratchDir;

namespace {

AudioClip noise_clip(std::size_t n, float amplitude, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-amplitude, amplitude);
  AudioClip c;
  c.samples.resize(n);
  for (auto& s : c.samples) s = u(rng);
  return c;
}

FeatureSequence make_seq(std::size_t T, std::size_t D, std::vector<float> data, std::string id = "u") {
  FeatureSequence f;
  f.num_frames = T;
  f.dim = D;
  f.frames = std::move(data);
  f.utterance_id = std::move(id);
  return f;
}

void write_raw_wav(const std::filesystem::path& p, std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                   const std::vector<std::int16_t>& samples) {
  std::ofstream out(p, std::ios::binary);
  auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
  const std::uint32_t bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  u32(36 + bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(format);
  u16(channels);
  u32(16000);
  u32(16000 * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  out.write("data", 4);
  u32(bytes);
  out.write(reinterpret_cast<const char*>(samples.data()), bytes);
}

}  // namespace

TEST_CASE("read_wav scaling and header checks") {
  ScratchDir dir;
  write_raw_wav(dir / "a.wav", 1, 1, 16, {0, 16384, -32768, 0});
  const auto clip = read_wav(dir / "a.wav");
  CHECK(clip.sample_rate_hz == 16000);
  REQUIRE(clip.samples.size() == 4);
  CHECK(clip.samples[1] == 0.5f);
  CHECK(clip.samples[2] == -1.0f);

  write_raw_wav(dir / "zeros.wav", 1, 1, 16, std::vector<std::int16_t>(16000, 0));
  const auto z = read_wav(dir / "zeros.wav");
  CHECK(z.samples.size() == 16000);
  CHECK(z.duration_s() == doctest::Approx(1.0));
  for (float s : z.samples) CHECK(s == 0.0f);

  write_raw_wav(dir / "stereo.wav", 1, 2, 16, {1, 2, 3, 4});
  CHECK_THROWS_AS(read_wav(dir / "stereo.wav"), DataError);
  write_raw_wav(dir / "float.wav", 3, 1, 16, {1, 2});
  CHECK_THROWS_AS(read_wav(dir / "float.wav"), DataError);
  std::ofstream(dir / "junk.wav") << "not a wav";
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), DataError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), DataError);
}

TEST_CASE("write_wav round trip") {
  ScratchDir dir;
  AudioClip c;
  c.samples = {0.0f, 0.5f, -0.5f, 1.5f, -2.0f};
  write_wav(dir / "r.wav", c);
  const auto back = read_wav(dir / "r.wav");
  REQUIRE(back.samples.size() == 5);
  CHECK(back.samples[1] == 0.5f);
  CHECK(back.samples[2] == -0.5f);
  CHECK(back.samples[3] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[4] == -1.0f);
}

TEST_CASE("mfcc frame count") {
  const auto f = mfcc(noise_clip(16000, 0.3f, 1));
  CHECK(f.num_frames == 98);
  CHECK(f.dim == 13);
  CHECK(f.frame_rate_hz == 100.0f);

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> len(400, 48000);
  for (int i = 0; i < 25; ++i) {
    const std::size_t n = len(rng);
    CHECK(mfcc(noise_clip(n, 0.3f, i)).num_frames == (n - 400) / 160 + 1);
  }
  CHECK(mfcc(noise_clip(400, 0.3f, 2)).num_frames == 1);
  CHECK_THROWS_AS(mfcc(noise_clip(399, 0.3f, 2)), DataError);
}

TEST_CASE("mfcc of silence is stationary") {
  AudioClip silence;
  silence.samples.assign(8000, 0.0f);
  const auto f = mfcc(silence);
  for (std::size_t t = 1; t < f.num_frames; ++t)
    for (std::size_t d = 0; d < f.dim; ++d) CHECK(f.at(t, d) == f.at(0, d));
}

TEST_CASE("mfcc gain changes only c0") {
  // Doubling amplitude multiplies every mel energy by 4, so every log-mel
  // shifts by ln 4 and the orthonormal DCT moves only c0, by sqrt(40) ln 4.
  const auto a = noise_clip(8000, 0.2f, 3);
  AudioClip b = a;
  for (auto& s : b.samples) s *= 2.0f;
  const auto fa = mfcc(a), fb = mfcc(b);
  const double expected = std::sqrt(40.0) * std::log(4.0);
  for (std::size_t t = 0; t < fa.num_frames; ++t) {
    CHECK(fb.at(t, 0) - fa.at(t, 0) == doctest::Approx(expected).epsilon(1e-4));
    for (std::size_t d = 1; d < fa.dim; ++d) CHECK(std::abs(fb.at(t, d) - fa.at(t, d)) < 2e-4);
  }
}

TEST_CASE("mfcc is sample-rate agnostic in ms") {
  AudioClip c = noise_clip(8000, 0.3f, 4);
  c.sample_rate_hz = 8000;
  const auto f = mfcc(c);
  CHECK(f.num_frames == (8000 - 200) / 80 + 1);
  CHECK(f.frame_rate_hz == 100.0f);
}

TEST_CASE("add_deltas") {
  SUBCASE("constant input gives exact zeros") {
    const auto f = add_deltas(make_seq(6, 13, std::vector<float>(78, 3.25f)));
    CHECK(f.dim == 39);
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t d = 0; d < 13; ++d) CHECK(f.at(t, d) == 3.25f);
      for (std::size_t d = 13; d < 39; ++d) CHECK(f.at(t, d) == 0.0f);
    }
  }
  SUBCASE("ramp has unit slope in the interior") {
    const std::size_t T = 12;
    std::vector<float> data(T);
    for (std::size_t t = 0; t < T; ++t) data[t] = static_cast<float>(t);
    const auto f = add_deltas(make_seq(T, 1, data));
    REQUIRE(f.dim == 3);
    for (std::size_t t = 2; t + 2 < T; ++t) CHECK(f.at(t, 1) == doctest::Approx(1.0));
    for (std::size_t t = 4; t + 4 < T; ++t) CHECK(f.at(t, 2) == doctest::Approx(0.0));
    // replicated edge: (1*(1-0) + 2*(2-0)) / 10
    CHECK(f.at(0, 1) == doctest::Approx(0.5));
  }
}

TEST_CASE("cmvn statistics") {
  SUBCASE("two-point example") {
    const auto f = make_seq(2, 1, {0.0f, 2.0f});
    const auto s = compute_cmvn(std::span(&f, 1));
    CHECK(s.mean[0] == 1.0f);
    CHECK(s.std[0] == 1.0f);
    CHECK(s.frame_count == 2);
  }
  SUBCASE("identical frames floor the std") {
    const auto f = make_seq(4, 2, std::vector<float>(8, 5.0f));
    const auto s = compute_cmvn(std::span(&f, 1));
    CHECK(s.std[0] == kCmvnStdFloor);
    CHECK(s.std[1] == kCmvnStdFloor);
  }
  SUBCASE("empty corpus rejected") {
    CHECK_THROWS_AS(compute_cmvn(std::span<const FeatureSequence>{}), DataError);
  }
  SUBCASE("renormalized corpus, order independence, round trip") {
    std::mt19937_64 rng(11);
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::vector<FeatureSequence> corpus;
    for (int u = 0; u < 5; ++u) {
      std::vector<float> data(50 * 39);
      for (std::size_t i = 0; i < data.size(); ++i) data[i] = 3.0f * g(rng) + static_cast<float>(i % 39) - 10.0f;
      corpus.push_back(make_seq(50, 39, data, "u" + std::to_string(u)));
    }
    const auto stats = compute_cmvn(corpus);
    std::vector<FeatureSequence> reversed(corpus.rbegin(), corpus.rend());
    const auto stats_rev = compute_cmvn(reversed);
    for (std::size_t d = 0; d < 39; ++d) {
      CHECK(stats.mean[d] == doctest::Approx(stats_rev.mean[d]).epsilon(1e-6));
      CHECK(stats.std[d] == doctest::Approx(stats_rev.std[d]).epsilon(1e-6));
    }
    std::vector<FeatureSequence> normed;
    for (const auto& f : corpus) normed.push_back(apply_cmvn(f, stats));
    const auto re = compute_cmvn(normed);
    for (std::size_t d = 0; d < 39; ++d) {
      CHECK(std::abs(re.mean[d]) < 1e-5);
      CHECK(std::abs(re.std[d] - 1.0f) < 1e-5);
    }
    for (std::size_t u = 0; u < corpus.size(); ++u) {
      const auto back = invert_cmvn(normed[u], stats);
      for (std::size_t i = 0; i < back.frames.size(); ++i)
        CHECK(std::abs(back.frames[i] - corpus[u].frames[i]) < 1e-5f * std::max(1.0f, std::abs(corpus[u].frames[i])));
    }
  }
  SUBCASE("identity stats and dimension mismatch") {
    const auto f = make_seq(2, 2, {1.5f, -2.0f, 0.25f, 7.0f});
    CmvnStats id{{0.0f, 0.0f}, {1.0f, 1.0f}, 2};
    CHECK(apply_cmvn(f, id).frames == f.frames);
    CmvnStats bad{{0.0f}, {1.0f}, 2};
    CHECK_THROWS_AS(apply_cmvn(f, bad), DataError);
  }
}

TEST_CASE("cmvn json round trip") {
  ScratchDir dir;
  CmvnStats s{{0.5f, -1.25f}, {2.0f, 0.125f}, 17};
  save_cmvn(dir / "cmvn.json", s);
  const auto back = load_cmvn(dir / "cmvn.json");
  CHECK(back.mean == s.mean);
  CHECK(back.std == s.std);
  CHECK(back.frame_count == 17);
  std::ofstream(dir / "bad.json") << "{\"mean\": [1]}";
  CHECK_THROWS_AS(load_cmvn(dir / "bad.json"), DataError);
}

TEST_CASE("segment counts") {
  auto seq = [](std::size_t T) {
    std::vector<float> d(T * 39);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(i);
    return make_seq(T, 39, d);
  };
  const auto s98 = segment(seq(98));
  CHECK(s98.segments.size() == 3);
  CHECK(s98.dropped_frames == 2);
  CHECK_FALSE(s98.warning);

  const auto f32 = seq(32);
  const auto s32 = segment(f32);
  REQUIRE(s32.segments.size() == 1);
  CHECK(s32.segments[0].shape() == Shape{1, 39, 32});
  for (std::size_t t = 0; t < 32; ++t)
    for (std::size_t d = 0; d < 39; ++d) CHECK(s32.segments[0][d * 32 + t] == f32.at(t, d));

  const auto s31 = segment(seq(31));
  CHECK(s31.segments.empty());
  CHECK(s31.warning);

  // overlapping hop
  CHECK(segment(seq(64), 32, 16).segments.size() == 3);
  CHECK(segment(seq(70), 32, 16).dropped_frames == 6);
}

TEST_CASE("feature file round trip") {
  ScratchDir dir;
  auto f = make_seq(3, 2, {1.0f, -2.0f, 0.5f, 1e-20f, 3.0f, -0.0f}, "ignored");
  f.frame_rate_hz = 25.0f;
  write_features(dir / "utt_7.zvqf", f);
  const auto back = read_features(dir / "utt_7.zvqf");
  CHECK(back.utterance_id == "utt_7");
  CHECK(back.num_frames == 3);
  CHECK(back.dim == 2);
  CHECK(back.frame_rate_hz == 25.0f);
  CHECK(back.frames == f.frames);

  std::ifstream in(dir / "utt_7.zvqf", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(bytes.size() == 4 + 4 * 4 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "ZVQF");

  std::ofstream(dir / "bad.zvqf") << "ZVQX1234";
  CHECK_THROWS_AS(read_features(dir / "bad.zvqf"), DataError);
  std::ofstream(dir / "short.zvqf", std::ios::binary).write(bytes.data(), 20);
  CHECK_THROWS_AS(read_features(dir / "short.zvqf"), DataError);
}
