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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zvq/bottlenecks/normalization.hpp"
#include "zvq/bottlenecks/quantizer.hpp"
#include "zvq/features/features.hpp"
#include "zvq/numerics/adam.hpp"
#include "zvq/numerics/tape.hpp"

namespace zvq {

enum class Variant { in_wae, svq_wae };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct EncoderConfig {
  std::size_t in_dim = 39;
  std::size_t hidden_channels = 256;
  std::size_t n_downsample = 2;  // 1: 50 Hz latent, 2: 25 Hz
  std::size_t latent_dim = 64;
  bool with_in = false;
};

struct SpeakerEncoderConfig {
  std::size_t n_conv = 3;
  std::size_t channels = 256;
  std::size_t speaker_dim = 64;
};

struct DecoderConfig {
  std::size_t out_dim = 39;
  std::size_t n_upsample = 2;
  std::size_t hidden_channels = 256;
  std::size_t speaker_embedding_dim = 64;
  std::size_t n_speakers = 1;
};

struct ModelConfig {
  Variant variant = Variant::svq_wae;
  EncoderConfig encoder;
  SpeakerEncoderConfig speaker;  // IN-WAE only
  DecoderConfig decoder;
  InConfig in;
  std::size_t codebook_size = 128;  // SVQ-WAE only
  std::size_t n_slices = 4;
  float beta = kDefaultBeta;
  std::size_t segment_frames = 32;
  std::size_t batch_size = 10;
  float learning_rate = 4e-4f;
};

/// Config for a variant with the sub-configs kept consistent (with_in follows
/// the variant, n_upsample follows n_downsample).
ModelConfig make_model_config(Variant variant, std::size_t n_speakers, std::size_t hidden = 256,
                              std::size_t latent_dim = 64, std::size_t n_downsample = 2);
/// Throws UsageError on an inconsistent config.
void validate(const ModelConfig& cfg);

inline std::size_t latent_rate_divisor(const ModelConfig& cfg) { return std::size_t{1} << cfg.encoder.n_downsample; }

struct Parameter {
  std::string name;
  Tensor value;
};

struct ModelState {
  ModelConfig config;
  /// Fixed after creation; tensors are bound to tapes by reference.
  std::vector<Parameter> params;
  AdamState adam;
  std::uint64_t seed = 0;
  std::uint64_t step_count = 0;
  bool codebook_initialized = false;
  /// Mean speaker code per training speaker [n_speakers, D_spk] (IN-WAE).
  Tensor speaker_codes;
  std::map<std::string, std::size_t> speaker_map;
  std::optional<CmvnStats> cmvn;

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  bool has_param(const std::string& name) const;
  std::vector<Tensor*> param_pointers();
};

ModelState create_model(const ModelConfig& cfg, std::uint64_t seed);

/// Parameters of a ModelState bound on one tape. Trainable binding
/// accumulates gradients into the state; frozen binding copies values.
class BoundParams {
 public:
  BoundParams(Tape& tape, ModelState& state);
  BoundParams(Tape& tape, const ModelState& state);

  Var operator()(const std::string& name);
  Tape& tape() const { return tape_; }
  const ModelConfig& config() const { return state_.config; }

 private:
  Tape& tape_;
  const ModelState& state_;
  ModelState* mutable_state_ = nullptr;
  std::map<std::string, Var> bound_;
};

/// x [B, in_dim, T] -> [B, D, T / 2^n_downsample]. When taps is set, the
/// activation after each of the ten layers (and its IN, if any) is appended.
Var content_encode(BoundParams& p, Var x, std::vector<Var>* taps = nullptr);
/// y [B, in_dim, T] -> [B, D_spk].
Var speaker_encode(BoundParams& p, Var y);
/// z [B, D, T_latent] -> [B, out_dim, T_latent * 2^n_upsample]. z_s is the
/// speaker code for the AdaIN stage (IN-WAE only).
Var decode(BoundParams& p, Var z, std::span<const std::size_t> speaker_ids, std::optional<Var> z_s = {});

struct ForwardResult {
  Var z_c;    // encoder output (IN-WAE: after the last IN; SVQ-WAE: z_e)
  Var latent; // decoder input: z_c (IN-WAE) or straight-through z_q
  Var x_hat;
  Var recon_loss;
  std::optional<Var> vq_loss;
  std::vector<std::uint32_t> indices;  // SVQ: [B*T_latent x N], row b*T_latent + t
};

/// Full autoencoder pass over x [B, in_dim, 32] with source speaker ids.
ForwardResult forward(BoundParams& p, Var x, std::span<const std::size_t> speaker_ids);

struct StepLosses {
  double recon_loss = 0.0;
  double vq_loss = 0.0;
  double total = 0.0;
  std::vector<std::uint32_t> indices;
};

/// One Adam update on a batch [B, in_dim, 32]. The first SVQ step seeds the
/// codebooks from the batch's encoder outputs. Throws NumericalError on a
/// non-finite loss, leaving the state untouched.
StepLosses train_step(ModelState& state, const Tensor& batch, std::span<const std::size_t> speaker_ids);

/// Fixed-length training segments with their speaker ids.
struct SegmentCorpus {
  std::vector<Tensor> segments;  // each [1, in_dim, len]
  std::vector<std::size_t> speakers;
};

SegmentCorpus make_segment_corpus(std::span<const FeatureSequence> feats, std::span<const std::size_t> speakers,
                                  std::size_t len_frames);

/// Batch for a given step, drawn with replacement from a generator seeded by
/// (seed, step) so that resuming needs nothing beyond the step count.
Tensor sample_batch(const SegmentCorpus& corpus, std::uint64_t seed, std::uint64_t step, std::size_t batch_size,
                    std::vector<std::size_t>& speaker_ids);

using StepCallback = std::function<void(std::uint64_t step, const StepLosses&)>;

/// Runs train_step until state.step_count reaches target_step.
void train(ModelState& state, const SegmentCorpus& corpus, std::uint64_t target_step,
           const StepCallback& on_step = {});

/// Mean speaker code of each speaker's segments (IN-WAE); stored in the state.
void compute_speaker_codes(ModelState& state, const SegmentCorpus& corpus);

/// Content representation of one utterance. Full segments are encoded as is;
/// a shorter tail is reflect-padded to a full segment and its latent frames
/// trimmed to ceil(tail / 2^n_downsample).
struct Encoding {
  FeatureSequence latents;  // [T_latent x D]: z_c (IN-WAE) or z_q (SVQ-WAE)
  std::optional<CodeSequence> codes;
};

Encoding encode_utterance(const ModelState& state, const FeatureSequence& feat);

/// Decodes the content of feat with the target speaker; output has the
/// input's frame count at the input frame rate.
FeatureSequence convert(const ModelState& state, const FeatureSequence& feat, std::size_t target_speaker);
/// convert() to the utterance's own speaker.
FeatureSequence reconstruct(const ModelState& state, const FeatureSequence& feat, std::size_t source_speaker);

/// Binary checkpoint "ZVQM"; see save_checkpoint in the source for the layout.
void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

void save_speaker_map(const std::filesystem::path& path, const std::map<std::string, std::size_t>& map);
std::map<std::string, std::size_t> load_speaker_map(const std::filesystem::path& path);

}  // namespace zvq
