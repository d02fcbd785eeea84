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

#include "zvq/models/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "zvq/error.hpp"
#include "zvq/numerics/init.hpp"
#include "zvq/numerics/ops.hpp"

namespace zvq {

std::string to_string(Variant v) { return v == Variant::in_wae ? "in-wae" : "svq-wae"; }

Variant parse_variant(const std::string& s) {
  if (s == "in-wae" || s == "in_wae" || s == "in") return Variant::in_wae;
  if (s == "svq-wae" || s == "svq_wae" || s == "svq") return Variant::svq_wae;
  throw UsageError("unknown variant '" + s + "' (expected in-wae or svq-wae)");
}

ModelConfig make_model_config(Variant variant, std::size_t n_speakers, std::size_t hidden, std::size_t latent_dim,
                              std::size_t n_downsample) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.encoder.hidden_channels = hidden;
  cfg.encoder.latent_dim = latent_dim;
  cfg.encoder.n_downsample = n_downsample;
  cfg.encoder.with_in = variant == Variant::in_wae;
  cfg.speaker.channels = hidden;
  cfg.decoder.hidden_channels = hidden;
  cfg.decoder.n_upsample = n_downsample;
  cfg.decoder.n_speakers = n_speakers;
  cfg.decoder.out_dim = cfg.encoder.in_dim;
  return cfg;
}

void validate(const ModelConfig& cfg) {
  auto fail = [](const std::string& m) { throw UsageError("model config: " + m); };
  const auto& e = cfg.encoder;
  if (e.n_downsample < 1 || e.n_downsample > 2) fail("n_downsample must be 1 or 2");
  if (cfg.decoder.n_upsample != e.n_downsample) fail("decoder n_upsample must equal encoder n_downsample");
  if (e.in_dim == 0 || e.hidden_channels == 0 || e.latent_dim == 0) fail("encoder widths must be positive");
  if (cfg.decoder.out_dim != e.in_dim) fail("decoder out_dim must equal encoder in_dim");
  if (cfg.decoder.hidden_channels == 0 || cfg.decoder.speaker_embedding_dim == 0) fail("decoder widths must be positive");
  if (cfg.decoder.n_speakers == 0) fail("n_speakers must be positive");
  if (e.with_in != (cfg.variant == Variant::in_wae)) fail("with_in must match the variant");
  if (cfg.variant == Variant::in_wae) {
    if (cfg.speaker.n_conv < 1 || cfg.speaker.channels == 0 || cfg.speaker.speaker_dim == 0)
      fail("speaker encoder needs at least one conv and positive widths");
  } else {
    if (cfg.codebook_size == 0) fail("codebook_size must be positive");
    if (cfg.n_slices == 0 || e.latent_dim % cfg.n_slices != 0) fail("latent_dim must be divisible by n_slices");
    if (!(cfg.beta >= 0.0f)) fail("beta must be >= 0");
  }
  if (cfg.segment_frames == 0 || cfg.segment_frames % latent_rate_divisor(cfg) != 0)
    fail("segment_frames must be a positive multiple of 2^n_downsample");
  if (cfg.batch_size == 0) fail("batch_size must be positive");
  if (!(cfg.learning_rate > 0.0f)) fail("learning_rate must be positive");
  if (!(cfg.in.epsilon > 0.0f)) fail("IN epsilon must be positive");
}

// ---------------------------------------------------------------------------
// Parameters

Tensor& ModelState::param(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).param(name));
}

const Tensor& ModelState::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw UsageError("model has no parameter '" + name + "'");
}

bool ModelState::has_param(const std::string& name) const {
  return std::any_of(params.begin(), params.end(), [&](const Parameter& p) { return p.name == name; });
}

std::vector<Tensor*> ModelState::param_pointers() {
  std::vector<Tensor*> out;
  for (auto& p : params) out.push_back(&p.value);
  return out;
}

namespace {

// Layer plan of the content encoder: (kernel, stride, in, out) per conv.
struct ConvSpec {
  std::size_t kernel, stride, in, out;
};

std::vector<ConvSpec> encoder_plan(const EncoderConfig& e) {
  const std::size_t H = e.hidden_channels, D = e.latent_dim;
  std::vector<ConvSpec> plan = {{3, 1, e.in_dim, H}, {3, 1, H, H}};
  for (std::size_t i = 0; i < 2; ++i) plan.push_back(i < e.n_downsample ? ConvSpec{4, 2, H, H} : ConvSpec{3, 1, H, H});
  plan.push_back({3, 1, H, H});
  plan.push_back({3, 1, H, D});
  for (int r = 0; r < 4; ++r) plan.push_back({3, 1, D, D});
  return plan;
}

std::string layer_name(const char* prefix, std::size_t i) { return std::string(prefix) + std::to_string(i); }

}  // namespace

ModelState create_model(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  ModelState state;
  state.config = cfg;
  state.seed = seed;
  std::mt19937_64 rng(mix_seed(seed, 0x1a17));
  // relu-followed layers use He-uniform so activations keep their scale
  // through the stack; the rest keep the fan-in default
  auto add_conv = [&](const std::string& name, std::size_t out, std::size_t in, std::size_t k, bool relu = true) {
    Tensor w({out, in, k});
    if (relu)
      init_uniform(w, std::sqrt(6.0f / static_cast<float>(in * k)), rng);
    else
      init_uniform_fan_in(w, in * k, rng);
    state.params.push_back({name + ".w", std::move(w)});
    state.params.push_back({name + ".b", Tensor({out})});
  };
  auto add_tconv = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k) {
    Tensor w({in, out, k});
    // each output sees in * k / stride inputs
    init_uniform(w, std::sqrt(6.0f / static_cast<float>(in * k / 2)), rng);
    state.params.push_back({name + ".w", std::move(w)});
    state.params.push_back({name + ".b", Tensor({out})});
  };

  const auto plan = encoder_plan(cfg.encoder);
  for (std::size_t i = 0; i < plan.size(); ++i)
    add_conv(layer_name("enc.l", i + 1), plan[i].out, plan[i].in, plan[i].kernel, i < 5);

  const auto& dec = cfg.decoder;
  const std::size_t D = cfg.encoder.latent_dim, H = dec.hidden_channels, E = dec.speaker_embedding_dim;
  if (cfg.variant == Variant::in_wae) {
    const auto& spk = cfg.speaker;
    for (std::size_t i = 0; i < spk.n_conv; ++i) {
      const std::size_t in = i == 0 ? cfg.encoder.in_dim : spk.channels;
      const std::size_t out = i + 1 == spk.n_conv ? spk.speaker_dim : spk.channels;
      add_conv(layer_name("spk.l", i + 1), out, in, 3, i + 1 < spk.n_conv);
    }
    auto adain_params = make_adain_params(D, spk.speaker_dim, rng);
    state.params.push_back({"adain.scale.w", std::move(adain_params.scale_weight)});
    state.params.push_back({"adain.scale.b", std::move(adain_params.scale_bias)});
    state.params.push_back({"adain.shift.w", std::move(adain_params.shift_weight)});
    state.params.push_back({"adain.shift.b", std::move(adain_params.shift_bias)});
    state.speaker_codes = Tensor({dec.n_speakers, spk.speaker_dim});
  } else {
    auto book = make_sliced_codebook(cfg.codebook_size, D, cfg.n_slices, cfg.beta, rng);
    for (std::size_t n = 0; n < book.n_slices(); ++n)
      state.params.push_back({layer_name("codebook.", n), std::move(book.sub_codebooks[n].embeddings)});
  }

  Tensor table({dec.n_speakers, E});
  init_uniform_fan_in(table, E, rng);
  state.params.push_back({"dec.speaker_table", std::move(table)});
  add_conv("dec.in", H, D + E, 3);
  for (std::size_t i = 0; i < dec.n_upsample; ++i) add_tconv(layer_name("dec.up", i + 1), H + E, H, 4);
  add_conv("dec.post", H, H + E, 3);
  add_conv("dec.out", dec.out_dim, H, 1, false);

  state.adam.learning_rate = cfg.learning_rate;
  auto ptrs = state.param_pointers();
  adam_init(state.adam, ptrs);
  return state;
}

BoundParams::BoundParams(Tape& tape, ModelState& state) : tape_(tape), state_(state), mutable_state_(&state) {}
BoundParams::BoundParams(Tape& tape, const ModelState& state) : tape_(tape), state_(state) {}

Var BoundParams::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  const Var v = mutable_state_ ? tape_.parameter(mutable_state_->param(name)) : tape_.constant(state_.param(name));
  bound_.emplace(name, v);
  return v;
}

// ---------------------------------------------------------------------------
// Networks

namespace {

Var conv(BoundParams& p, const std::string& name, Var x, std::size_t stride, std::size_t padding) {
  return ops::conv1d(x, p(name + ".w"), p(name + ".b"), stride, padding);
}

}  // namespace

Var content_encode(BoundParams& p, Var x, std::vector<Var>* taps) {
  const auto& cfg = p.config();
  const auto& e = cfg.encoder;
  if (x.value().rank() != 3 || x.value().dim(1) != e.in_dim)
    throw UsageError("content_encode: input " + to_string(x.shape()) + " must be [B, " + std::to_string(e.in_dim) +
                     ", T]");
  const std::size_t T = x.value().dim(2), div = std::size_t{1} << e.n_downsample;
  if (T % div != 0 || T < 4)
    throw UsageError("content_encode: length " + std::to_string(T) + " is not a multiple of " + std::to_string(div));

  auto maybe_in = [&](Var h) { return e.with_in ? instance_norm(h, cfg.in) : h; };
  auto tap = [&](Var h) {
    if (taps) taps->push_back(h);
    return h;
  };
  const auto plan = encoder_plan(e);
  Var h = x;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& s = plan[i];
    h = conv(p, layer_name("enc.l", i + 1), h, s.stride, 1);
    if (i < 5) h = ops::relu(h);
    if (i % 2 == 1) h = maybe_in(h);
    tap(h);
  }
  for (std::size_t i = 6; i < 10; ++i) {
    h = ops::add(h, ops::relu(conv(p, layer_name("enc.l", i + 1), h, 1, 1)));
    if (i % 2 == 1) h = maybe_in(h);
    tap(h);
  }
  return h;
}

Var speaker_encode(BoundParams& p, Var y) {
  const auto& cfg = p.config();
  if (cfg.variant != Variant::in_wae) throw UsageError("speaker_encode: only the IN-WAE has a speaker encoder");
  if (y.value().rank() != 3 || y.value().dim(1) != cfg.encoder.in_dim || y.value().dim(2) < 4)
    throw UsageError("speaker_encode: input " + to_string(y.shape()) + " must be [B, " +
                     std::to_string(cfg.encoder.in_dim) + ", T >= 4]");
  Var h = y;
  for (std::size_t i = 0; i < cfg.speaker.n_conv; ++i) {
    // circular padding keeps the pooled code invariant to tiling the input
    h = conv(p, layer_name("spk.l", i + 1), ops::circular_pad(h, 1), 1, 0);
    if (i + 1 < cfg.speaker.n_conv) h = ops::relu(h);
  }
  return ops::time_mean(h);
}

Var decode(BoundParams& p, Var z, std::span<const std::size_t> speaker_ids, std::optional<Var> z_s) {
  const auto& cfg = p.config();
  const auto& dec = cfg.decoder;
  if (z.value().rank() != 3 || z.value().dim(1) != cfg.encoder.latent_dim)
    throw UsageError("decode: latent " + to_string(z.shape()) + " must be [B, " +
                     std::to_string(cfg.encoder.latent_dim) + ", T]");
  const std::size_t B = z.value().dim(0);
  if (speaker_ids.size() != B) throw UsageError("decode: need one speaker id per batch row");
  for (std::size_t id : speaker_ids)
    if (id >= dec.n_speakers)
      throw UsageError("decode: unknown speaker id " + std::to_string(id) + " (model has " +
                       std::to_string(dec.n_speakers) + ")");

  Var h = z;
  if (cfg.variant == Variant::in_wae) {
    if (!z_s) throw UsageError("decode: the IN-WAE decoder needs a speaker code");
    h = adain(h, *z_s, p("adain.scale.w"), p("adain.scale.b"), p("adain.shift.w"), p("adain.shift.b"));
  }
  const Var emb = ops::gather_rows(p("dec.speaker_table"), {speaker_ids.begin(), speaker_ids.end()});
  h = ops::relu(conv(p, "dec.in", ops::broadcast_concat(h, emb), 1, 1));
  for (std::size_t i = 0; i < dec.n_upsample; ++i) {
    const std::string name = layer_name("dec.up", i + 1);
    h = ops::relu(ops::transposed_conv1d(ops::broadcast_concat(h, emb), p(name + ".w"), p(name + ".b"), 2));
  }
  h = ops::relu(conv(p, "dec.post", ops::broadcast_concat(h, emb), 1, 1));
  return conv(p, "dec.out", h, 1, 0);
}

ForwardResult forward(BoundParams& p, Var x, std::span<const std::size_t> speaker_ids) {
  const auto& cfg = p.config();
  ForwardResult r;
  r.z_c = content_encode(p, x);
  if (cfg.variant == Variant::in_wae) {
    r.latent = r.z_c;
    r.x_hat = decode(p, r.latent, speaker_ids, speaker_encode(p, x));
  } else {
    const std::size_t B = r.z_c.value().dim(0), T = r.z_c.value().dim(2);
    std::vector<Var> books;
    for (std::size_t n = 0; n < cfg.n_slices; ++n) books.push_back(p(layer_name("codebook.", n)));
    auto q = sliced_vq_quantize(ops::to_frames(r.z_c), books, cfg.beta);
    r.latent = ops::from_frames(q.output, B, T);
    r.vq_loss = q.vq_loss;
    r.indices = std::move(q.indices);
    r.x_hat = decode(p, r.latent, speaker_ids);
  }
  r.recon_loss = ops::mse(r.x_hat, x);
  return r;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void init_codebooks(ModelState& state, const Tensor& batch) {
  const auto& cfg = state.config;
  Tape tape;
  BoundParams p(tape, std::as_const(state));
  const Var frames = ops::to_frames(content_encode(p, tape.constant(batch)));
  const std::size_t w = cfg.encoder.latent_dim / cfg.n_slices;
  std::mt19937_64 rng(mix_seed(state.seed, 0xc0de));
  for (std::size_t n = 0; n < cfg.n_slices; ++n) {
    Codebook book{std::move(state.param(layer_name("codebook.", n))), cfg.beta};
    init_codebook_from_samples(book, ops::slice_columns(frames, n * w, w).value(), rng);
    state.param(layer_name("codebook.", n)) = std::move(book.embeddings);
  }
  state.codebook_initialized = true;
}

}  // namespace

StepLosses train_step(ModelState& state, const Tensor& batch, std::span<const std::size_t> speaker_ids) {
  if (batch.rank() != 3 || batch.dim(0) != speaker_ids.size())
    throw UsageError("train_step: batch " + to_string(batch.shape()) + " needs one speaker id per row");
  if (state.config.variant == Variant::svq_wae && !state.codebook_initialized) init_codebooks(state, batch);

  for (auto& prm : state.params) prm.value.zero_grad();
  Tape tape;
  BoundParams p(tape, state);
  const auto r = forward(p, tape.constant(batch), speaker_ids);
  const Var total = r.vq_loss ? ops::add(r.recon_loss, *r.vq_loss) : r.recon_loss;

  StepLosses out;
  out.recon_loss = r.recon_loss.value().item();
  out.vq_loss = r.vq_loss ? r.vq_loss->value().item() : 0.0;
  out.total = total.value().item();
  out.indices = r.indices;
  if (!std::isfinite(out.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at step " << state.step_count + 1 << " (recon " << out.recon_loss << ", vq "
        << out.vq_loss << ")";
    throw NumericalError(msg.str());
  }
  tape.backward(total);
  auto ptrs = state.param_pointers();
  adam_step(ptrs, state.adam);
  ++state.step_count;
  return out;
}

SegmentCorpus make_segment_corpus(std::span<const FeatureSequence> feats, std::span<const std::size_t> speakers,
                                  std::size_t len_frames) {
  if (feats.size() != speakers.size()) throw UsageError("make_segment_corpus: one speaker id per utterance needed");
  SegmentCorpus corpus;
  for (std::size_t u = 0; u < feats.size(); ++u) {
    auto segs = segment(feats[u], len_frames, len_frames);
    for (auto& s : segs.segments) {
      corpus.segments.push_back(std::move(s));
      corpus.speakers.push_back(speakers[u]);
    }
  }
  return corpus;
}

Tensor sample_batch(const SegmentCorpus& corpus, std::uint64_t seed, std::uint64_t step, std::size_t batch_size,
                    std::vector<std::size_t>& speaker_ids) {
  if (corpus.segments.empty()) throw DataError("no training segments");
  const auto& first = corpus.segments.front();
  const std::size_t C = first.dim(1), T = first.dim(2);
  std::mt19937_64 rng(mix_seed(seed, step + 1));
  std::uniform_int_distribution<std::size_t> pick(0, corpus.segments.size() - 1);
  Tensor batch({batch_size, C, T});
  speaker_ids.resize(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t i = pick(rng);
    std::copy_n(corpus.segments[i].data().data(), C * T, batch.data().data() + b * C * T);
    speaker_ids[b] = corpus.speakers[i];
  }
  return batch;
}

void train(ModelState& state, const SegmentCorpus& corpus, std::uint64_t target_step, const StepCallback& on_step) {
  std::vector<std::size_t> ids;
  while (state.step_count < target_step) {
    const Tensor batch = sample_batch(corpus, state.seed, state.step_count, state.config.batch_size, ids);
    const auto losses = train_step(state, batch, ids);
    if (on_step) on_step(state.step_count, losses);
  }
}

void compute_speaker_codes(ModelState& state, const SegmentCorpus& corpus) {
  if (state.config.variant != Variant::in_wae) return;
  const std::size_t S = state.config.decoder.n_speakers, Ds = state.config.speaker.speaker_dim;
  std::vector<double> sum(S * Ds, 0.0);
  std::vector<std::size_t> count(S, 0);
  for (std::size_t i = 0; i < corpus.segments.size(); ++i) {
    Tape tape;
    BoundParams p(tape, std::as_const(state));
    const auto z = speaker_encode(p, tape.constant(corpus.segments[i])).value();
    const std::size_t s = corpus.speakers[i];
    for (std::size_t d = 0; d < Ds; ++d) sum[s * Ds + d] += z[d];
    ++count[s];
  }
  state.speaker_codes = Tensor({S, Ds});
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t d = 0; d < Ds; ++d)
      state.speaker_codes[s * Ds + d] = count[s] ? static_cast<float>(sum[s * Ds + d] / count[s]) : 0.0f;
}

// ---------------------------------------------------------------------------
// Inference

namespace {

std::size_t reflect_index(std::ptrdiff_t p, std::size_t T) {
  if (T == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (T - 1));
  std::ptrdiff_t m = p % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(T) ? m : period - m);
}

// All segments of an utterance stacked as one batch [S, C, L]; the tail (if
// any) is reflect-padded. Returns the number of real frames in the tail.
Tensor utterance_batch(const FeatureSequence& feat, std::size_t L, std::size_t& tail) {
  const std::size_t T = feat.num_frames, C = feat.dim;
  const std::size_t full = T / L;
  tail = T % L;
  const std::size_t S = full + (tail ? 1 : 0);
  Tensor batch({S, C, L});
  auto& data = batch.storage();
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t begin = s < full ? s * L : T - tail;
    for (std::size_t t = 0; t < L; ++t) {
      const std::size_t src = reflect_index(static_cast<std::ptrdiff_t>(begin + t), T);
      for (std::size_t d = 0; d < C; ++d) data[(s * C + d) * L + t] = feat.at(src, d);
    }
  }
  return batch;
}

// Content latents [S, D, L / 2^n] of stacked segments. Each segment is its
// own batch so batch-pooled IN statistics never mix segments.
Tensor encode_segments(const ModelState& state, const Tensor& batch) {
  const std::size_t S = batch.dim(0), C = batch.dim(1), L = batch.dim(2);
  Tensor out;
  for (std::size_t s = 0; s < S; ++s) {
    Tensor one({1, C, L});
    std::copy_n(batch.data().data() + s * C * L, C * L, one.data().data());
    Tape tape;
    BoundParams p(tape, state);
    const Tensor z = content_encode(p, tape.constant(std::move(one))).value();
    if (s == 0) out = Tensor({S, z.dim(1), z.dim(2)});
    std::copy_n(z.data().data(), z.numel(), out.data().data() + s * z.numel());
  }
  return out;
}

void check_utterance(const ModelState& state, const FeatureSequence& feat) {
  if (feat.dim != state.config.encoder.in_dim)
    throw DataError("utterance " + feat.utterance_id + " has dim " + std::to_string(feat.dim) + ", model expects " +
                    std::to_string(state.config.encoder.in_dim));
  if (feat.num_frames < 4)
    throw DataError("utterance " + feat.utterance_id + " has " + std::to_string(feat.num_frames) +
                    " frames; at least 4 are needed");
}

// Concatenates per-segment [S, C, Lout] rows over time into [frames x C],
// keeping only `keep_tail` frames of the last (padded) segment.
FeatureSequence unstack(const Tensor& out, bool has_tail, std::size_t keep_tail) {
  const std::size_t S = out.dim(0), C = out.dim(1), L = out.dim(2);
  FeatureSequence f;
  f.dim = C;
  f.num_frames = (has_tail ? (S - 1) * L + keep_tail : S * L);
  f.frames.resize(f.num_frames * C);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t n = (has_tail && s + 1 == S) ? keep_tail : L;
    for (std::size_t t = 0; t < n; ++t)
      for (std::size_t d = 0; d < C; ++d) f.frames[(s * L + t) * C + d] = out[(s * C + d) * L + t];
  }
  return f;
}

}  // namespace

Encoding encode_utterance(const ModelState& state, const FeatureSequence& feat) {
  check_utterance(state, feat);
  const auto& cfg = state.config;
  const std::size_t div = latent_rate_divisor(cfg);
  std::size_t tail = 0;
  const Tensor batch = utterance_batch(feat, cfg.segment_frames, tail);
  const std::size_t keep = (tail + div - 1) / div;

  Tape tape;
  BoundParams p(tape, state);
  const Var z = tape.constant(encode_segments(state, batch));
  Encoding enc;
  if (cfg.variant == Variant::in_wae) {
    enc.latents = unstack(z.value(), tail != 0, keep);
  } else {
    const std::size_t S = z.value().dim(0), Tl = z.value().dim(2), N = cfg.n_slices;
    std::vector<Var> books;
    for (std::size_t n = 0; n < N; ++n) books.push_back(p(layer_name("codebook.", n)));
    const auto q = sliced_vq_quantize(ops::to_frames(z), books, cfg.beta);
    enc.latents = unstack(ops::from_frames(q.z_q, S, Tl).value(), tail != 0, keep);
    CodeSequence codes;
    codes.utterance_id = feat.utterance_id;
    codes.n_slices = N;
    codes.indices.assign(q.indices.begin(), q.indices.begin() + enc.latents.num_frames * N);
    enc.codes = std::move(codes);
  }
  enc.latents.utterance_id = feat.utterance_id;
  enc.latents.frame_rate_hz = feat.frame_rate_hz / static_cast<float>(div);
  return enc;
}

FeatureSequence convert(const ModelState& state, const FeatureSequence& feat, std::size_t target_speaker) {
  check_utterance(state, feat);
  const auto& cfg = state.config;
  if (target_speaker >= cfg.decoder.n_speakers)
    throw UsageError("convert: unknown target speaker id " + std::to_string(target_speaker));
  std::size_t tail = 0;
  const Tensor batch = utterance_batch(feat, cfg.segment_frames, tail);
  const std::size_t S = batch.dim(0);

  Tape tape;
  BoundParams p(tape, state);
  const std::vector<std::size_t> ids(S, target_speaker);
  Var latent = tape.constant(encode_segments(state, batch));
  std::optional<Var> z_s;
  if (cfg.variant == Variant::in_wae) {
    const std::size_t Ds = cfg.speaker.speaker_dim;
    Tensor codes({S, Ds});
    for (std::size_t s = 0; s < S; ++s)
      std::copy_n(state.speaker_codes.data().data() + target_speaker * Ds, Ds, codes.data().data() + s * Ds);
    z_s = tape.constant(std::move(codes));
  } else {
    const std::size_t Tl = latent.value().dim(2);
    std::vector<Var> books;
    for (std::size_t n = 0; n < cfg.n_slices; ++n) books.push_back(p(layer_name("codebook.", n)));
    latent = ops::from_frames(sliced_vq_quantize(ops::to_frames(latent), books, cfg.beta).z_q, S, Tl);
  }
  const Var x_hat = decode(p, latent, ids, z_s);
  FeatureSequence out = unstack(x_hat.value(), tail != 0, tail);
  out.utterance_id = feat.utterance_id;
  out.frame_rate_hz = feat.frame_rate_hz;
  return out;
}

FeatureSequence reconstruct(const ModelState& state, const FeatureSequence& feat, std::size_t source_speaker) {
  return convert(state, feat, source_speaker);
}

}  // namespace zvq
