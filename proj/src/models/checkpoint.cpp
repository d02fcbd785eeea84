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

#include <fstream>
#include <json.hpp>

#include "zvq/binary_io.hpp"
#include "zvq/error.hpp"
#include "zvq/models/model.hpp"

namespace zvq {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'Z', 'V', 'Q', 'M'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint32_t kMaxJson = 1u << 28;

json config_to_json(const ModelConfig& c) {
  return {
      {"variant", to_string(c.variant)},
      {"encoder",
       {{"in_dim", c.encoder.in_dim},
        {"hidden_channels", c.encoder.hidden_channels},
        {"n_downsample", c.encoder.n_downsample},
        {"latent_dim", c.encoder.latent_dim},
        {"with_in", c.encoder.with_in}}},
      {"speaker",
       {{"n_conv", c.speaker.n_conv}, {"channels", c.speaker.channels}, {"speaker_dim", c.speaker.speaker_dim}}},
      {"decoder",
       {{"out_dim", c.decoder.out_dim},
        {"n_upsample", c.decoder.n_upsample},
        {"hidden_channels", c.decoder.hidden_channels},
        {"speaker_embedding_dim", c.decoder.speaker_embedding_dim},
        {"n_speakers", c.decoder.n_speakers}}},
      {"in", {{"epsilon", c.in.epsilon}, {"per_instance_stats", c.in.per_instance_stats}}},
      {"codebook_size", c.codebook_size},
      {"n_slices", c.n_slices},
      {"beta", c.beta},
      {"segment_frames", c.segment_frames},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
  };
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  const auto& e = j.at("encoder");
  e.at("in_dim").get_to(c.encoder.in_dim);
  e.at("hidden_channels").get_to(c.encoder.hidden_channels);
  e.at("n_downsample").get_to(c.encoder.n_downsample);
  e.at("latent_dim").get_to(c.encoder.latent_dim);
  e.at("with_in").get_to(c.encoder.with_in);
  const auto& s = j.at("speaker");
  s.at("n_conv").get_to(c.speaker.n_conv);
  s.at("channels").get_to(c.speaker.channels);
  s.at("speaker_dim").get_to(c.speaker.speaker_dim);
  const auto& d = j.at("decoder");
  d.at("out_dim").get_to(c.decoder.out_dim);
  d.at("n_upsample").get_to(c.decoder.n_upsample);
  d.at("hidden_channels").get_to(c.decoder.hidden_channels);
  d.at("speaker_embedding_dim").get_to(c.decoder.speaker_embedding_dim);
  d.at("n_speakers").get_to(c.decoder.n_speakers);
  j.at("in").at("epsilon").get_to(c.in.epsilon);
  j.at("in").at("per_instance_stats").get_to(c.in.per_instance_stats);
  j.at("codebook_size").get_to(c.codebook_size);
  j.at("n_slices").get_to(c.n_slices);
  j.at("beta").get_to(c.beta);
  j.at("segment_frames").get_to(c.segment_frames);
  j.at("batch_size").get_to(c.batch_size);
  j.at("learning_rate").get_to(c.learning_rate);
  return c;
}

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  binary::write_string(out, name);
  binary::write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) binary::write_u64(out, d);
  binary::write_f32s(out, t.data());
}

Tensor read_tensor(std::istream& in, const std::string& expected_name) {
  const std::string name = binary::read_string(in);
  if (name != expected_name)
    throw DataError("checkpoint: expected tensor '" + expected_name + "', found '" + name + "'");
  const std::uint32_t rank = binary::read_u32(in);
  if (rank > kMaxRank) throw DataError("checkpoint: tensor '" + name + "' has implausible rank");
  Shape shape(rank);
  for (auto& d : shape) d = binary::read_u64(in);
  Tensor t(shape);
  binary::read_f32s(in, t.data());
  return t;
}

}  // namespace

// Layout (little-endian): "ZVQM", u32 version, string variant, string config
// JSON, u64 seed, u64 step_count, u8 codebook_initialized, u32 n_params,
// n_params x {string name, u32 rank, u64 dims[rank], f32 data}, the
// speaker_codes tensor in the same form, Adam {u64 step, f32 lr, beta1,
// beta2, eps, f32 m[numel], f32 v[numel] per param}, string extras JSON
// (speaker_map, cmvn).
void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    binary::write_u32(out, kVersion);
    binary::write_string(out, to_string(state.config.variant));
    binary::write_string(out, config_to_json(state.config).dump());
    binary::write_u64(out, state.seed);
    binary::write_u64(out, state.step_count);
    out.put(state.codebook_initialized ? 1 : 0);

    binary::write_u32(out, static_cast<std::uint32_t>(state.params.size()));
    for (const auto& p : state.params) write_tensor(out, p.name, p.value);
    write_tensor(out, "speaker_codes", state.speaker_codes);

    const auto& a = state.adam;
    binary::write_u64(out, a.step_count);
    binary::write_f32(out, a.learning_rate);
    binary::write_f32(out, a.beta1);
    binary::write_f32(out, a.beta2);
    binary::write_f32(out, a.epsilon);
    for (std::size_t i = 0; i < state.params.size(); ++i) {
      binary::write_f32s(out, a.first_moment.at(i));
      binary::write_f32s(out, a.second_moment.at(i));
    }

    json extras = {{"speaker_map", state.speaker_map}};
    if (state.cmvn) extras["cmvn"] = {{"mean", state.cmvn->mean}, {"std", state.cmvn->std},
                                      {"frame_count", state.cmvn->frame_count}};
    binary::write_string(out, extras.dump());
    if (!out.flush()) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw DataError(path.string() + " is not a model checkpoint");
  const std::uint32_t version = binary::read_u32(in);
  if (version != kVersion)
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kVersion) + ")");
  try {
    const Variant variant = parse_variant(binary::read_string(in));
    const ModelConfig cfg = config_from_json(json::parse(binary::read_string(in, kMaxJson)));
    if (cfg.variant != variant) throw DataError("checkpoint variant tag disagrees with its config");
    const std::uint64_t seed = binary::read_u64(in);
    ModelState state = create_model(cfg, seed);
    state.step_count = binary::read_u64(in);
    const int flag = in.get();
    if (flag != 0 && flag != 1) throw DataError("checkpoint: bad codebook flag");
    state.codebook_initialized = flag == 1;

    const std::uint32_t n = binary::read_u32(in);
    if (n != state.params.size())
      throw DataError("checkpoint has " + std::to_string(n) + " parameters, config implies " +
                      std::to_string(state.params.size()));
    for (auto& p : state.params) {
      Tensor t = read_tensor(in, p.name);
      if (t.shape() != p.value.shape())
        throw DataError("checkpoint: parameter '" + p.name + "' has shape " + to_string(t.shape()) + ", expected " +
                        to_string(p.value.shape()));
      p.value = std::move(t);
    }
    state.speaker_codes = read_tensor(in, "speaker_codes");

    auto& a = state.adam;
    a.step_count = binary::read_u64(in);
    a.learning_rate = binary::read_f32(in);
    a.beta1 = binary::read_f32(in);
    a.beta2 = binary::read_f32(in);
    a.epsilon = binary::read_f32(in);
    for (std::size_t i = 0; i < state.params.size(); ++i) {
      binary::read_f32s(in, a.first_moment.at(i));
      binary::read_f32s(in, a.second_moment.at(i));
    }

    const json extras = json::parse(binary::read_string(in, kMaxJson));
    state.speaker_map = extras.at("speaker_map").get<std::map<std::string, std::size_t>>();
    if (extras.contains("cmvn")) {
      CmvnStats c;
      extras["cmvn"].at("mean").get_to(c.mean);
      extras["cmvn"].at("std").get_to(c.std);
      extras["cmvn"].at("frame_count").get_to(c.frame_count);
      state.cmvn = std::move(c);
    }
    return state;
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + ": malformed metadata: " + e.what());
  } catch (const UsageError& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

void save_speaker_map(const std::filesystem::path& path, const std::map<std::string, std::size_t>& map) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write speaker map " + path.string());
  out << json(map).dump(2) << '\n';
}

std::map<std::string, std::size_t> load_speaker_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open speaker map " + path.string());
  try {
    return json::parse(in).get<std::map<std::string, std::size_t>>();
  } catch (const json::exception& e) {
    throw DataError("speaker map " + path.string() + ": " + e.what());
  }
}

}  // namespace zvq
