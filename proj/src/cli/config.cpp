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

#include "zvq/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "zvq/error.hpp"

extern char** environ;

namespace zvq::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end) throw UsageError("config " + key + ": cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw UsageError("config " + key + ": expected a boolean, got '" + text + "'");
}

template <class T>
std::string format_number(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field number(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); },
          [member](const RunConfig& c) { return format_number(c.*member); }};
}

template <class S, class T>
Field nested(S RunConfig::*outer, T S::*member) {
  return {[=](RunConfig& c, const std::string& k, const std::string& v) { (c.*outer).*member = parse_number<T>(k, v); },
          [=](const RunConfig& c) { return format_number((c.*outer).*member); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["run.seed"] = number(&RunConfig::seed);
    t["run.jobs"] = number(&RunConfig::jobs);
    t["run.log_level"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            static const std::vector<std::string> ok = {"trace", "debug", "info", "warn", "error", "off"};
                            if (std::find(ok.begin(), ok.end(), v) == ok.end())
                              throw UsageError("config " + k + ": unknown level '" + v + "'");
                            c.log_level = v;
                          },
                          [](const RunConfig& c) { return c.log_level; }};

    t["features.win_ms"] = nested(&RunConfig::mfcc, &MfccConfig::win_ms);
    t["features.hop_ms"] = nested(&RunConfig::mfcc, &MfccConfig::hop_ms);
    t["features.n_mels"] = nested(&RunConfig::mfcc, &MfccConfig::n_mels);
    t["features.n_ceps"] = nested(&RunConfig::mfcc, &MfccConfig::n_ceps);
    t["features.preemphasis"] = nested(&RunConfig::mfcc, &MfccConfig::preemphasis);
    t["features.log_floor"] = nested(&RunConfig::mfcc, &MfccConfig::log_floor);
    t["features.delta_window"] = number(&RunConfig::delta_window);

    t["model.variant"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.variant = parse_variant(v); },
                          [](const RunConfig& c) { return to_string(c.variant); }};
    t["model.frame_rate"] = number(&RunConfig::frame_rate_hz);
    t["model.hidden"] = number(&RunConfig::hidden);
    t["model.latent_dim"] = number(&RunConfig::latent_dim);
    t["model.speaker_convs"] = number(&RunConfig::speaker_convs);
    t["model.speaker_channels"] = number(&RunConfig::speaker_channels);
    t["model.speaker_dim"] = number(&RunConfig::speaker_dim);
    t["model.speaker_embedding"] = number(&RunConfig::speaker_embedding);
    t["model.codebook_size"] = number(&RunConfig::codebook_size);
    t["model.n_slices"] = number(&RunConfig::n_slices);
    t["model.beta"] = number(&RunConfig::beta);
    t["model.epsilon"] = number(&RunConfig::epsilon);
    t["model.per_instance_stats"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.per_instance_stats = parse_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.per_instance_stats ? "true" : "false"); }};
    t["model.segment_frames"] = number(&RunConfig::segment_frames);
    t["model.batch_size"] = number(&RunConfig::batch_size);
    t["model.learning_rate"] = number(&RunConfig::learning_rate);

    t["train.steps"] = number(&RunConfig::steps);
    t["train.checkpoint_interval"] = number(&RunConfig::checkpoint_interval);
    t["train.log_interval"] = number(&RunConfig::log_interval);

    t["abx.mode"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.abx_mode = parse_abx_mode(v); },
                     [](const RunConfig& c) { return to_string(c.abx_mode); }};
    t["abx.metric"] = {[](RunConfig& c, const std::string&, const std::string& v) { c.abx_metric = parse_frame_metric(v); },
                       [](const RunConfig& c) { return to_string(c.abx_metric); }};
    t["abx.max_triples"] = number(&RunConfig::abx_max_triples);

    t["synth.n_speakers"] = nested(&RunConfig::synth, &SynthConfig::n_speakers);
    t["synth.n_phones"] = nested(&RunConfig::synth, &SynthConfig::n_phones);
    t["synth.utts_per_speaker"] = nested(&RunConfig::synth, &SynthConfig::utts_per_speaker);
    t["synth.sample_rate"] = nested(&RunConfig::synth, &SynthConfig::sample_rate_hz);
    t["synth.min_phones"] = nested(&RunConfig::synth, &SynthConfig::min_phones);
    t["synth.max_phones"] = nested(&RunConfig::synth, &SynthConfig::max_phones);
    t["synth.min_phone_ms"] = nested(&RunConfig::synth, &SynthConfig::min_phone_ms);
    t["synth.max_phone_ms"] = nested(&RunConfig::synth, &SynthConfig::max_phone_ms);
    t["synth.test_fraction"] = nested(&RunConfig::synth, &SynthConfig::test_fraction);
    t["synth.noise"] = nested(&RunConfig::synth, &SynthConfig::noise);
    t["synth.formant_jitter"] = nested(&RunConfig::synth, &SynthConfig::formant_jitter);
    t["synth.gain_jitter_db"] = nested(&RunConfig::synth, &SynthConfig::gain_jitter_db);
    t["synth.pitch_slope"] = nested(&RunConfig::synth, &SynthConfig::pitch_slope);
    return t;
  }();
  return table;
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw UsageError("unknown config key '" + key + "'");
  it->second.set(cfg, key, trim(value));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : fields()) keys.push_back(k);
  return keys;
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::string line, section;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const std::string where = path.string() + ":" + std::to_string(n) + ": ";
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw UsageError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    try {
      set_key(cfg, key, line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  }
}

void apply_environment(RunConfig& cfg, const std::map<std::string, std::string>& env) {
  const std::string prefix = kEnvPrefix;
  for (const auto& [name, value] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string rest = name.substr(prefix.size());
    std::transform(rest.begin(), rest.end(), rest.begin(), [](unsigned char ch) { return std::tolower(ch); });
    const auto us = rest.find('_');
    if (us == std::string::npos) throw UsageError("environment " + name + ": expected " + prefix + "<SECTION>_<KEY>");
    try {
      set_key(cfg, rest.substr(0, us) + "." + rest.substr(us + 1), value);
    } catch (const UsageError& e) {
      throw UsageError("environment " + name + ": " + e.what());
    }
  }
}

std::map<std::string, std::string> config_environment() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv = *e;
    const auto eq = kv.find('=');
    if (eq != std::string::npos && kv.rfind(kEnvPrefix, 0) == 0) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

std::string resolved_text(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    if (key.substr(0, dot) != section) {
      if (!section.empty()) os << '\n';
      section = key.substr(0, dot);
      os << '[' << section << "]\n";
    }
    os << key.substr(dot + 1) << " = " << field.get(cfg) << '\n';
  }
  return os.str();
}

ModelConfig model_config(const RunConfig& cfg, std::size_t n_speakers) {
  std::size_t n_down = 0;
  if (cfg.frame_rate_hz == 25) n_down = 2;
  else if (cfg.frame_rate_hz == 50) n_down = 1;
  else throw UsageError("model.frame_rate must be 25 or 50, got " + std::to_string(cfg.frame_rate_hz));
  ModelConfig m = make_model_config(cfg.variant, n_speakers, cfg.hidden, cfg.latent_dim, n_down);
  m.encoder.in_dim = m.decoder.out_dim = cfg.mfcc.n_ceps * 3;
  m.speaker.n_conv = cfg.speaker_convs;
  m.speaker.channels = cfg.speaker_channels;
  m.speaker.speaker_dim = cfg.speaker_dim;
  m.decoder.speaker_embedding_dim = cfg.speaker_embedding;
  m.in.epsilon = cfg.epsilon;
  m.in.per_instance_stats = cfg.per_instance_stats;
  m.codebook_size = cfg.codebook_size;
  m.n_slices = cfg.n_slices;
  m.beta = cfg.beta;
  m.segment_frames = cfg.segment_frames;
  m.batch_size = cfg.batch_size;
  m.learning_rate = cfg.learning_rate;
  validate(m);
  return m;
}

}  // namespace zvq::cli
