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

#include "zvq/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <json.hpp>
#include <set>
#include <spdlog/spdlog.h>
#include <thread>

#include "zvq/cli/manifest.hpp"
#include "zvq/error.hpp"
#include "zvq/eval/abx.hpp"
#include "zvq/eval/bitrate.hpp"
#include "zvq/eval/report.hpp"
#include "zvq/features/audio.hpp"

namespace zvq::cli {
namespace fs = std::filesystem;

namespace {

fs::path feature_path(const fs::path& dir, const std::string& utt) { return dir / (utt + ".zvqf"); }

std::string checkpoint_name(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%08llu.zvqm", static_cast<unsigned long long>(step));
  return buf;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir.string());
}

// Runs fn(i) for i < n on up to `jobs` threads; rethrows the exception of the
// lowest failing index.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1)); ++j)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

FeatureSequence normalized(FeatureSequence f, const std::optional<CmvnStats>& cmvn) {
  return cmvn ? apply_cmvn(f, *cmvn) : f;
}

}  // namespace

std::size_t extract_features(const RunConfig& cfg, const fs::path& manifest, const fs::path& out_dir) {
  const auto entries = read_manifest(manifest);
  make_dir(out_dir);
  std::vector<std::optional<FeatureSequence>> feats(entries.size());
  std::vector<std::string> errors(entries.size());
  parallel_for(entries.size(), cfg.jobs, [&](std::size_t i) {
    try {
      auto f = add_deltas(mfcc(read_wav(entries[i].wav_path), cfg.mfcc), cfg.delta_window);
      f.utterance_id = entries[i].utterance_id;
      write_features(feature_path(out_dir, f.utterance_id), f);
      feats[i] = std::move(f);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t failed = 0;
  std::vector<FeatureSequence> train;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!feats[i]) {
      ++failed;
      spdlog::error("{}: {}", entries[i].utterance_id, errors[i]);
    } else if (entries[i].trains()) {
      train.push_back(std::move(*feats[i]));
    }
  }
  if (train.empty()) throw DataError("no training utterance could be processed");
  const auto stats = compute_cmvn(train);
  save_cmvn(out_dir / "cmvn.json", stats);
  spdlog::info("extracted {} of {} utterances; cmvn over {} frames", entries.size() - failed, entries.size(),
               stats.frame_count);
  return failed;
}

void train(const RunConfig& cfg, const TrainArgs& args) {
  const auto entries = read_manifest(args.manifest, false);
  std::vector<FeatureSequence> feats;
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.trains()) continue;
    feats.push_back(read_features(feature_path(args.features, e.utterance_id)));
    names.push_back(e.speaker);
  }
  if (feats.empty()) throw DataError("manifest has no training utterances");
  std::map<std::string, std::size_t> speaker_map;
  for (const auto& n : std::set<std::string>(names.begin(), names.end())) speaker_map.emplace(n, speaker_map.size());
  std::vector<std::size_t> speakers;
  for (const auto& n : names) speakers.push_back(speaker_map.at(n));

  ModelState state;
  if (args.resume) {
    state = load_checkpoint(*args.resume);
    if (state.speaker_map != speaker_map) throw DataError("checkpoint speaker map does not match the manifest");
    spdlog::info("resuming from {} at step {}", args.resume->string(), state.step_count);
  } else {
    state = create_model(model_config(cfg, speaker_map.size()), cfg.seed);
    state.speaker_map = speaker_map;
    const auto cmvn_file = args.features / "cmvn.json";
    state.cmvn = fs::exists(cmvn_file) ? load_cmvn(cmvn_file) : compute_cmvn(feats);
  }
  for (auto& f : feats) f = apply_cmvn(f, *state.cmvn);
  const auto corpus = make_segment_corpus(feats, speakers, state.config.segment_frames);
  if (corpus.segments.empty()) throw DataError("no utterance is long enough for one training segment");

  make_dir(args.out_dir);
  {
    std::ofstream(args.out_dir / "config.txt") << resolved_text(cfg);
  }
  save_speaker_map(args.out_dir / "speaker_map.json", speaker_map);

  // keep log lines up to the resume point
  const auto log_path = args.out_dir / "train_log.jsonl";
  std::vector<std::string> kept;
  if (args.resume && fs::exists(log_path)) {
    std::ifstream in(log_path);
    for (std::string line; std::getline(in, line);)
      if (!line.empty() && nlohmann::json::parse(line).at("step").get<std::uint64_t>() <= state.step_count)
        kept.push_back(line);
  }
  std::ofstream log(log_path, std::ios::trunc);
  for (const auto& l : kept) log << l << '\n';

  const bool svq = state.config.variant == Variant::svq_wae;
  const std::uint64_t target = cfg.steps;
  auto on_step = [&](std::uint64_t step, const StepLosses& losses) {
    if (step % std::max<std::uint64_t>(cfg.log_interval, 1) == 0 || step == target) {
      nlohmann::ordered_json j;
      j["step"] = step;
      j["recon_loss"] = losses.recon_loss;
      j["vq_loss"] = losses.vq_loss;
      j["codebook_usage"] =
          svq ? nlohmann::ordered_json(codebook_usage(losses.indices, state.config.n_slices, state.config.codebook_size))
              : nlohmann::ordered_json(nullptr);
      log << j.dump() << '\n';
    }
    if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0) {
      log.flush();
      compute_speaker_codes(state, corpus);
      save_checkpoint(args.out_dir / checkpoint_name(step), state);
      spdlog::info("step {}: recon {:.5f} vq {:.5f}", step, losses.recon_loss, losses.vq_loss);
    }
  };
  try {
    zvq::train(state, corpus, target, on_step);
  } catch (const NumericalError&) {
    log.flush();
    save_checkpoint(args.out_dir / "last_good.zvqm", state);
    spdlog::error("non-finite loss after step {}; state saved to last_good.zvqm", state.step_count);
    throw;
  }
  compute_speaker_codes(state, corpus);
  save_checkpoint(args.out_dir / "final.zvqm", state);
  spdlog::info("trained to step {}", state.step_count);
}

void encode(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& features,
            const std::optional<fs::path>& manifest, const fs::path& out_dir, std::optional<EncodeFormat> format) {
  const auto state = load_checkpoint(checkpoint);
  const bool svq = state.config.variant == Variant::svq_wae;
  const auto fmt = format.value_or(svq ? EncodeFormat::codes : EncodeFormat::latents);
  if (fmt == EncodeFormat::codes && !svq) throw UsageError("encode: an IN-WAE model has no codes; use --format latents");

  std::vector<fs::path> inputs;
  if (manifest) {
    for (const auto& e : read_manifest(*manifest, false)) inputs.push_back(feature_path(features, e.utterance_id));
  } else {
    inputs = files_with_extension(features, ".zvqf");
  }
  if (inputs.empty()) throw DataError("encode: no feature files in " + features.string());
  make_dir(out_dir);
  if (fs::equivalent(out_dir, features)) throw UsageError("encode: output directory must differ from the features");

  parallel_for(inputs.size(), cfg.jobs, [&](std::size_t i) {
    const auto feat = normalized(read_features(inputs[i]), state.cmvn);
    const auto enc = encode_utterance(state, feat);
    if (fmt == EncodeFormat::codes) {
      const std::vector<CodeSequence> one = {*enc.codes};
      write_code_file(out_dir / (feat.utterance_id + ".codes"), one);
    } else {
      write_features(feature_path(out_dir, feat.utterance_id), enc.latents);
    }
  });
  spdlog::info("encoded {} utterances into {}", inputs.size(), out_dir.string());
}

void convert(const RunConfig&, const fs::path& checkpoint, const fs::path& source, const std::string& target_speaker,
             const fs::path& out) {
  const auto state = load_checkpoint(checkpoint);
  const auto it = state.speaker_map.find(target_speaker);
  if (it == state.speaker_map.end()) {
    std::string known;
    for (const auto& [name, _] : state.speaker_map) known += (known.empty() ? "" : ", ") + name;
    throw UsageError("unknown speaker '" + target_speaker + "'; known speakers: " + known);
  }
  const auto feat = read_features(source);
  auto y = convert(state, normalized(feat, state.cmvn), it->second);
  if (state.cmvn) y = invert_cmvn(y, *state.cmvn);
  if (out.has_parent_path()) make_dir(out.parent_path());
  write_features(out, y);
  spdlog::info("converted {} to {} -> {}", feat.utterance_id, target_speaker, out.string());
}

void eval_abx(const RunConfig& cfg, const fs::path& inputs, const fs::path& item_file,
              const std::optional<fs::path>& cmvn, const fs::path& out) {
  const auto specs = read_item_file(item_file);
  const std::optional<CmvnStats> stats = cmvn ? std::optional(load_cmvn(*cmvn)) : std::nullopt;
  std::map<std::string, FeatureSequence> reps;
  std::vector<AbxItem> items;
  for (const auto& s : specs) {
    auto it = reps.find(s.utterance_id);
    if (it == reps.end())
      it = reps.emplace(s.utterance_id, normalized(read_features(feature_path(inputs, s.utterance_id)), stats)).first;
    items.push_back({item_frames(it->second, s), s.category, s.talker});
  }
  AbxConfig ac{cfg.abx_mode, cfg.abx_metric, cfg.abx_max_triples, cfg.seed, cfg.jobs};
  const auto report = abx_score(items, ac);

  nlohmann::json per_category, skipped = nlohmann::json::array();
  for (const auto& [cat, score] : report.per_category) per_category[cat] = {{"error", score.error}, {"n_pairs", score.n_pairs}};
  for (const auto& s : report.skipped) skipped.push_back(s);
  nlohmann::json config = {{"mode", to_string(ac.mode)},
                           {"metric", to_string(ac.metric)},
                           {"max_triples_per_cell", ac.max_triples_per_cell},
                           {"n_items", items.size()},
                           {"cmvn", stats.has_value()}};
  auto j = metric_report("abx", report.error_rate, "n_triples", report.n_triples, config, cfg.seed);
  j["per_category"] = per_category;
  j["skipped"] = skipped;
  j["zero_norm_frames"] = report.zero_norm_frames;
  write_json(out, j);
  spdlog::info("abx {} error {:.4f} over {} triples", to_string(ac.mode), report.error_rate, report.n_triples);
}

void eval_bitrate(const RunConfig& cfg, const fs::path& inputs, const fs::path& out) {
  std::vector<SymbolStream> streams;
  const auto code_files = files_with_extension(inputs, ".codes");
  const bool codes = !code_files.empty();
  if (codes) {
    for (const auto& f : code_files)
      for (const auto& c : read_code_file(f)) streams.push_back(stream_from_codes(c, static_cast<double>(cfg.frame_rate_hz)));
  } else {
    for (const auto& f : files_with_extension(inputs, ".zvqf")) streams.push_back(stream_from_features(read_features(f)));
  }
  if (streams.empty()) throw DataError("bitrate: no .codes or .zvqf files in " + inputs.string());
  const double b = bitrate(streams);
  nlohmann::json config = {{"source", codes ? "codes" : "features"}};
  if (codes) config["frame_rate_hz"] = cfg.frame_rate_hz;
  write_json(out, metric_report("bitrate", b, "n_items", streams.size(), config, cfg.seed));
  spdlog::info("bitrate {:.3f} bits/s over {} utterances", b, streams.size());
}

}  // namespace zvq::cli
