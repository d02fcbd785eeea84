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

#include <CLI11.hpp>
#include <iostream>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "zvq/cli/commands.hpp"
#include "zvq/cli/synth.hpp"
#include "zvq/error.hpp"

namespace zvq::cli {
namespace fs = std::filesystem;

namespace {

void use_stderr_logger(const std::string& level) {
  auto logger = spdlog::get("zvq");
  if (!logger) logger = spdlog::stderr_logger_mt("zvq");
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::from_str(level));
  spdlog::set_default_logger(logger);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Zero-resource acoustic unit discovery with sliced VQ and IN autoencoders"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, log_level, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  app.add_option("--config", config_file, "key=value config file with [sections]")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed (run.seed)");
  app.add_option("--out", out, "output file or directory");
  app.add_option("--jobs", jobs, "worker threads (run.jobs)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  std::string manifest, features, checkpoint, resume, source, target, input, items, cmvn, format, kind, mode;
  std::optional<std::uint64_t> steps;

  auto* extract = app.add_subcommand("extract-features", "MFCC + deltas per utterance and corpus CMVN stats");
  extract->add_option("--manifest", manifest)->required();

  auto* train_cmd = app.add_subcommand("train", "train a model on extracted features");
  train_cmd->add_option("--manifest", manifest)->required();
  train_cmd->add_option("--features", features)->required();
  train_cmd->add_option("--resume", resume, "checkpoint to continue from");
  train_cmd->add_option("--steps", steps, "target step count (train.steps)");

  auto* encode_cmd = app.add_subcommand("encode", "content codes or latents per utterance");
  encode_cmd->add_option("--checkpoint", checkpoint)->required();
  encode_cmd->add_option("--features", features)->required();
  encode_cmd->add_option("--manifest", manifest, "restrict to these utterances");
  encode_cmd->add_option("--format", format, "codes or latents")->check(CLI::IsMember({"codes", "latents"}));

  auto* convert_cmd = app.add_subcommand("convert", "re-synthesize features with another speaker");
  convert_cmd->add_option("--checkpoint", checkpoint)->required();
  convert_cmd->add_option("--source", source, "source feature file")->required();
  convert_cmd->add_option("--target-speaker", target)->required();

  auto* eval_cmd = app.add_subcommand("eval", "ABX error or bit-rate report");
  eval_cmd->add_option("kind", kind)->required()->check(CLI::IsMember({"abx", "bitrate"}));
  eval_cmd->add_option("--input", input, "directory of .zvqf or .codes files")->required();
  eval_cmd->add_option("--items", items, "item file (abx)");
  eval_cmd->add_option("--cmvn", cmvn, "normalize features with these stats first (abx)");
  eval_cmd->add_option("--mode", mode, "within or across (abx.mode)");

  auto* synth_cmd = app.add_subcommand("make-synth-corpus", "synthetic multi-speaker corpus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    use_stderr_logger(log_level.empty() ? "info" : log_level);
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    apply_environment(cfg, config_environment());
    if (seed) cfg.seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (!log_level.empty()) set_key(cfg, "run.log_level", log_level);
    if (steps) cfg.steps = *steps;
    if (!mode.empty()) set_key(cfg, "abx.mode", mode);
    use_stderr_logger(cfg.log_level);
    spdlog::info("resolved config:\n{}", resolved_text(cfg));
    if (out.empty()) throw UsageError("--out is required");

    if (*extract) {
      if (extract_features(cfg, manifest, out) > 0) return 2;
    } else if (*train_cmd) {
      train(cfg, {manifest, features, out, resume.empty() ? std::nullopt : std::optional<fs::path>(resume)});
    } else if (*encode_cmd) {
      std::optional<EncodeFormat> f;
      if (!format.empty()) f = format == "codes" ? EncodeFormat::codes : EncodeFormat::latents;
      encode(cfg, checkpoint, features, manifest.empty() ? std::nullopt : std::optional<fs::path>(manifest), out, f);
    } else if (*convert_cmd) {
      convert(cfg, checkpoint, source, target, out);
    } else if (*eval_cmd) {
      if (kind == "abx") {
        if (items.empty()) throw UsageError("eval abx needs --items");
        eval_abx(cfg, input, items, cmvn.empty() ? std::nullopt : std::optional<fs::path>(cmvn), out);
      } else {
        eval_bitrate(cfg, input, out);
      }
    } else if (*synth_cmd) {
      const auto s = make_synth_corpus(cfg.synth, cfg.mfcc, cfg.seed, out);
      spdlog::info("wrote {} wavs and {} items under {}", s.n_wavs, s.n_items, out);
    }
    return 0;
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}

}  // namespace zvq::cli
