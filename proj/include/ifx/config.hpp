#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "ifx/model.hpp"
#include "ifx/probe.hpp"
#include "ifx/report.hpp"
#include "ifx/sweep.hpp"
#include "ifx/trainer.hpp"

namespace ifx {

struct DataConfig {
  std::int64_t sentences = 2200;  // per language, before the split
  std::int64_t eval_sentences = 200;
  std::uint64_t split_seed = 1;
  std::int64_t tokenizer_vocab = 800;
  bool byte_fallback = false;
  std::uint64_t mask_seed = 99;
  std::int64_t parallel_sentences = 100;  // similarity
};

struct SweepSettings {
  std::size_t workers = 1;
  std::uint64_t global_seed = 0;
};

struct ProbeSettings {
  std::string target;
  std::int64_t low_partners = 2;
  std::int64_t high_partners = 2;
  std::int64_t seeds = 5;
  ProbeTaskOptions task;
};

struct RunConfig {
  std::string profile = "desk";
  std::filesystem::path registry;
  std::filesystem::path corpus_dir;
  std::filesystem::path output_dir;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  SweepSettings sweep;
  AnalysisOptions analysis;
  ProbeSettings probe;

  // "desk" (defaults for real runs) or "tiny" (acceptance-scale).
  static RunConfig preset(std::string_view profile);

  // Applies "section.key" = value; throws on unknown keys or bad values.
  void set(std::string_view dotted_key, std::string_view value);
  void validate() const;

  std::filesystem::path manifest_path() const { return output_dir / "manifest.json"; }
  std::filesystem::path vocab_path() const { return output_dir / "vocab.txt"; }
  std::filesystem::path checkpoint_dir() const { return output_dir / "checkpoints"; }
  std::filesystem::path report_dir() const { return output_dir / "reports"; }
  std::filesystem::path analysis_dir() const { return output_dir / "analysis"; }
};

// INI file with [run] profile=..., then per-module sections. Relative paths
// are resolved against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
std::string to_ini(const RunConfig& config);

}  // namespace ifx
