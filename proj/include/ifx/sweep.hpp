#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ifx/corpus.hpp"
#include "ifx/data_mix.hpp"
#include "ifx/model.hpp"
#include "ifx/registry.hpp"
#include "ifx/tokenizer.hpp"
#include "ifx/trainer.hpp"

namespace ifx {

enum class JobStatus { pending, running, done, failed };

std::string_view to_string(JobStatus status);
JobStatus parse_job_status(std::string_view s);

std::string mono_job_id(std::string_view code);
// Canonical: codes sorted, so each unordered pair has one id.
std::string bilingual_job_id(std::string_view a, std::string_view b);

struct Job {
  std::string id;
  std::vector<std::string> languages;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  JobStatus status = JobStatus::pending;
  int attempts = 0;
  std::string error;
  std::map<std::string, double> initial_losses;
  std::map<std::string, double> losses;  // held-out loss per evaluated language
  double wall_seconds = 0.0;
};

// (evaluated language, secondary language) -> held-out loss. Monolingual jobs
// fill the diagonal.
using ResultsTable = std::map<std::pair<std::string, std::string>, double>;

inline constexpr std::string_view kMixingScheme =
    "per-sentence: each sentence of a bilingual batch comes from either language with "
    "probability 1/2, sampled with replacement";

struct SweepManifest {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t registry_hash = 0;
  std::uint64_t vocab_hash = 0;
  std::uint64_t global_seed = 0;
  std::uint64_t mask_seed = 0;
  std::vector<std::string> languages;  // registry order
  ModelConfig model;
  TrainConfig train;
  std::vector<Job> jobs;

  ResultsTable results() const;
  std::size_t count(JobStatus status) const;
  const Job* find(std::string_view id) const;
};

std::string to_json(const SweepManifest& manifest);
SweepManifest parse_manifest(std::string_view text);
void save_manifest(const SweepManifest& manifest, const std::filesystem::path& path);
SweepManifest load_manifest(const std::filesystem::path& path);

// One language's immutable training inputs.
struct LanguageData {
  Corpus train;
  Corpus eval;
  std::shared_ptr<const EncodedCorpus> encoded;
  std::shared_ptr<const EvalSet> eval_set;
};

// Everything a job reads. Shared read-only by all workers.
struct SweepContext {
  Registry registry;
  Vocab vocab;
  ModelConfig model;  // vocab_size is taken from the vocab
  TrainConfig train;
  std::uint64_t global_seed = 0;
  std::uint64_t mask_seed = 0;
  std::map<std::string, LanguageData> data;

  static SweepContext build(Registry registry, Vocab vocab,
                            const std::map<std::string, SplitPair>& splits, ModelConfig model,
                            TrainConfig train, std::uint64_t global_seed,
                            std::uint64_t mask_seed);

  std::uint64_t job_seed(std::string_view job_id) const;
  std::uint64_t config_hash(const Job& job) const;
};

SweepManifest plan(const SweepContext& context);

struct RunOptions {
  std::size_t workers = 1;
  std::filesystem::path manifest_path;   // empty: keep in memory only
  std::filesystem::path checkpoint_dir;  // empty: discard trained models
  std::filesystem::path report_dir;      // empty: no per-job training reports
  // Sees every training loss before the finiteness check (fault injection).
  std::function<void(const Job&, std::int64_t step, double& loss)> on_loss;
  // Called under the manifest lock after each job finishes.
  std::function<void(const Job&)> on_job_finished;
};

struct RunSummary {
  std::size_t ran = 0;
  std::size_t done = 0;
  std::size_t failed = 0;
};

// Runs every pending job. Failures are recorded on the job and do not stop
// the sweep.
RunSummary run(SweepManifest& manifest, const SweepContext& context, const RunOptions& options);

// Throws when the stored manifest was planned from different inputs.
void check_compatible(const SweepManifest& stored, const SweepManifest& planned);

// Reloads options.manifest_path, checks it against the context, resets
// running and failed jobs to pending and runs them.
RunSummary resume(SweepManifest& manifest, const SweepContext& context,
                  const RunOptions& options);

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::string_view job_id);

}  // namespace ifx
