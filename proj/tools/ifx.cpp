// ifx: command-line driver for interference sweeps.
#include <cstdio>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "ifx/config.hpp"
#include "ifx/pipeline.hpp"
#include "ifx/probe.hpp"
#include "ifx/report.hpp"
#include "ifx/similarity.hpp"
#include "ifx/sweep.hpp"
#include "json.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct ConfigError : ifx::Error {
  using Error::Error;
};

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

ifx::RunConfig load_config(const Common& common) {
  try {
    ifx::RunConfig c = ifx::parse_run_config(ifx::read_file(common.config_path),
                                             std::filesystem::path(common.config_path).parent_path());
    for (const auto& kv : common.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ifx::Error("--set expects key=value, got '" + kv + "'");
      c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    c.validate();
    if (c.registry.empty() || c.corpus_dir.empty() || c.output_dir.empty()) {
      throw ifx::Error("config needs paths.registry, paths.corpus_dir and paths.output_dir");
    }
    return c;
  } catch (const ifx::Error& e) {
    throw ConfigError(e.what());
  }
}

void log(const std::string& msg) { std::cerr << msg << std::endl; }

int cmd_gen_corpus(const ifx::RunConfig& c) {
  const auto registry = ifx::load_registry(c.registry);
  const auto splits = ifx::make_splits(registry, c.data);
  ifx::save_splits(splits, c.corpus_dir);
  for (const auto& [code, s] : splits) {
    log(code + ": " + std::to_string(s.train.size()) + " train, " + std::to_string(s.eval.size()) +
        " eval");
  }
  return kOk;
}

int cmd_train_tokenizer(const ifx::RunConfig& c) {
  const auto registry = ifx::load_registry(c.registry);
  const auto splits = ifx::load_splits(registry, c.corpus_dir);
  const auto vocab = ifx::train_shared_vocab(registry, splits, c.data);
  std::filesystem::create_directories(c.output_dir);
  ifx::save_vocab(vocab, c.vocab_path());
  log("vocab: " + std::to_string(vocab.size()) + " pieces -> " + c.vocab_path().string());
  return kOk;
}

struct SweepFlags {
  std::size_t workers = 0;
  std::vector<std::string> inject_nan;
  std::int64_t inject_step = 0;
  bool force = false;
};

ifx::RunOptions run_options(const ifx::RunConfig& c, const SweepFlags& f, std::size_t total) {
  ifx::RunOptions o;
  o.workers = f.workers ? f.workers : c.sweep.workers;
  o.manifest_path = c.manifest_path();
  o.checkpoint_dir = c.checkpoint_dir();
  o.report_dir = c.report_dir();
  if (!f.inject_nan.empty()) {
    std::set<std::string> targets(f.inject_nan.begin(), f.inject_nan.end());
    const auto step = f.inject_step;
    o.on_loss = [targets, step](const ifx::Job& job, std::int64_t s, double& loss) {
      if (s == step && targets.count(job.id)) loss = std::numeric_limits<double>::quiet_NaN();
    };
  }
  auto finished = std::make_shared<std::size_t>(0);
  o.on_job_finished = [finished, total](const ifx::Job& job) {
    ++*finished;
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.1fs)", job.wall_seconds);
    log("[" + std::to_string(*finished) + "/" + std::to_string(total) + "] " +
        std::string(ifx::to_string(job.status)) + " " + job.id +
        (job.status == ifx::JobStatus::failed ? ": " + job.error : std::string(buf)));
  };
  return o;
}

int finish(const ifx::SweepManifest& m) {
  const auto failed = m.count(ifx::JobStatus::failed);
  log(std::to_string(m.count(ifx::JobStatus::done)) + " done, " + std::to_string(failed) +
      " failed, " + std::to_string(m.jobs.size()) + " planned");
  return failed ? kFailed : kOk;
}

int cmd_sweep_plan(const ifx::RunConfig& c, const SweepFlags& f) {
  const auto ctx = ifx::load_context(c);
  if (std::filesystem::exists(c.manifest_path()) && !f.force) {
    throw ifx::Error(c.manifest_path().string() + " exists; use --force to replan");
  }
  const auto m = ifx::plan(ctx);
  ifx::save_manifest(m, c.manifest_path());
  log("planned " + std::to_string(m.jobs.size()) + " jobs -> " + c.manifest_path().string());
  return kOk;
}

int cmd_sweep_run(const ifx::RunConfig& c, const SweepFlags& f) {
  const auto ctx = ifx::load_context(c);
  ifx::SweepManifest m;
  if (std::filesystem::exists(c.manifest_path())) {
    m = ifx::load_manifest(c.manifest_path());
    ifx::check_compatible(m, ifx::plan(ctx));
  } else {
    m = ifx::plan(ctx);
    ifx::save_manifest(m, c.manifest_path());
  }
  ifx::run(m, ctx, run_options(c, f, m.count(ifx::JobStatus::pending)));
  return finish(m);
}

int cmd_sweep_resume(const ifx::RunConfig& c, const SweepFlags& f) {
  const auto ctx = ifx::load_context(c);
  auto stored = ifx::load_manifest(c.manifest_path());
  const std::size_t todo = stored.jobs.size() - stored.count(ifx::JobStatus::done);
  ifx::SweepManifest m;
  ifx::resume(m, ctx, run_options(c, f, todo));
  return finish(m);
}

ifx::Analysis load_analysis(const ifx::RunConfig& c) {
  const auto registry = ifx::load_registry(c.registry);
  const auto m = ifx::load_manifest(c.manifest_path());
  return ifx::analyze(m, registry, c.analysis);
}

int cmd_analyze(const ifx::RunConfig& c) {
  const auto a = load_analysis(c);
  ifx::write_analysis(a, c.analysis_dir());
  log("analysis -> " + c.analysis_dir().string());
  if (!a.convergence.outliers.outliers.empty()) {
    std::string list;
    for (const auto& o : a.convergence.outliers.outliers) list += " " + o;
    log("convergence outliers:" + list);
  }
  return kOk;
}

int cmd_report(const ifx::RunConfig& c) {
  const auto a = load_analysis(c);
  ifx::write_analysis(a, c.analysis_dir());
  const auto dir = c.output_dir / "report";
  ifx::write_report(a, dir);
  log("report -> " + dir.string());
  return kOk;
}

int cmd_similarity(const ifx::RunConfig& c, const std::string& embeddings_dir) {
  const auto registry = ifx::load_registry(c.registry);
  std::vector<ifx::EmbeddingSet> sets;
  if (!embeddings_dir.empty()) {
    for (const auto& spec : registry) {
      auto set = ifx::load_external_embeddings(std::filesystem::path(embeddings_dir) /
                                               (spec.code + ".emb"));
      if (set.code != spec.code) throw ifx::Error("embedding file code mismatch for " + spec.code);
      sets.push_back(std::move(set));
    }
  } else {
    std::vector<ifx::SyntheticLanguageSpec> specs;
    for (const auto& spec : registry) {
      if (!ifx::is_synthetic_ref(spec.corpus_source)) {
        throw ifx::Error("own-model similarity needs synthetic languages; pass --embeddings for " +
                         spec.code);
      }
      specs.push_back(ifx::parse_synthetic_ref(spec.code, spec.corpus_source));
    }
    const auto parallel = ifx::make_parallel_eval(
        specs, static_cast<std::size_t>(c.data.parallel_sentences),
        ifx::derive_seed(c.data.split_seed, "parallel"));
    const auto vocab = ifx::load_vocab(c.vocab_path());
    for (const auto& spec : registry) {
      const auto model =
          ifx::load_checkpoint(ifx::checkpoint_path(c.checkpoint_dir(), ifx::mono_job_id(spec.code)));
      sets.push_back(ifx::embed_corpus(model, vocab, parallel.at(spec.code)));
    }
  }
  const auto sim = ifx::similarity_matrix(sets);
  const auto dir = c.analysis_dir() / "similarity";
  std::filesystem::create_directories(dir);
  ifx::save_matrix(sim, dir / "similarity_matrix.csv");
  const auto a = load_analysis(c);
  std::string table = "code,pearson,spearman,n\n";
  for (const auto& spec : registry) {
    try {
      const auto row = ifx::row_compare(a.interference, sim, spec.code);
      ifx::write_file_atomic(dir / ("scatter_" + spec.code + ".csv"), ifx::to_csv(row));
      table += spec.code + "," + ifx::format_double(row.pearson) + "," +
               ifx::format_double(row.spearman) + "," + std::to_string(row.partners.size()) + "\n";
    } catch (const ifx::Error& e) {
      log(spec.code + ": " + e.what());
    }
  }
  ifx::write_file_atomic(dir / "row_correlations.csv", table);
  log("similarity -> " + dir.string());
  return kOk;
}

int cmd_probe(const ifx::RunConfig& c, std::string target) {
  if (target.empty()) target = c.probe.target;
  if (target.empty()) throw ConfigError("probe needs a target (--target or probe.target)");
  const auto registry = ifx::load_registry(c.registry);
  const auto& spec = registry.at(target);
  if (!ifx::is_synthetic_ref(spec.corpus_source)) {
    throw ifx::Error("probe tasks are synthesized; " + target + " is not a synthetic language");
  }
  const auto a = load_analysis(c);
  const auto partners =
      ifx::choose_partners(a.interference, target, static_cast<std::size_t>(c.probe.low_partners),
                           static_cast<std::size_t>(c.probe.high_partners));
  auto opts = c.probe.task;
  opts.seed = ifx::derive_seed(c.probe.task.seed, "task");
  const auto task = ifx::make_probe_task(ifx::parse_synthetic_ref(target, spec.corpus_source), opts);
  std::vector<std::uint64_t> seeds;
  for (std::int64_t s = 0; s < c.probe.seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
  const auto vocab = ifx::load_vocab(c.vocab_path());
  const auto report =
      ifx::interference_delta(target, partners, c.checkpoint_dir(), vocab, task, seeds);
  const auto dir = c.output_dir / "probe";
  std::filesystem::create_directories(dir);
  ifx::write_file_atomic(dir / ("delta_" + target + ".json"), ifx::to_json(report));
  char buf[128];
  std::snprintf(buf, sizeof buf, "low %.4f  high %.4f  delta %+.4f", report.low_average,
                report.high_average, report.delta);
  log(target + ": " + buf);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual interference sweeps for small transformer encoders"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "INI run configuration")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "Override a config value: section.key=value");
  };

  auto* gen = app.add_subcommand("gen-corpus", "Generate or load corpora and write splits");
  add_common(gen);
  auto* tok = app.add_subcommand("train-tokenizer", "Train the shared BPE vocabulary");
  add_common(tok);

  SweepFlags flags;
  auto* sweep = app.add_subcommand("sweep", "Plan, run or resume the training sweep");
  sweep->require_subcommand(1);
  auto* plan = sweep->add_subcommand("plan", "Write a manifest of pending jobs");
  add_common(plan);
  plan->add_flag("--force", flags.force, "Replace an existing manifest");
  auto* run = sweep->add_subcommand("run", "Run pending jobs (plans first if needed)");
  auto* resume = sweep->add_subcommand("resume", "Rerun failed and interrupted jobs");
  for (auto* s : {run, resume}) {
    add_common(s);
    s->add_option("-w,--workers", flags.workers, "Concurrent jobs")->check(CLI::PositiveNumber);
    s->add_option("--inject-nan", flags.inject_nan, "Testing: force a NaN loss in this job");
    s->add_option("--inject-step", flags.inject_step, "Testing: step of the injected NaN");
  }

  auto* analyze = app.add_subcommand("analyze", "Loss and interference matrices with statistics");
  add_common(analyze);
  std::string embeddings_dir;
  auto* sim = app.add_subcommand("similarity", "Embedding similarity versus interference");
  add_common(sim);
  sim->add_option("--embeddings", embeddings_dir, "Directory of <code>.emb files")
      ->check(CLI::ExistingDirectory);
  std::string target;
  auto* probe = app.add_subcommand("probe", "Downstream probe under low/high interference");
  add_common(probe);
  probe->add_option("--target", target, "Target language code");
  auto* report = app.add_subcommand("report", "Heatmaps and summary.json");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return e.get_exit_code() == 0 ? rc : kUsage;
  }

  try {
    const auto c = load_config(common);
    if (gen->parsed()) return cmd_gen_corpus(c);
    if (tok->parsed()) return cmd_train_tokenizer(c);
    if (plan->parsed()) return cmd_sweep_plan(c, flags);
    if (run->parsed()) return cmd_sweep_run(c, flags);
    if (resume->parsed()) return cmd_sweep_resume(c, flags);
    if (analyze->parsed()) return cmd_analyze(c);
    if (sim->parsed()) return cmd_similarity(c, embeddings_dir);
    if (probe->parsed()) return cmd_probe(c, target);
    if (report->parsed()) return cmd_report(c);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
