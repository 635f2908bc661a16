#include "ifx/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>
#include <thread>

#include "json.hpp"

namespace ifx {

using nlohmann::ordered_json;

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::pending: return "pending";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "pending";
}

JobStatus parse_job_status(std::string_view s) {
  if (s == "pending") return JobStatus::pending;
  if (s == "running") return JobStatus::running;
  if (s == "done") return JobStatus::done;
  if (s == "failed") return JobStatus::failed;
  throw Error("unknown job status: " + std::string(s));
}

std::string mono_job_id(std::string_view code) { return "mono:" + std::string(code); }

std::string bilingual_job_id(std::string_view a, std::string_view b) {
  if (a == b) throw Error("bilingual job needs two distinct languages");
  if (b < a) std::swap(a, b);
  return "bi:" + std::string(a) + "+" + std::string(b);
}

ResultsTable SweepManifest::results() const {
  ResultsTable table;
  for (const auto& job : jobs) {
    if (job.status != JobStatus::done) continue;
    if (job.languages.size() == 1) {
      const auto& a = job.languages[0];
      table[{a, a}] = job.losses.at(a);
    } else {
      const auto& a = job.languages[0];
      const auto& b = job.languages[1];
      table[{a, b}] = job.losses.at(a);
      table[{b, a}] = job.losses.at(b);
    }
  }
  return table;
}

std::size_t SweepManifest::count(JobStatus status) const {
  return static_cast<std::size_t>(
      std::count_if(jobs.begin(), jobs.end(), [&](const Job& j) { return j.status == status; }));
}

const Job* SweepManifest::find(std::string_view id) const {
  for (const auto& j : jobs) {
    if (j.id == id) return &j;
  }
  return nullptr;
}

namespace {

ordered_json model_json(const ModelConfig& m) {
  ordered_json j;
  j["n_layers"] = m.n_layers;
  j["d_model"] = m.d_model;
  j["n_heads"] = m.n_heads;
  j["d_ffn"] = m.d_ffn;
  j["max_len"] = m.max_len;
  j["vocab_size"] = m.vocab_size;
  return j;
}

ModelConfig model_from(const ordered_json& j) {
  ModelConfig m;
  m.n_layers = j.at("n_layers").get<std::int64_t>();
  m.d_model = j.at("d_model").get<std::int64_t>();
  m.n_heads = j.at("n_heads").get<std::int64_t>();
  m.d_ffn = j.at("d_ffn").get<std::int64_t>();
  m.max_len = j.at("max_len").get<std::int64_t>();
  m.vocab_size = j.at("vocab_size").get<std::int64_t>();
  return m;
}

ordered_json train_json(const TrainConfig& t) {
  ordered_json j;
  j["total_steps"] = t.total_steps;
  j["warmup_steps"] = t.warmup_steps;
  j["peak_lr"] = t.peak_lr;
  j["batch_size"] = t.batch_size;
  j["mask_ratio"] = t.mask_ratio;
  j["adam_beta1"] = t.adam_beta1;
  j["adam_beta2"] = t.adam_beta2;
  j["adam_eps"] = t.adam_eps;
  j["weight_decay"] = t.weight_decay;
  j["grad_clip_norm"] = t.grad_clip_norm ? ordered_json(*t.grad_clip_norm) : ordered_json();
  return j;
}

TrainConfig train_from(const ordered_json& j) {
  TrainConfig t;
  t.total_steps = j.at("total_steps").get<std::int64_t>();
  t.warmup_steps = j.at("warmup_steps").get<std::int64_t>();
  t.peak_lr = j.at("peak_lr").get<double>();
  t.batch_size = j.at("batch_size").get<std::int64_t>();
  t.mask_ratio = j.at("mask_ratio").get<double>();
  t.adam_beta1 = j.at("adam_beta1").get<double>();
  t.adam_beta2 = j.at("adam_beta2").get<double>();
  t.adam_eps = j.at("adam_eps").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  const auto& clip = j.at("grad_clip_norm");
  if (clip.is_null()) {
    t.grad_clip_norm.reset();
  } else {
    t.grad_clip_norm = clip.get<double>();
  }
  return t;
}

ordered_json losses_json(const std::map<std::string, double>& losses) {
  ordered_json j = ordered_json::object();
  for (const auto& [code, loss] : losses) j[code] = loss;
  return j;
}

std::map<std::string, double> losses_from(const ordered_json& j) {
  std::map<std::string, double> out;
  for (const auto& [code, loss] : j.items()) out[code] = loss.get<double>();
  return out;
}

void hash_model(Fnv1a& h, const ModelConfig& m) {
  h.i64(m.n_layers).i64(m.d_model).i64(m.n_heads).i64(m.d_ffn).i64(m.max_len).i64(m.vocab_size);
}

void hash_train(Fnv1a& h, const TrainConfig& t) {
  h.i64(t.total_steps).i64(t.warmup_steps).f64(t.peak_lr).i64(t.batch_size).f64(t.mask_ratio);
  h.f64(t.adam_beta1).f64(t.adam_beta2).f64(t.adam_eps).f64(t.weight_decay);
  h.u64(t.grad_clip_norm ? 1 : 0).f64(t.grad_clip_norm.value_or(0.0));
}

}  // namespace

std::string to_json(const SweepManifest& m) {
  ordered_json j;
  j["schema"] = "ifx-sweep-manifest";
  j["schema_version"] = SweepManifest::kSchemaVersion;
  j["registry_hash"] = hex64(m.registry_hash);
  j["vocab_hash"] = hex64(m.vocab_hash);
  j["global_seed"] = m.global_seed;
  j["eval_mask_seed"] = m.mask_seed;
  j["mixing"] = kMixingScheme;
  j["loss_averaging"] = "mean over masked tokens";
  j["languages"] = m.languages;
  j["model"] = model_json(m.model);
  j["train"] = train_json(m.train);
  ordered_json jobs = ordered_json::array();
  for (const auto& job : m.jobs) {
    ordered_json r;
    r["id"] = job.id;
    r["languages"] = job.languages;
    r["seed"] = hex64(job.seed);
    r["config_hash"] = hex64(job.config_hash);
    r["status"] = to_string(job.status);
    r["attempts"] = job.attempts;
    r["error"] = job.error;
    r["initial_losses"] = losses_json(job.initial_losses);
    r["losses"] = losses_json(job.losses);
    r["wall_seconds"] = job.wall_seconds;
    jobs.push_back(std::move(r));
  }
  j["jobs"] = std::move(jobs);
  // Rows follow registry order so the table reads like the loss matrix.
  ordered_json results = ordered_json::array();
  const auto table = m.results();
  for (const auto& a : m.languages) {
    for (const auto& b : m.languages) {
      auto it = table.find({a, b});
      if (it == table.end()) continue;
      results.push_back(ordered_json{{"eval", a}, {"secondary", b}, {"loss", it->second}});
    }
  }
  j["results"] = std::move(results);
  return j.dump(2) + "\n";
}

SweepManifest parse_manifest(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("corrupt manifest: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "ifx-sweep-manifest") {
      throw Error("not a sweep manifest");
    }
    if (j.at("schema_version").get<int>() != SweepManifest::kSchemaVersion) {
      throw Error("unsupported manifest schema version");
    }
    SweepManifest m;
    m.registry_hash = parse_hex64(j.at("registry_hash").get<std::string>());
    m.vocab_hash = parse_hex64(j.at("vocab_hash").get<std::string>());
    m.global_seed = j.at("global_seed").get<std::uint64_t>();
    m.mask_seed = j.at("eval_mask_seed").get<std::uint64_t>();
    m.languages = j.at("languages").get<std::vector<std::string>>();
    m.model = model_from(j.at("model"));
    m.train = train_from(j.at("train"));
    for (const auto& r : j.at("jobs")) {
      Job job;
      job.id = r.at("id").get<std::string>();
      job.languages = r.at("languages").get<std::vector<std::string>>();
      job.seed = parse_hex64(r.at("seed").get<std::string>());
      job.config_hash = parse_hex64(r.at("config_hash").get<std::string>());
      job.status = parse_job_status(r.at("status").get<std::string>());
      job.attempts = r.at("attempts").get<int>();
      job.error = r.at("error").get<std::string>();
      job.initial_losses = losses_from(r.at("initial_losses"));
      job.losses = losses_from(r.at("losses"));
      job.wall_seconds = r.at("wall_seconds").get<double>();
      if (job.languages.empty() || job.languages.size() > 2) {
        throw Error("job " + job.id + " has a bad language list");
      }
      const std::string expected = job.languages.size() == 1
                                       ? mono_job_id(job.languages[0])
                                       : bilingual_job_id(job.languages[0], job.languages[1]);
      if (expected != job.id || (job.languages.size() == 2 && job.languages[1] < job.languages[0])) {
        throw Error("job id is not canonical: " + job.id);
      }
      if (job.status == JobStatus::done) {
        for (const auto& code : job.languages) {
          if (!job.losses.count(code)) throw Error("done job " + job.id + " lacks a loss");
        }
      }
      m.jobs.push_back(std::move(job));
    }
    ResultsTable stored;
    for (const auto& r : j.at("results")) {
      stored[{r.at("eval").get<std::string>(), r.at("secondary").get<std::string>()}] =
          r.at("loss").get<double>();
    }
    if (stored != m.results()) throw Error("results table disagrees with job records");
    return m;
  } catch (const Error& e) {
    throw Error(std::string("corrupt manifest: ") + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string("corrupt manifest: ") + e.what());
  }
}

void save_manifest(const SweepManifest& manifest, const std::filesystem::path& path) {
  write_file_atomic(path, to_json(manifest));
}

SweepManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path));
}

SweepContext SweepContext::build(Registry registry, Vocab vocab,
                                 const std::map<std::string, SplitPair>& splits,
                                 ModelConfig model, TrainConfig train, std::uint64_t global_seed,
                                 std::uint64_t mask_seed) {
  SweepContext ctx;
  model.vocab_size = static_cast<std::int64_t>(vocab.size());
  model.validate();
  train.validate();
  const auto max_len = static_cast<std::size_t>(model.max_len);
  for (const auto& spec : registry) {
    auto it = splits.find(spec.code);
    if (it == splits.end()) throw Error("no corpus split for " + spec.code);
    LanguageData d;
    d.train = it->second.train;
    d.eval = it->second.eval;
    d.encoded = std::make_shared<const EncodedCorpus>(encode_corpus(d.train, vocab, max_len));
    if (d.encoded->sequences.empty()) throw Error("empty training split for " + spec.code);
    auto es = prepare_eval(d.eval, vocab, max_len, mask_seed);
    es.code = spec.code;
    d.eval_set = std::make_shared<const EvalSet>(std::move(es));
    ctx.data.emplace(spec.code, std::move(d));
  }
  ctx.registry = std::move(registry);
  ctx.vocab = std::move(vocab);
  ctx.model = model;
  ctx.train = train;
  ctx.global_seed = global_seed;
  ctx.mask_seed = mask_seed;
  return ctx;
}

std::uint64_t SweepContext::job_seed(std::string_view job_id) const {
  return derive_seed(global_seed, job_id);
}

std::uint64_t SweepContext::config_hash(const Job& job) const {
  Fnv1a h;
  h.str(job.id).u64(job.seed);
  hash_model(h, model);
  hash_train(h, train);
  h.u64(vocab.hash()).u64(mask_seed);
  for (const auto& code : job.languages) {
    const auto& d = data.at(code);
    h.str(code).u64(d.train.hash()).u64(d.eval.hash());
  }
  return h.digest();
}

SweepManifest plan(const SweepContext& ctx) {
  const auto codes = ctx.registry.codes();
  if (codes.size() < 2) throw Error("a sweep needs at least two languages");
  SweepManifest m;
  m.registry_hash = ctx.registry.hash();
  m.vocab_hash = ctx.vocab.hash();
  m.global_seed = ctx.global_seed;
  m.mask_seed = ctx.mask_seed;
  m.languages = codes;
  m.model = ctx.model;
  m.model.seed = 0;
  m.train = ctx.train;
  m.train.seed = 0;
  auto add = [&](std::vector<std::string> langs, std::string id) {
    Job job;
    job.id = std::move(id);
    job.languages = std::move(langs);
    job.seed = ctx.job_seed(job.id);
    job.config_hash = ctx.config_hash(job);
    m.jobs.push_back(std::move(job));
  };
  for (const auto& c : codes) add({c}, mono_job_id(c));
  std::vector<std::string> sorted = codes;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t k = i + 1; k < sorted.size(); ++k) {
      add({sorted[i], sorted[k]}, bilingual_job_id(sorted[i], sorted[k]));
    }
  }
  return m;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::string_view job_id) {
  std::string name(job_id);
  std::replace(name.begin(), name.end(), ':', '-');
  return dir / (name + ".ckpt");
}

namespace {

struct JobOutput {
  std::map<std::string, double> initial;
  std::map<std::string, double> final;
  double wall_seconds = 0.0;
};

JobOutput execute(const Job& job, const SweepContext& ctx, const RunOptions& options) {
  ModelConfig mc = ctx.model;
  mc.seed = job.seed;
  TrainConfig tc = ctx.train;
  tc.seed = job.seed;
  DataMix mix;
  TrainHooks hooks;
  for (const auto& code : job.languages) {
    const auto& d = ctx.data.at(code);
    mix.languages.push_back(d.encoded);
    hooks.eval_sets.push_back(d.eval_set.get());
  }
  if (options.on_loss) {
    hooks.on_loss = [&](std::int64_t step, double& loss) { options.on_loss(job, step, loss); };
  }
  auto outcome = train(init(mc), mix, tc, hooks);
  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(outcome.model, checkpoint_path(options.checkpoint_dir, job.id));
  }
  if (!options.report_dir.empty()) {
    auto path = checkpoint_path(options.report_dir, job.id).replace_extension(".json");
    write_file_atomic(path, to_json(outcome.report));
  }
  return JobOutput{outcome.report.initial_losses, outcome.report.final_losses,
                   outcome.report.wall_seconds};
}

}  // namespace

RunSummary run(SweepManifest& manifest, const SweepContext& ctx, const RunOptions& options) {
  if (options.workers == 0) throw Error("workers must be positive");
  for (const auto& code : manifest.languages) {
    if (!ctx.data.count(code)) throw Error("sweep context lacks data for " + code);
  }
  for (const auto& dir : {options.checkpoint_dir, options.report_dir}) {
    if (!dir.empty()) std::filesystem::create_directories(dir);
  }
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < manifest.jobs.size(); ++i) {
    if (manifest.jobs[i].status == JobStatus::pending) queue.push_back(i);
  }

  std::mutex lock;
  std::atomic<std::size_t> next{0};
  RunSummary summary;
  std::exception_ptr fatal;
  auto persist = [&] {
    if (!options.manifest_path.empty()) save_manifest(manifest, options.manifest_path);
  };

  auto worker = [&] {
    for (;;) {
      const std::size_t q = next.fetch_add(1);
      if (q >= queue.size()) return;
      Job snapshot;
      {
        std::lock_guard guard(lock);
        if (fatal) return;
        Job& job = manifest.jobs[queue[q]];
        job.status = JobStatus::running;
        ++job.attempts;
        job.error.clear();
        job.losses.clear();
        job.initial_losses.clear();
        try {
          persist();
        } catch (...) {
          fatal = std::current_exception();
          return;
        }
        snapshot = job;
      }
      JobOutput out;
      std::string error;
      try {
        out = execute(snapshot, ctx, options);
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard guard(lock);
      Job& job = manifest.jobs[queue[q]];
      ++summary.ran;
      if (error.empty()) {
        job.status = JobStatus::done;
        job.initial_losses = std::move(out.initial);
        job.losses = std::move(out.final);
        job.wall_seconds = out.wall_seconds;
        ++summary.done;
      } else {
        job.status = JobStatus::failed;
        job.error = error;
        ++summary.failed;
      }
      try {
        persist();
      } catch (...) {
        if (!fatal) fatal = std::current_exception();
        return;
      }
      if (options.on_job_finished) options.on_job_finished(job);
    }
  };

  const std::size_t n = std::min(options.workers, std::max<std::size_t>(queue.size(), 1));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

void check_compatible(const SweepManifest& stored, const SweepManifest& planned) {
  if (stored.registry_hash != planned.registry_hash || stored.languages != planned.languages) {
    throw Error("config hash mismatch: registry differs from the manifest");
  }
  if (stored.vocab_hash != planned.vocab_hash) {
    throw Error("config hash mismatch: vocabulary differs from the manifest");
  }
  if (stored.jobs.size() != planned.jobs.size()) {
    throw Error("config hash mismatch: job list differs from the manifest");
  }
  for (std::size_t i = 0; i < stored.jobs.size(); ++i) {
    const auto& a = stored.jobs[i];
    const auto& b = planned.jobs[i];
    if (a.id != b.id) throw Error("config hash mismatch: job list differs from the manifest");
    if (a.config_hash != b.config_hash || a.seed != b.seed) {
      throw Error("config hash mismatch for job " + a.id);
    }
  }
}

RunSummary resume(SweepManifest& manifest, const SweepContext& ctx, const RunOptions& options) {
  if (options.manifest_path.empty()) throw Error("resume needs a manifest path");
  manifest = load_manifest(options.manifest_path);
  check_compatible(manifest, plan(ctx));
  for (auto& job : manifest.jobs) {
    if (job.status == JobStatus::running || job.status == JobStatus::failed) {
      job.status = JobStatus::pending;
    }
  }
  return run(manifest, ctx, options);
}

}  // namespace ifx
