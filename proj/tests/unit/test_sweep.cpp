#include <cmath>
#include <filesystem>

#include "../support/fixtures.hpp"
#include "doctest.h"
#include "ifx/analytics.hpp"
#include "ifx/sweep.hpp"

using namespace ifx;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("ifx_sweep_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("job ids") {
  CHECK(mono_job_id("a_Latn") == "mono:a_Latn");
  CHECK(bilingual_job_id("b_Grek", "a_Latn") == bilingual_job_id("a_Latn", "b_Grek"));
  CHECK(to_string(parse_job_status("failed")) == "failed");
  CHECK_THROWS_AS(parse_job_status("stuck"), Error);
  CHECK(checkpoint_path("ck", mono_job_id("a_Latn")).filename() == "mono-a_Latn.ckpt");
}

TEST_CASE("plan sizes") {
  const auto cfg = testing::quick_config();
  for (int n : {2, 4}) {
    const auto ctx = testing::quick_context(parse_registry(testing::synth_registry(n)), cfg);
    const auto m = plan(ctx);
    CHECK(m.jobs.size() == static_cast<std::size_t>(n + n * (n - 1) / 2));
    CHECK(m.count(JobStatus::pending) == m.jobs.size());
    CHECK(m.jobs[0].languages.size() == 1);
    CHECK(m.jobs.back().languages.size() == 2);
  }
  CHECK_THROWS_AS(plan(testing::quick_context(parse_registry(testing::synth_registry(1)), cfg)), Error);
}

TEST_CASE("83 languages plan 3486 jobs") {
  auto cfg = testing::quick_config();
  cfg.data.sentences = 40;
  cfg.data.eval_sentences = 5;
  cfg.data.tokenizer_vocab = 300;
  const auto ctx = testing::quick_context(parse_registry(testing::synth_registry(83, 12)), cfg);
  const auto m = plan(ctx);
  CHECK(m.jobs.size() == 3486u);
  std::size_t mono = 0;
  for (const auto& j : m.jobs) mono += j.languages.size() == 1 ? 1 : 0;
  CHECK(mono == 83u);
}

TEST_CASE("schedule independence, failures and resume") {
  const auto cfg = testing::quick_config();
  const Registry reg = parse_registry(testing::synth_registry(4));
  const auto ctx = testing::quick_context(reg, cfg);

  auto serial = plan(ctx);
  run(serial, ctx, RunOptions{1});
  CHECK(serial.count(JobStatus::done) == 10);
  auto parallel = plan(ctx);
  run(parallel, ctx, RunOptions{8});
  CHECK(serial.results() == parallel.results());
  CHECK(serial.results().size() == 4 + 2 * 6);

  // one job fails; its two cells disappear and the others still complete
  const auto dir = fresh_dir("fail");
  RunOptions opts;
  opts.workers = 2;
  opts.manifest_path = dir / "manifest.json";
  const std::string victim = bilingual_job_id("l0_Latn", "l2_Grek");
  opts.on_loss = [&](const Job& job, std::int64_t step, double& loss) {
    if (job.id == victim && step == 3) loss = INFINITY;
  };
  auto m = plan(ctx);
  save_manifest(m, opts.manifest_path);
  const auto summary = run(m, ctx, opts);
  CHECK(summary.failed == 1);
  CHECK(summary.done == 9);
  CHECK(m.find(victim)->status == JobStatus::failed);
  CHECK_FALSE(m.find(victim)->error.empty());
  const auto L = assemble_loss_matrix(m, reg);
  CHECK(L.present_count() == 14);

  // resume reruns exactly the failed job
  opts.on_loss = nullptr;
  std::size_t reran = 0;
  opts.on_job_finished = [&](const Job&) { ++reran; };
  SweepManifest resumed;
  resume(resumed, ctx, opts);
  CHECK(reran == 1);
  CHECK(resumed.results() == serial.results());

  // nothing left to do
  reran = 0;
  resume(resumed, ctx, opts);
  CHECK(reran == 0);
}

TEST_CASE("resume reruns every failed job") {
  const auto cfg = testing::quick_config();
  const auto ctx = testing::quick_context(parse_registry(testing::synth_registry(4)), cfg);
  const auto dir = fresh_dir("three");
  RunOptions opts;
  opts.manifest_path = dir / "manifest.json";
  auto m = plan(ctx);
  run(m, ctx, opts);
  for (std::size_t i : {1u, 5u, 8u}) {
    m.jobs[i].status = JobStatus::failed;
    m.jobs[i].error = "injected";
  }
  save_manifest(m, opts.manifest_path);
  std::size_t reran = 0;
  opts.on_job_finished = [&](const Job&) { ++reran; };
  resume(m, ctx, opts);
  CHECK(reran == 3);
  CHECK(m.count(JobStatus::done) == 10);
}

TEST_CASE("changed configuration is refused on resume") {
  auto cfg = testing::quick_config();
  const Registry reg = parse_registry(testing::synth_registry(3));
  const auto ctx = testing::quick_context(reg, cfg);
  const auto dir = fresh_dir("mismatch");
  RunOptions opts;
  opts.manifest_path = dir / "manifest.json";
  save_manifest(plan(ctx), opts.manifest_path);

  cfg.train.peak_lr *= 2.0;
  const auto changed = testing::quick_context(reg, cfg);
  SweepManifest m;
  CHECK_THROWS_WITH_AS(resume(m, changed, opts), doctest::Contains("config hash mismatch"), Error);
}

TEST_CASE("manifest json round-trip") {
  const auto cfg = testing::quick_config();
  const auto ctx = testing::quick_context(parse_registry(testing::synth_registry(3)), cfg);
  auto m = plan(ctx);
  run(m, ctx, RunOptions{});
  m.jobs[2].status = JobStatus::failed;
  m.jobs[2].error = "non-finite loss \"quoted\"";
  m.jobs[2].losses.clear();
  const std::string text = to_json(m);
  const auto back = parse_manifest(text);
  CHECK(to_json(back) == text);
  CHECK(back.results() == m.results());

  CHECK_THROWS_AS(parse_manifest("{}"), Error);
  CHECK_THROWS_AS(parse_manifest(text.substr(0, text.size() / 2)), Error);
}
