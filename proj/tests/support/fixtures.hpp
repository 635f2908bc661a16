#pragma once

// Small in-memory sweeps for tests.

#include <string>

#include "ifx/config.hpp"
#include "ifx/pipeline.hpp"

namespace ifx::testing {

inline std::string synth_registry(int n, int vocab = 40) {
  static const char* tags[] = {"Latn", "Cyrl", "Grek", "Armn", "Hebr", "Arab", "Deva", "Geor"};
  static const char* names[] = {"Latin",  "Cyrillic", "Greek",      "Armenian",
                                "Hebrew", "Arabic",   "Devanagari", "Georgian"};
  std::string text = "code,script,family,resource_level,corpus_source\n";
  for (int i = 0; i < n; ++i) {
    text += "l" + std::to_string(i) + "_" + tags[i % 8] + "," + names[i % 8] + ",,";
    text += i % 2 == 0 ? "high" : "low";
    text += ",synth:vocab=" + std::to_string(vocab) + ";offset=" + std::to_string(100 * i) +
            ";zipf=1.1;order=1;len=6;seed=" + std::to_string(i + 1) + "\n";
  }
  return text;
}

// Very small model and data; each job trains in a few milliseconds.
inline RunConfig quick_config() {
  RunConfig c = RunConfig::preset("tiny");
  c.data.sentences = 160;
  c.data.eval_sentences = 30;
  c.data.tokenizer_vocab = 250;
  c.model.d_model = 8;
  c.model.n_heads = 2;
  c.model.d_ffn = 16;
  c.model.max_len = 16;
  c.train.total_steps = 12;
  c.train.warmup_steps = 3;
  c.train.batch_size = 4;
  return c;
}

inline SweepContext quick_context(const Registry& registry, const RunConfig& config) {
  const auto splits = make_splits(registry, config.data);
  return make_context(config, registry, splits, train_shared_vocab(registry, splits, config.data));
}

}  // namespace ifx::testing
