#include "ifx/pipeline.hpp"

namespace ifx {

Corpus source_corpus(const LanguageSpec& spec, const Registry& registry, const DataConfig& data) {
  const auto n = static_cast<std::size_t>(data.sentences);
  if (is_synthetic_ref(spec.corpus_source)) {
    return generate_synthetic(parse_synthetic_ref(spec.code, spec.corpus_source), n);
  }
  std::filesystem::path path = spec.corpus_source;
  if (path.is_relative()) path = registry.base_dir / path;
  Corpus c = load_text(path, spec.code);
  if (c.size() > n) c.sentences.resize(n);
  return c;
}

std::map<std::string, SplitPair> make_splits(const Registry& registry, const DataConfig& data) {
  std::map<std::string, SplitPair> out;
  for (const auto& spec : registry) {
    const Corpus c = source_corpus(spec, registry, data);
    if (c.size() <= static_cast<std::size_t>(data.eval_sentences)) {
      throw Error("corpus of " + spec.code + " has only " + std::to_string(c.size()) +
                  " sentences; need more than data.eval_sentences");
    }
    out.emplace(spec.code, split(c, static_cast<std::size_t>(data.eval_sentences),
                                 derive_seed(data.split_seed, spec.code)));
  }
  return out;
}

void save_splits(const std::map<std::string, SplitPair>& splits,
                 const std::filesystem::path& corpus_dir) {
  std::filesystem::create_directories(corpus_dir);
  for (const auto& [code, s] : splits) {
    save_text(s.train, corpus_dir / (code + ".train.txt"));
    save_text(s.eval, corpus_dir / (code + ".eval.txt"));
  }
}

std::map<std::string, SplitPair> load_splits(const Registry& registry,
                                             const std::filesystem::path& corpus_dir) {
  std::map<std::string, SplitPair> out;
  for (const auto& spec : registry) {
    SplitPair s;
    s.train = load_text(corpus_dir / (spec.code + ".train.txt"), spec.code);
    s.eval = load_text(corpus_dir / (spec.code + ".eval.txt"), spec.code);
    out.emplace(spec.code, std::move(s));
  }
  return out;
}

Vocab train_shared_vocab(const Registry& registry, const std::map<std::string, SplitPair>& splits,
                         const DataConfig& data) {
  std::vector<Corpus> train;
  for (const auto& spec : registry) train.push_back(splits.at(spec.code).train);
  return train_bpe(train, static_cast<std::size_t>(data.tokenizer_vocab),
                   BpeOptions{data.byte_fallback});
}

SweepContext make_context(const RunConfig& config, Registry registry,
                          const std::map<std::string, SplitPair>& splits, Vocab vocab) {
  return SweepContext::build(std::move(registry), std::move(vocab), splits, config.model,
                             config.train, config.sweep.global_seed, config.data.mask_seed);
}

SweepContext load_context(const RunConfig& config) {
  Registry registry = load_registry(config.registry);
  auto splits = load_splits(registry, config.corpus_dir);
  Vocab vocab = load_vocab(config.vocab_path());
  return make_context(config, std::move(registry), splits, std::move(vocab));
}

}  // namespace ifx
