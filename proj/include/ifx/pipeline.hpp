#pragma once

#include <map>
#include <string>

#include "ifx/config.hpp"
#include "ifx/corpus.hpp"
#include "ifx/registry.hpp"
#include "ifx/sweep.hpp"
#include "ifx/tokenizer.hpp"

namespace ifx {

// Full corpus of one registry language: generated for synth: sources, read
// (first data.sentences lines) for files relative to the registry.
Corpus source_corpus(const LanguageSpec& spec, const Registry& registry, const DataConfig& data);

std::map<std::string, SplitPair> make_splits(const Registry& registry, const DataConfig& data);

// <corpus_dir>/<code>.train.txt and <code>.eval.txt.
void save_splits(const std::map<std::string, SplitPair>& splits,
                 const std::filesystem::path& corpus_dir);
std::map<std::string, SplitPair> load_splits(const Registry& registry,
                                             const std::filesystem::path& corpus_dir);

Vocab train_shared_vocab(const Registry& registry, const std::map<std::string, SplitPair>& splits,
                         const DataConfig& data);

SweepContext make_context(const RunConfig& config, Registry registry,
                          const std::map<std::string, SplitPair>& splits, Vocab vocab);
// Loads registry, splits and vocab from the paths in the config.
SweepContext load_context(const RunConfig& config);

}  // namespace ifx
