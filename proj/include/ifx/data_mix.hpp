#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ifx/common.hpp"
#include "ifx/tokenizer.hpp"

namespace ifx {

// A language's training split, already encoded as [cls] ... [sep] sequences.
struct EncodedCorpus {
  std::string code;
  std::vector<std::vector<TokenId>> sequences;
};

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocab& vocab, std::size_t max_len);

// One (monolingual) or two (bilingual) languages with equal sentence counts.
struct DataMix {
  std::vector<std::shared_ptr<const EncodedCorpus>> languages;

  void validate() const;
};

// Sentences for one training step plus the language each came from.
struct MixedBatch {
  std::vector<const std::vector<TokenId>*> sequences;
  std::vector<std::size_t> language;
};

// Bilingual draws pick language A or B with probability 1/2 per sentence and
// then a sentence uniformly with replacement from that language's split.
class BatchStream {
 public:
  BatchStream(const DataMix& mix, std::size_t batch_size, std::uint64_t seed);
  MixedBatch next();

 private:
  DataMix mix_;
  std::size_t batch_size_;
  Rng rng_;
};

inline BatchStream mix_batches(const DataMix& mix, std::size_t batch_size, std::uint64_t seed) {
  return BatchStream(mix, batch_size, seed);
}

}  // namespace ifx
