#include "ifx/data_mix.hpp"

namespace ifx {

EncodedCorpus encode_corpus(const Corpus& corpus, const Vocab& vocab, std::size_t max_len) {
  EncodedCorpus out{corpus.code, {}};
  out.sequences.reserve(corpus.size());
  for (const auto& s : corpus.sentences) {
    auto ids = encode(vocab, s, max_len);
    if (ids.size() > 2) out.sequences.push_back(std::move(ids));
  }
  if (out.sequences.empty()) throw Error("corpus " + corpus.code + " encodes to no usable sequences");
  return out;
}

void DataMix::validate() const {
  if (languages.empty() || languages.size() > 2) {
    throw Error("data mix must hold one or two languages");
  }
  for (const auto& l : languages) {
    if (!l || l->sequences.empty()) throw Error("data mix has an empty training split");
  }
  if (languages.size() == 2 && languages[0]->sequences.size() != languages[1]->sequences.size()) {
    throw Error("bilingual mix needs equal sentence counts (" + languages[0]->code + ": " +
                std::to_string(languages[0]->sequences.size()) + ", " + languages[1]->code + ": " +
                std::to_string(languages[1]->sequences.size()) + ")");
  }
}

BatchStream::BatchStream(const DataMix& mix, std::size_t batch_size, std::uint64_t seed)
    : mix_(mix), batch_size_(batch_size), rng_(derive_seed(seed, "mix")) {
  mix_.validate();
  if (batch_size_ == 0) throw Error("batch size must be positive");
}

MixedBatch BatchStream::next() {
  MixedBatch out;
  out.sequences.reserve(batch_size_);
  out.language.reserve(batch_size_);
  for (std::size_t i = 0; i < batch_size_; ++i) {
    const std::size_t lang = mix_.languages.size() == 1 ? 0 : rng_.below(2);
    const auto& seqs = mix_.languages[lang]->sequences;
    out.sequences.push_back(&seqs[rng_.below(seqs.size())]);
    out.language.push_back(lang);
  }
  return out;
}

}  // namespace ifx
