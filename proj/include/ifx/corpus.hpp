#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ifx/common.hpp"

namespace ifx {

struct SyntheticLanguageSpec {
  std::string code;
  std::int64_t vocab_size = 100;
  std::int64_t token_id_offset = 0;
  double zipf_exponent = 1.0;
  int markov_order = 1;
  int avg_sentence_len = 8;
  std::uint64_t seed = 0;
  // Latent sentence topics: topic t owns the ranks r with r % topics == t,
  // and each word is redrawn from the sentence's topic with probability
  // topic_tilt. 0 topics = plain Zipf/Markov text.
  int topics = 0;
  double topic_tilt = 0.5;

  void validate() const;
};

// "synth:vocab=60;offset=0;zipf=1.1;order=1;len=8;seed=7[;topics=3;tilt=0.4]".
// Missing keys keep their defaults.
bool is_synthetic_ref(std::string_view source);
SyntheticLanguageSpec parse_synthetic_ref(std::string_view code, std::string_view ref);
std::string to_synthetic_ref(const SyntheticLanguageSpec& spec);

enum class Provenance { synthetic, file };

struct Corpus {
  std::string code;
  std::vector<std::string> sentences;
  Provenance provenance = Provenance::synthetic;

  std::size_t size() const { return sentences.size(); }
  std::uint64_t hash() const;
};

struct SplitPair {
  Corpus train;
  Corpus eval;
  std::uint64_t seed = 0;
};

// Surface form of a global lexeme id in the given script (four-letter tag).
// Injective in the id for a fixed script; different scripts use disjoint
// alphabets.
std::string render_lexeme(std::string_view script_tag, std::int64_t lexeme_id);
bool script_supported(std::string_view script_tag);

// Sentence source for one synthetic language. Words follow a Zipf law over
// ranks 0..vocab_size-1 (rank r is lexeme token_id_offset + r). The sequence
// structure comes from a Markov chain over a fine grid of Zipf quantile cells
// with a doubly stochastic transition kernel, so every position's marginal
// stays exactly on the (grid-quantized) Zipf law.
class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(const SyntheticLanguageSpec& spec);

  const SyntheticLanguageSpec& spec() const { return spec_; }
  // Zipf probability of rank r.
  double zipf_probability(std::int64_t rank) const;
  // Inverse-CDF draw of a rank from u in [0, 1).
  std::int64_t zipf_rank(double u) const;

  std::vector<std::int64_t> sentence_ranks(Rng& rng) const;
  // Sentence tilted towards `topic`; requires spec().topics > 0.
  std::vector<std::int64_t> sentence_ranks(Rng& rng, int topic) const;
  std::string render(const std::vector<std::int64_t>& ranks) const;
  std::string render_with(std::string_view script_tag, std::int64_t offset, std::int64_t vocab,
                          const std::vector<std::int64_t>& ranks) const;

 private:
  std::size_t sentence_length(Rng& rng) const;

  SyntheticLanguageSpec spec_;
  std::string script_tag_;
  std::vector<double> cdf_;
  std::vector<std::int64_t> rank_of_cell_;
  std::vector<std::vector<std::uint32_t>> successors_;
  std::vector<std::vector<std::int64_t>> topic_members_;
  std::vector<std::vector<double>> topic_cdf_;
};

Corpus generate_synthetic(const SyntheticLanguageSpec& spec, std::size_t n_sentences);

Corpus load_text(const std::filesystem::path& path, std::string_view code);
void save_text(const Corpus& corpus, const std::filesystem::path& path);
bool valid_utf8(std::string_view s);

SplitPair split(const Corpus& corpus, std::size_t eval_n, std::uint64_t seed);

// Index-aligned pseudo-translations: line i of every output corpus renders
// the same abstract rank sequence (drawn once from the first spec, with
// `seed`, or the first spec's own seed when absent) in each language's own
// lexeme range and script.
std::map<std::string, Corpus> make_parallel_eval(const std::vector<SyntheticLanguageSpec>& specs,
                                                 std::size_t n);
std::map<std::string, Corpus> make_parallel_eval(const std::vector<SyntheticLanguageSpec>& specs,
                                                 std::size_t n, std::uint64_t seed);

}  // namespace ifx
