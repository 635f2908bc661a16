#include "ifx/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ifx {
namespace {

struct ScriptAlphabet {
  std::string_view tag;
  std::array<char32_t, 14> consonants;
  std::array<char32_t, 5> vowels;
};

template <std::size_t... I>
constexpr std::array<char32_t, sizeof...(I)> run_from(char32_t base, std::index_sequence<I...>) {
  return {static_cast<char32_t>(base + I)...};
}

constexpr ScriptAlphabet contiguous(std::string_view tag, char32_t base) {
  return ScriptAlphabet{tag, run_from(base, std::make_index_sequence<14>{}),
                        run_from(base + 14, std::make_index_sequence<5>{})};
}

const std::vector<ScriptAlphabet>& alphabets() {
  static const std::vector<ScriptAlphabet> table = {
      {"Latn",
       {U'b', U'd', U'f', U'g', U'k', U'l', U'm', U'n', U'p', U'r', U's', U't', U'v', U'z'},
       {U'a', U'e', U'i', U'o', U'u'}},
      {"Cyrl",
       {0x0431, 0x0432, 0x0433, 0x0434, 0x043A, 0x043B, 0x043C, 0x043D, 0x043F, 0x0440, 0x0441,
        0x0442, 0x0444, 0x0445},
       {0x0430, 0x0435, 0x0438, 0x043E, 0x0443}},
      {"Grek",
       {0x03B2, 0x03B3, 0x03B4, 0x03BA, 0x03BB, 0x03BC, 0x03BD, 0x03C0, 0x03C1, 0x03C3, 0x03C4,
        0x03C6, 0x03C7, 0x03B8},
       {0x03B1, 0x03B5, 0x03B9, 0x03BF, 0x03C5}},
      contiguous("Armn", 0x0561), contiguous("Hebr", 0x05D0), contiguous("Arab", 0x0628),
      contiguous("Deva", 0x0915), contiguous("Geor", 0x10D0), contiguous("Thai", 0x0E01),
      contiguous("Hang", 0xAC00), contiguous("Ethi", 0x1200), contiguous("Mymr", 0x1000),
      contiguous("Beng", 0x0995), contiguous("Telu", 0x0C15), contiguous("Knda", 0x0C95),
      contiguous("Mlym", 0x0D15),
  };
  return table;
}

const ScriptAlphabet* find_alphabet(std::string_view tag) {
  for (const auto& a : alphabets()) {
    if (a.tag == tag) return &a;
  }
  return nullptr;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string_view tag_of(std::string_view code) {
  const auto pos = code.find('_');
  return pos == std::string_view::npos ? std::string_view{} : code.substr(pos + 1);
}

constexpr std::size_t kCellsPerWord = 8;
constexpr std::array<double, 3> kSuccessorWeights{0.6, 0.3, 0.1};

}  // namespace

void SyntheticLanguageSpec::validate() const {
  if (vocab_size < 10) throw Error("synthetic spec " + code + ": vocab_size must be >= 10");
  if (token_id_offset < 0) throw Error("synthetic spec " + code + ": negative token_id_offset");
  if (avg_sentence_len < 3) throw Error("synthetic spec " + code + ": avg_sentence_len must be >= 3");
  if (!(zipf_exponent > 0.5 && zipf_exponent <= 2.0)) {
    throw Error("synthetic spec " + code + ": zipf_exponent must lie in (0.5, 2.0]");
  }
  if (markov_order != 1 && markov_order != 2) {
    throw Error("synthetic spec " + code + ": markov_order must be 1 or 2");
  }
  if (topics < 0 || topics > vocab_size) {
    throw Error("synthetic spec " + code + ": topics must lie in [0, vocab_size]");
  }
  if (topics == 1) throw Error("synthetic spec " + code + ": use 0 or at least 2 topics");
  if (!(topic_tilt >= 0.0 && topic_tilt <= 1.0)) {
    throw Error("synthetic spec " + code + ": tilt must lie in [0, 1]");
  }
  if (!script_supported(tag_of(code))) {
    throw Error("synthetic spec " + code + ": no alphabet for script '" +
                std::string(tag_of(code)) + "'");
  }
}

bool is_synthetic_ref(std::string_view source) { return source.starts_with("synth:"); }

SyntheticLanguageSpec parse_synthetic_ref(std::string_view code, std::string_view ref) {
  if (!is_synthetic_ref(ref)) throw Error("not a synthetic reference: " + std::string(ref));
  SyntheticLanguageSpec spec;
  spec.code = std::string(code);
  spec.seed = fnv1a(code);
  for (const auto& item : split(ref.substr(6), ';')) {
    if (trim(item).empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("malformed synthetic reference item: " + item);
    const auto key = trim(std::string_view(item).substr(0, eq));
    const auto value = std::string(trim(std::string_view(item).substr(eq + 1)));
    try {
      if (key == "vocab") spec.vocab_size = std::stoll(value);
      else if (key == "offset") spec.token_id_offset = std::stoll(value);
      else if (key == "zipf") spec.zipf_exponent = parse_double(value);
      else if (key == "order") spec.markov_order = std::stoi(value);
      else if (key == "len") spec.avg_sentence_len = std::stoi(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "topics") spec.topics = std::stoi(value);
      else if (key == "tilt") spec.topic_tilt = parse_double(value);
      else throw Error("unknown synthetic reference key: " + std::string(key));
    } catch (const std::logic_error&) {
      throw Error("malformed synthetic reference value for " + std::string(key) + ": " + value);
    }
  }
  spec.validate();
  return spec;
}

std::string to_synthetic_ref(const SyntheticLanguageSpec& spec) {
  return "synth:vocab=" + std::to_string(spec.vocab_size) +
         ";offset=" + std::to_string(spec.token_id_offset) +
         ";zipf=" + format_double(spec.zipf_exponent) + ";order=" +
         std::to_string(spec.markov_order) + ";len=" + std::to_string(spec.avg_sentence_len) +
         ";seed=" + std::to_string(spec.seed) +
         (spec.topics > 0 ? ";topics=" + std::to_string(spec.topics) +
                                ";tilt=" + format_double(spec.topic_tilt)
                          : std::string());
}

std::uint64_t Corpus::hash() const {
  Fnv1a h;
  h.str(code).u64(sentences.size());
  for (const auto& s : sentences) h.str(s);
  return h.digest();
}

bool script_supported(std::string_view script_tag) { return find_alphabet(script_tag) != nullptr; }

std::string render_lexeme(std::string_view script_tag, std::int64_t lexeme_id) {
  const auto* alpha = find_alphabet(script_tag);
  if (alpha == nullptr) throw Error("no alphabet for script '" + std::string(script_tag) + "'");
  if (lexeme_id < 0) throw Error("negative lexeme id");
  constexpr std::uint64_t n_vowels = 5;
  constexpr std::uint64_t syllables = 14 * n_vowels;
  // Bijective in the id: base-70 digits of (id + 70), least significant first,
  // so every word has at least two syllables.
  std::uint64_t n = static_cast<std::uint64_t>(lexeme_id) + syllables;
  std::string out;
  while (n > 0) {
    const auto syl = n % syllables;
    append_utf8(out, alpha->consonants[syl / n_vowels]);
    append_utf8(out, alpha->vowels[syl % n_vowels]);
    n /= syllables;
  }
  return out;
}

SyntheticGenerator::SyntheticGenerator(const SyntheticLanguageSpec& spec)
    : spec_(spec), script_tag_(tag_of(spec.code)) {
  spec_.validate();
  const auto v = static_cast<std::size_t>(spec_.vocab_size);
  cdf_.resize(v);
  double total = 0.0;
  for (std::size_t r = 0; r < v; ++r) {
    total += std::pow(static_cast<double>(r + 1), -spec_.zipf_exponent);
    cdf_[r] = total;
  }
  for (auto& c : cdf_) c /= total;
  cdf_.back() = 1.0;

  const std::size_t cells = kCellsPerWord * v;
  rank_of_cell_.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    rank_of_cell_[c] = zipf_rank((static_cast<double>(c) + 0.5) / static_cast<double>(cells));
  }
  Rng rng(derive_seed(spec_.seed, "transitions"));
  successors_.resize(kSuccessorWeights.size());
  for (auto& perm : successors_) {
    perm.resize(cells);
    std::iota(perm.begin(), perm.end(), 0U);
    for (std::size_t i = cells - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.below(i + 1)]);
    }
  }
  const auto k = static_cast<std::size_t>(spec_.topics);
  topic_members_.resize(k);
  topic_cdf_.resize(k);
  for (std::size_t r = 0; r < v && k > 0; ++r) {
    topic_members_[r % k].push_back(static_cast<std::int64_t>(r));
  }
  for (std::size_t t = 0; t < k; ++t) {
    double acc = 0.0;
    for (auto r : topic_members_[t]) topic_cdf_[t].push_back(acc += zipf_probability(r));
    for (auto& c : topic_cdf_[t]) c /= acc;
    topic_cdf_[t].back() = 1.0;
  }
}

double SyntheticGenerator::zipf_probability(std::int64_t rank) const {
  const auto r = static_cast<std::size_t>(rank);
  return r == 0 ? cdf_[0] : cdf_[r] - cdf_[r - 1];
}

std::int64_t SyntheticGenerator::zipf_rank(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto r = static_cast<std::int64_t>(it - cdf_.begin());
  return std::min<std::int64_t>(r, spec_.vocab_size - 1);
}

std::size_t SyntheticGenerator::sentence_length(Rng& rng) const {
  const auto avg = static_cast<std::uint64_t>(spec_.avg_sentence_len);
  return static_cast<std::size_t>(std::clamp<std::uint64_t>(rng.poisson(static_cast<double>(avg)),
                                                            3, 2 * avg));
}

std::vector<std::int64_t> SyntheticGenerator::sentence_ranks(Rng& rng) const {
  const std::size_t len = sentence_length(rng);
  const std::size_t cells = rank_of_cell_.size();
  std::vector<std::int64_t> ranks;
  ranks.reserve(len);
  std::size_t prev2 = rng.below(cells);
  std::size_t prev = rng.below(cells);
  for (std::size_t t = 0; t < len; ++t) {
    std::size_t cell;
    if (t == 0) {
      cell = prev;
    } else if (t == 1 && spec_.markov_order == 2) {
      cell = prev2;
    } else {
      const double u = rng.uniform();
      std::size_t j = 0;
      double acc = kSuccessorWeights[0];
      while (u >= acc && j + 1 < kSuccessorWeights.size()) acc += kSuccessorWeights[++j];
      const std::size_t source = spec_.markov_order == 1 ? prev : (prev + prev2) % cells;
      cell = successors_[j][source];
    }
    if (t >= 1) prev2 = prev;
    prev = cell;
    ranks.push_back(rank_of_cell_[cell]);
  }
  return ranks;
}

std::vector<std::int64_t> SyntheticGenerator::sentence_ranks(Rng& rng, int topic) const {
  if (topic < 0 || topic >= spec_.topics) throw Error("topic outside the language's topics");
  auto ranks = sentence_ranks(rng);
  const auto& cdf = topic_cdf_[static_cast<std::size_t>(topic)];
  const auto& members = topic_members_[static_cast<std::size_t>(topic)];
  for (auto& r : ranks) {
    if (rng.uniform() >= spec_.topic_tilt) continue;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), rng.uniform());
    r = members[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()),
                                      members.size() - 1)];
  }
  return ranks;
}

std::string SyntheticGenerator::render(const std::vector<std::int64_t>& ranks) const {
  return render_with(script_tag_, spec_.token_id_offset, spec_.vocab_size, ranks);
}

std::string SyntheticGenerator::render_with(std::string_view script_tag, std::int64_t offset,
                                            std::int64_t vocab,
                                            const std::vector<std::int64_t>& ranks) const {
  std::string out;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (i > 0) out += ' ';
    out += render_lexeme(script_tag, offset + ranks[i] % vocab);
  }
  return out;
}

Corpus generate_synthetic(const SyntheticLanguageSpec& spec, std::size_t n_sentences) {
  SyntheticGenerator gen(spec);
  Rng rng(derive_seed(spec.seed, "sentences"));
  Corpus corpus{spec.code, {}, Provenance::synthetic};
  corpus.sentences.reserve(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) {
    if (spec.topics > 0) {
      const auto topic = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.topics)));
      corpus.sentences.push_back(gen.render(gen.sentence_ranks(rng, topic)));
    } else {
      corpus.sentences.push_back(gen.render(gen.sentence_ranks(rng)));
    }
  }
  return corpus;
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    char32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

Corpus load_text(const std::filesystem::path& path, std::string_view code) {
  if (!std::filesystem::exists(path)) throw Error("corpus file not found: " + path.string());
  const std::string text = read_file(path);
  if (!valid_utf8(text)) throw Error("corpus file is not valid UTF-8: " + path.string());
  Corpus corpus{std::string(code), {}, Provenance::file};
  for (auto& line : split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    corpus.sentences.push_back(std::move(line));
  }
  if (corpus.sentences.empty()) throw Error("empty corpus: " + path.string());
  return corpus;
}

void save_text(const Corpus& corpus, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : corpus.sentences) {
    out += s;
    out += '\n';
  }
  write_file_atomic(path, out);
}

SplitPair split(const Corpus& corpus, std::size_t eval_n, std::uint64_t seed) {
  if (eval_n == 0) throw Error("split: eval_n must be positive");
  if (eval_n >= corpus.size()) {
    throw Error("split: eval_n (" + std::to_string(eval_n) + ") must be smaller than corpus size (" +
                std::to_string(corpus.size()) + ")");
  }
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, "split:" + corpus.code));
  for (std::size_t i = 0; i < eval_n; ++i) {
    std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  }
  std::vector<bool> in_eval(corpus.size(), false);
  for (std::size_t i = 0; i < eval_n; ++i) in_eval[idx[i]] = true;
  SplitPair out;
  out.seed = seed;
  out.train = Corpus{corpus.code, {}, corpus.provenance};
  out.eval = Corpus{corpus.code, {}, corpus.provenance};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (in_eval[i] ? out.eval : out.train).sentences.push_back(corpus.sentences[i]);
  }
  return out;
}

std::map<std::string, Corpus> make_parallel_eval(const std::vector<SyntheticLanguageSpec>& specs,
                                                 std::size_t n) {
  if (specs.empty()) throw Error("make_parallel_eval: no languages");
  return make_parallel_eval(specs, n, specs.front().seed);
}

std::map<std::string, Corpus> make_parallel_eval(const std::vector<SyntheticLanguageSpec>& specs,
                                                 std::size_t n, std::uint64_t seed) {
  if (specs.empty()) throw Error("make_parallel_eval: no languages");
  for (const auto& s : specs) {
    s.validate();
    if (s.markov_order != specs.front().markov_order ||
        s.avg_sentence_len != specs.front().avg_sentence_len) {
      throw Error("make_parallel_eval: incompatible specs (" + specs.front().code + " vs " + s.code +
                  "): markov_order and avg_sentence_len must match");
    }
  }
  auto source_spec = specs.front();
  source_spec.seed = seed;
  SyntheticGenerator gen(source_spec);
  Rng rng(derive_seed(seed, "sentences"));
  std::map<std::string, Corpus> out;
  for (const auto& s : specs) out[s.code] = Corpus{s.code, {}, Provenance::synthetic};
  for (std::size_t i = 0; i < n; ++i) {
    const auto ranks = gen.sentence_ranks(rng);
    for (const auto& s : specs) {
      out[s.code].sentences.push_back(
          gen.render_with(tag_of(s.code), s.token_id_offset, s.vocab_size, ranks));
    }
  }
  return out;
}

}  // namespace ifx
