#include "ifx/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <limits>
#include <set>

namespace ifx {
namespace {

constexpr std::array<std::string_view, kNumSpecial> kSpecialPieces{"<pad>", "<unk>", "<cls>",
                                                                    "<sep>", "<mask>"};

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string w(kWordMarker);
      w.append(text.substr(start, i - start));
      words.push_back(std::move(w));
    }
  }
  return words;
}

using Symbols = std::vector<std::string>;

Symbols bytes_of(std::string_view word) {
  Symbols out;
  out.reserve(word.size());
  for (char c : word) out.emplace_back(1, c);
  return out;
}

// Length of the UTF-8 sequence starting at s[i] if it is complete and valid.
std::size_t utf8_run(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  std::size_t len = c < 0x80 ? 1 : (c & 0xE0) == 0xC0 ? 2 : (c & 0xF0) == 0xE0 ? 3
                                   : (c & 0xF8) == 0xF0 ? 4 : 0;
  if (len == 0 || i + len > s.size()) return 0;
  return valid_utf8(s.substr(i, len)) ? len : 0;
}

}  // namespace

Vocab::Vocab(std::vector<std::string> pieces, std::vector<std::pair<std::string, std::string>> merges)
    : pieces_(std::move(pieces)), merges_(std::move(merges)) {
  if (pieces_.size() < kNumSpecial) throw Error("vocab must contain the five special tokens");
  for (TokenId i = 0; i < kNumSpecial; ++i) {
    if (pieces_[static_cast<std::size_t>(i)] != kSpecialPieces[static_cast<std::size_t>(i)]) {
      throw Error("vocab ids 0..4 must be the special tokens");
    }
  }
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].empty()) throw Error("vocab contains an empty piece");
    if (!index_.emplace(pieces_[i], static_cast<TokenId>(i)).second) {
      throw Error("duplicate vocab piece: " + escape_piece(pieces_[i]));
    }
  }
  // Every merge must reference pieces defined before the merge's own result.
  std::set<std::string> defined(pieces_.begin(), pieces_.begin() + kNumSpecial);
  std::size_t next_piece = kNumSpecial;
  while (next_piece < pieces_.size() && pieces_[next_piece].size() == 1) {
    defined.insert(pieces_[next_piece++]);
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [l, rt] = merges_[r];
    if (!defined.count(l) || !defined.count(rt)) {
      throw Error("merge " + std::to_string(r) + " references an undefined piece");
    }
    const std::string joined = l + rt;
    if (!index_.count(joined)) throw Error("merge " + std::to_string(r) + " result is not a piece");
    defined.insert(joined);
    merge_index_.emplace(l + '\t' + rt, static_cast<int>(r));
  }
  std::size_t single_bytes = 0;
  for (const auto& p : pieces_) single_bytes += p.size() == 1 ? 1 : 0;
  byte_fallback_ = single_bytes == 256;
}

TokenId Vocab::id_of(std::string_view piece) const {
  const auto it = index_.find(std::string(piece));
  return it == index_.end() ? -1 : it->second;
}

int Vocab::merge_rank(std::string_view left, std::string_view right) const {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left).append(1, '\t').append(right);
  const auto it = merge_index_.find(key);
  return it == merge_index_.end() ? -1 : it->second;
}

std::uint64_t Vocab::hash() const { return fnv1a(serialize(*this)); }

Vocab train_bpe(std::span<const Corpus> corpora, std::size_t vocab_size, BpeOptions options) {
  if (corpora.empty()) throw Error("train_bpe: no corpora");
  std::map<std::string, std::uint64_t> word_counts;
  for (const auto& c : corpora) {
    for (const auto& s : c.sentences) {
      for (auto& w : pretokenize(s)) ++word_counts[std::move(w)];
    }
  }
  std::array<bool, 256> seen{};
  for (const auto& [w, n] : word_counts) {
    for (unsigned char ch : w) seen[ch] = true;
  }
  if (options.byte_fallback) seen.fill(true);
  const auto n_bytes = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
  if (vocab_size < kNumSpecial + n_bytes) {
    throw Error("train_bpe: vocab_size " + std::to_string(vocab_size) + " is below the minimum " +
                std::to_string(kNumSpecial + n_bytes) + " (specials + distinct bytes)");
  }

  std::vector<std::string> pieces(kSpecialPieces.begin(), kSpecialPieces.end());
  for (int b = 0; b < 256; ++b) {
    if (seen[static_cast<std::size_t>(b)]) pieces.emplace_back(1, static_cast<char>(b));
  }
  std::set<std::string> piece_set(pieces.begin(), pieces.end());

  std::vector<Symbols> words;
  std::vector<std::uint64_t> counts;
  for (const auto& [w, n] : word_counts) {
    words.push_back(bytes_of(w));
    counts.push_back(n);
  }

  std::vector<std::pair<std::string, std::string>> merges;
  while (pieces.size() < vocab_size) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto& syms = words[i];
      for (std::size_t k = 0; k + 1 < syms.size(); ++k) pair_counts[{syms[k], syms[k + 1]}] += counts[i];
    }
    if (pair_counts.empty()) break;
    // std::map iterates in lexicographic (left, right) order, so the first
    // maximum found is the tie-break winner.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const auto [left, right] = best->first;
    const std::string joined = left + right;
    merges.emplace_back(left, right);
    if (piece_set.insert(joined).second) pieces.push_back(joined);
    for (auto& syms : words) {
      if (syms.size() < 2) continue;
      Symbols merged;
      merged.reserve(syms.size());
      for (std::size_t k = 0; k < syms.size(); ++k) {
        if (k + 1 < syms.size() && syms[k] == left && syms[k + 1] == right) {
          merged.push_back(joined);
          ++k;
        } else {
          merged.push_back(std::move(syms[k]));
        }
      }
      syms = std::move(merged);
    }
  }
  return Vocab(std::move(pieces), std::move(merges));
}

std::vector<TokenId> encode_pieces(const Vocab& vocab, std::string_view text) {
  std::vector<TokenId> ids;
  for (const auto& word : pretokenize(text)) {
    Symbols syms = bytes_of(word);
    while (syms.size() > 1) {
      int best_rank = std::numeric_limits<int>::max();
      std::size_t best_pos = 0;
      for (std::size_t k = 0; k + 1 < syms.size(); ++k) {
        const int r = vocab.merge_rank(syms[k], syms[k + 1]);
        if (r >= 0 && r < best_rank) {
          best_rank = r;
          best_pos = k;
        }
      }
      if (best_rank == std::numeric_limits<int>::max()) break;
      const auto& [l, r] = vocab.merges()[static_cast<std::size_t>(best_rank)];
      Symbols merged;
      merged.reserve(syms.size());
      for (std::size_t k = 0; k < syms.size(); ++k) {
        if (k >= best_pos && k + 1 < syms.size() && syms[k] == l && syms[k + 1] == r) {
          merged.push_back(l + r);
          ++k;
        } else {
          merged.push_back(std::move(syms[k]));
        }
      }
      syms = std::move(merged);
    }
    for (const auto& s : syms) {
      const TokenId id = vocab.id_of(s);
      ids.push_back(id < 0 ? kUnkId : id);
    }
  }
  return ids;
}

std::vector<TokenId> encode(const Vocab& vocab, std::string_view text, std::size_t max_len) {
  if (max_len < 2) throw Error("encode: max_len must leave room for [cls] and [sep]");
  auto pieces = encode_pieces(vocab, text);
  if (pieces.size() > max_len - 2) pieces.resize(max_len - 2);
  std::vector<TokenId> out;
  out.reserve(pieces.size() + 2);
  out.push_back(kClsId);
  out.insert(out.end(), pieces.begin(), pieces.end());
  out.push_back(kSepId);
  return out;
}

std::string decode(const Vocab& vocab, std::span<const TokenId> ids) {
  std::string joined;
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
      throw Error("decode: token id " + std::to_string(id) + " out of range");
    }
    if (id < kNumSpecial) continue;
    joined += vocab.piece(id);
  }
  std::string out;
  std::size_t i = 0;
  while (i < joined.size()) {
    if (joined.compare(i, kWordMarker.size(), kWordMarker) == 0) {
      if (!out.empty()) out += ' ';
      i += kWordMarker.size();
    } else {
      out += joined[i++];
    }
  }
  return out;
}

std::string escape_piece(std::string_view piece) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  std::size_t i = 0;
  while (i < piece.size()) {
    const auto c = static_cast<unsigned char>(piece[i]);
    const std::size_t run = utf8_run(piece, i);
    const bool plain = run > 1 || (run == 1 && c > 0x20 && c < 0x7F && c != '\\');
    if (plain) {
      out.append(piece.substr(i, run));
      i += run;
    } else {
      out += "\\x";
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
      ++i;
    }
  }
  return out;
}

std::string unescape_piece(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\') {
      if (i + 3 >= text.size()) throw Error("truncated escape in vocab piece");
      if (text[i + 1] != 'x') throw Error("invalid escape in vocab piece");
      const auto hex = std::string(text.substr(i + 2, 2));
      if (hex.size() != 2 || !std::isxdigit(static_cast<unsigned char>(hex[0])) ||
          !std::isxdigit(static_cast<unsigned char>(hex[1]))) {
        throw Error("invalid escape in vocab piece");
      }
      out += static_cast<char>(std::stoi(hex, nullptr, 16));
      i += 3;
    } else {
      out += text[i];
    }
  }
  return out;
}

std::string serialize(const Vocab& vocab) {
  std::string out = "bpe-vocab v1 " + std::to_string(vocab.size()) + "\n";
  for (const auto& p : vocab.pieces()) out += escape_piece(p) + "\n";
  out += "#merges\n";
  for (const auto& [l, r] : vocab.merges()) out += escape_piece(l) + "\t" + escape_piece(r) + "\n";
  return out;
}

Vocab parse_vocab(std::string_view text) {
  auto lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || !lines[0].starts_with("bpe-vocab v1 ")) throw Error("bad vocab header");
  std::size_t n = 0;
  try {
    n = std::stoull(lines[0].substr(13));
  } catch (const std::logic_error&) {
    throw Error("bad vocab header");
  }
  if (lines.size() < n + 2 || lines[n + 1] != "#merges") throw Error("malformed vocab file");
  std::vector<std::string> pieces;
  for (std::size_t i = 1; i <= n; ++i) pieces.push_back(unescape_piece(lines[i]));
  std::vector<std::pair<std::string, std::string>> merges;
  for (std::size_t i = n + 2; i < lines.size(); ++i) {
    const auto tab = lines[i].find('\t');
    if (tab == std::string::npos) throw Error("malformed merge line " + std::to_string(i + 1));
    merges.emplace_back(unescape_piece(std::string_view(lines[i]).substr(0, tab)),
                        unescape_piece(std::string_view(lines[i]).substr(tab + 1)));
  }
  return Vocab(std::move(pieces), std::move(merges));
}

void save_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(vocab));
}

Vocab load_vocab(const std::filesystem::path& path) { return parse_vocab(read_file(path)); }

}  // namespace ifx
