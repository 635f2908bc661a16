#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ifx/corpus.hpp"

namespace ifx {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;
inline constexpr TokenId kNumSpecial = 5;

// Marks the start of every whitespace-delimited word ("▁").
inline constexpr std::string_view kWordMarker = "\xE2\x96\x81";

// Shared byte-level BPE vocabulary. Ids 0..4 are the special tokens, then the
// base byte pieces in byte order, then one piece per productive merge.
class Vocab {
 public:
  Vocab() = default;
  Vocab(std::vector<std::string> pieces, std::vector<std::pair<std::string, std::string>> merges);

  std::size_t size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  const std::string& piece(TokenId id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  // True when every byte value has its own piece, so nothing encodes to unk.
  bool byte_fallback() const { return byte_fallback_; }

  TokenId id_of(std::string_view piece) const;  // -1 when absent
  int merge_rank(std::string_view left, std::string_view right) const;  // -1 when absent

  std::uint64_t hash() const;

 private:
  std::vector<std::string> pieces_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, TokenId> index_;
  std::unordered_map<std::string, int> merge_index_;
  bool byte_fallback_ = false;
};

struct BpeOptions {
  bool byte_fallback = false;
};

// Greedy most-frequent-pair merging over whitespace-pretokenized text. Ties
// go to the lexicographically smallest (left, right) pair.
Vocab train_bpe(std::span<const Corpus> corpora, std::size_t vocab_size, BpeOptions options = {});

// [cls] pieces... [sep], truncated to max_len with [sep] kept last.
std::vector<TokenId> encode(const Vocab& vocab, std::string_view text, std::size_t max_len);
// Pieces of one sentence without specials or truncation.
std::vector<TokenId> encode_pieces(const Vocab& vocab, std::string_view text);
std::string decode(const Vocab& vocab, std::span<const TokenId> ids);

// Text format: "bpe-vocab v1 <n>", n piece lines, "#merges", merge lines
// "left<TAB>right". Pieces are escaped with \xHH for bytes that are not
// printable UTF-8 and for space, tab, backslash, CR and LF.
std::string serialize(const Vocab& vocab);
Vocab parse_vocab(std::string_view text);
void save_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab load_vocab(const std::filesystem::path& path);

std::string escape_piece(std::string_view piece);
std::string unescape_piece(std::string_view text);

}  // namespace ifx
