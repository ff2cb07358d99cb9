#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace splitpit {

using TokenId = int;
using Tokens = std::vector<std::string>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kSep = 4;
inline constexpr std::size_t kReservedTokens = 5;
inline constexpr std::string_view kSepToken = "[SEP]";

/// Whitespace tokenization, case preserved.
Tokens tokenize(std::string_view text);
std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

/// Token/id maps. Ids 0..4 are PAD, BOS, EOS, UNK and SEP ("[SEP]").
class Vocabulary {
 public:
  Vocabulary();

  /// Reserved tokens followed by `words` in the given order. Reserved or
  /// duplicate entries in `words` are rejected.
  static Vocabulary from_words(std::span<const std::string> words);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// UNK for unknown tokens.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// A source sentence prepared for the copy mechanism. Words missing from the
/// vocabulary get extended ids vocab.size() + k, in order of first
/// occurrence, so the decoder can still emit them by copying.
struct SourceText {
  Tokens words;
  std::vector<TokenId> ids;       // vocabulary ids; OOV words are UNK
  std::vector<TokenId> copy_ids;  // extended ids used by the copy distribution
  Tokens oov;                     // surface forms for extended ids
  std::size_t vocab_size = 0;

  std::size_t size() const { return ids.size(); }
  std::size_t extended_size() const { return vocab_size + oov.size(); }
};

SourceText make_source(const Vocabulary& vocab, std::span<const std::string> words);

/// Target words as ids; OOV words that occur in the source take their extended id.
std::vector<TokenId> encode_target(const Vocabulary& vocab, const SourceText& source,
                                   std::span<const std::string> words);

/// Inverse of encode_target; reserved ids other than SEP are skipped.
Tokens decode_target(const Vocabulary& vocab, const SourceText& source,
                     std::span<const TokenId> ids);

}  // namespace splitpit
