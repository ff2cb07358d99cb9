#include "splitpit/vocab.hpp"

#include <array>

#include "splitpit/error.hpp"

namespace splitpit {
namespace {

constexpr std::array<std::string_view, kReservedTokens> kReserved = {"<pad>", "<s>", "</s>", "<unk>",
                                                                    kSepToken};

}  // namespace

Tokens tokenize(std::string_view text) {
  Tokens out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (std::string_view r : kReserved) {
    ids_.emplace(std::string(r), static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(r);
  }
}

Vocabulary Vocabulary::from_words(std::span<const std::string> words) {
  Vocabulary v;
  v.tokens_.reserve(kReservedTokens + words.size());
  for (const std::string& w : words) {
    if (w.empty()) throw ValidationError("vocabulary: empty token");
    auto [it, inserted] = v.ids_.emplace(w, static_cast<TokenId>(v.tokens_.size()));
    if (!inserted) throw ValidationError("vocabulary: duplicate or reserved token '" + w + "'");
    v.tokens_.push_back(w);
  }
  return v;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

TokenId Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ValidationError("vocabulary: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

SourceText make_source(const Vocabulary& vocab, std::span<const std::string> words) {
  SourceText src;
  src.words.assign(words.begin(), words.end());
  src.vocab_size = vocab.size();
  for (const std::string& w : words) {
    const TokenId id = vocab.id(w);
    src.ids.push_back(id);
    if (id != kUnk || w == "<unk>") {
      src.copy_ids.push_back(id);
      continue;
    }
    std::size_t k = 0;
    while (k < src.oov.size() && src.oov[k] != w) ++k;
    if (k == src.oov.size()) src.oov.push_back(w);
    src.copy_ids.push_back(static_cast<TokenId>(vocab.size() + k));
  }
  return src;
}

std::vector<TokenId> encode_target(const Vocabulary& vocab, const SourceText& source,
                                   std::span<const std::string> words) {
  std::vector<TokenId> out;
  out.reserve(words.size());
  for (const std::string& w : words) {
    TokenId id = vocab.id(w);
    if (id == kUnk) {
      for (std::size_t k = 0; k < source.oov.size(); ++k) {
        if (source.oov[k] == w) {
          id = static_cast<TokenId>(vocab.size() + k);
          break;
        }
      }
    }
    out.push_back(id);
  }
  return out;
}

Tokens decode_target(const Vocabulary& vocab, const SourceText& source,
                     std::span<const TokenId> ids) {
  Tokens out;
  for (TokenId id : ids) {
    if (id == kSep) {
      out.emplace_back(kSepToken);
    } else if (id >= 0 && static_cast<std::size_t>(id) < kReservedTokens) {
      if (id == kUnk) out.push_back(vocab.token(kUnk));
    } else if (static_cast<std::size_t>(id) < vocab.size()) {
      out.push_back(vocab.token(id));
    } else {
      const std::size_t k = static_cast<std::size_t>(id) - vocab.size();
      if (k >= source.oov.size()) throw ValidationError("decode: id " + std::to_string(id) + " out of range");
      out.push_back(source.oov[k]);
    }
  }
  return out;
}

}  // namespace splitpit
