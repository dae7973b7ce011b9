#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ilr {

using TokenId = std::int32_t;

namespace tokens {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kVisual = 4;
inline constexpr TokenId kRec = 5;
inline constexpr TokenId kReservedCount = 6;
}  // namespace tokens

// Lowercased word-level split: runs of alphanumerics form a word, every other
// non-space character is its own token.
std::vector<std::string> split_words(std::string_view text);

class Vocabulary {
 public:
  Vocabulary();  // reserved tokens only

  TokenId id(std::string_view token) const;  // kUnk when absent
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;

  // Appends a token; no-op if present.
  TokenId add(const std::string& token);

  const std::vector<std::string>& tokens() const { return tokens_; }
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Words ranked by descending frequency (ties by the word itself), truncated
// so that the total size including reserved tokens is at most max_size.
Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t max_size);

std::vector<TokenId> tokenize(const Vocabulary& vocab, std::string_view text);
std::string detokenize(const Vocabulary& vocab, const std::vector<TokenId>& ids);

}  // namespace ilr
