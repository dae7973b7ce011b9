#include "ilr/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "ilr/error.hpp"

namespace ilr {

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> r{"<pad>", "<bos>", "<eos>", "<unk>", "[VISUAL]", "[REC]"};
  return r;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  for (unsigned char c : text) {
    if (is_word_char(c)) {
      word.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
      continue;
    }
    if (!word.empty()) {
      out.push_back(std::move(word));
      word.clear();
    }
    if (std::isspace(c) == 0) {
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!word.empty()) {
    out.push_back(std::move(word));
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const auto& t : reserved_tokens()) {
    add(t);
  }
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? tokens::kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorKind::Argument, "token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

TokenId Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) {
    return it->second;
  }
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    fail(ErrorKind::Format, "vocabulary does not start with the reserved tokens");
  }
  Vocabulary v;
  for (std::size_t i = reserved.size(); i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) {
      fail(ErrorKind::Format, "duplicate vocabulary token '" + tokens[i] + "'");
    }
    v.add(tokens[i]);
  }
  return v;
}

Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t max_size) {
  std::map<std::string, std::size_t> freq;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text)) {
      ++freq[w];
    }
  }
  std::vector<std::pair<std::size_t, std::string>> ranked;
  ranked.reserve(freq.size());
  for (auto& [w, c] : freq) {
    ranked.emplace_back(c, w);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  Vocabulary v;
  for (const auto& [c, w] : ranked) {
    if (v.size() >= max_size) {
      break;
    }
    v.add(w);
  }
  return v;
}

std::vector<TokenId> tokenize(const Vocabulary& vocab, std::string_view text) {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) {
    ids.push_back(vocab.id(w));
  }
  return ids;
}

std::string detokenize(const Vocabulary& vocab, const std::vector<TokenId>& ids) {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) {
      out.push_back(' ');
    }
    out += vocab.token(id);
  }
  return out;
}

}  // namespace ilr
