#include "rtrl/vocab.hpp"

#include <algorithm>
#include <cctype>

namespace rtrl {

namespace {

constexpr const char* kReserved[] = {"<pad>", "<bos>", "<eos>", "<sep>"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string_view to_string(TokenScheme s) {
  return s == TokenScheme::Char ? "char" : "whitespace";
}

TokenScheme parse_token_scheme(std::string_view s) {
  if (s == "char") return TokenScheme::Char;
  if (s == "whitespace") return TokenScheme::Whitespace;
  throw std::invalid_argument("unknown token scheme: " + std::string(s));
}

TokenizeError::TokenizeError(std::string unit, std::size_t offset)
    : std::runtime_error("out-of-vocabulary unit '" + unit + "' at offset " + std::to_string(offset)),
      unit_(std::move(unit)),
      offset_(offset) {}

Vocab Vocab::build(std::vector<std::string> tokens, std::vector<std::string> task_names) {
  if (tokens.empty()) throw std::invalid_argument("build_vocab: token list is empty");
  Vocab v;
  v.num_ordinary_ = tokens.size();
  v.tokens_ = std::move(tokens);
  for (const char* r : kReserved) v.tokens_.emplace_back(r);
  for (const auto& t : task_names) v.tokens_.push_back("<task:" + t + ">");
  v.task_names_ = std::move(task_names);

  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    const auto& t = v.tokens_[i];
    if (t.empty()) throw std::invalid_argument("build_vocab: empty token at position " + std::to_string(i));
    if (!v.index_.emplace(t, static_cast<TokenId>(i)).second)
      throw std::invalid_argument("build_vocab: duplicate token '" + t + "'");
    if (i < v.num_ordinary_) v.max_char_unit_ = std::max(v.max_char_unit_, t.size());
  }
  return v;
}

TokenId Vocab::id(std::string_view token) const {
  if (auto f = find(token)) return *f;
  throw std::out_of_range("unknown token '" + std::string(token) + "'");
}

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::task_tag(std::string_view name) const {
  auto it = std::find(task_names_.begin(), task_names_.end(), name);
  if (it == task_names_.end()) throw std::out_of_range("unregistered task '" + std::string(name) + "'");
  return sep() + 1 + static_cast<TokenId>(it - task_names_.begin());
}

bool Vocab::has_task(std::string_view name) const {
  return std::find(task_names_.begin(), task_names_.end(), name) != task_names_.end();
}

std::vector<std::string> Vocab::ordinary_tokens() const {
  return {tokens_.begin(), tokens_.begin() + static_cast<std::ptrdiff_t>(num_ordinary_)};
}

std::uint64_t Vocab::fingerprint() const noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& t : tokens_) {
    for (unsigned char c : t) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    h ^= 0xFF;  // separator byte, never valid UTF-8
    h *= 0x100000001B3ULL;
  }
  return h;
}

Sequence Vocab::tokenize(std::string_view text, TokenScheme scheme) const {
  Sequence out;
  if (scheme == TokenScheme::Whitespace) {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && is_space(text[i])) ++i;
      if (i >= text.size()) break;
      std::size_t j = i;
      while (j < text.size() && !is_space(text[j])) ++j;
      auto unit = text.substr(i, j - i);
      auto f = find(unit);
      if (!f || is_reserved(*f)) throw TokenizeError(std::string(unit), i);
      out.push_back(*f);
      i = j;
    }
    return out;
  }
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (std::size_t len = std::min(max_char_unit_, text.size() - i); len >= 1; --len) {
      auto f = find(text.substr(i, len));
      if (f && !is_reserved(*f)) {
        out.push_back(*f);
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) throw TokenizeError(std::string(text.substr(i, 1)), i);
  }
  return out;
}

std::string Vocab::detokenize(const Sequence& seq, TokenScheme scheme) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (scheme == TokenScheme::Whitespace && i > 0) out.push_back(' ');
    out += token(seq[i]);
  }
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  bool pending = false;
  for (char c : text) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> char_units(std::string_view text, const std::vector<std::string>& multi) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (const auto& m : multi) {
      if (text.substr(i, m.size()) == m) {
        out.push_back(m);
        i += m.size();
        matched = true;
        break;
      }
    }
    if (!matched) out.emplace_back(1, text[i++]);
  }
  return out;
}

std::vector<std::string> whitespace_units(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace rtrl
