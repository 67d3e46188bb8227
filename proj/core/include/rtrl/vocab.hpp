#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rtrl {

using TokenId = std::int32_t;

/// Token ids. No implicit terminator; EOS is explicit when present.
using Sequence = std::vector<TokenId>;

enum class TokenScheme { Char, Whitespace };

std::string_view to_string(TokenScheme s);
TokenScheme parse_token_scheme(std::string_view s);

class TokenizeError : public std::runtime_error {
 public:
  TokenizeError(std::string unit, std::size_t offset);
  const std::string& unit() const noexcept { return unit_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string unit_;
  std::size_t offset_;
};

/// Dense token <-> id bijection.
///
/// Ordinary tokens occupy ids [0, n) in the order given to build(). Reserved
/// tokens follow in this fixed order: <pad>, <bos>, <eos>, <sep>, then one
/// "<task:NAME>" per task direction in registration order.
class Vocab {
 public:
  static Vocab build(std::vector<std::string> tokens, std::vector<std::string> task_names = {});

  std::size_t size() const noexcept { return tokens_.size(); }
  std::size_t num_ordinary() const noexcept { return num_ordinary_; }

  TokenId id(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  const std::string& token(TokenId id) const;

  TokenId pad() const noexcept { return static_cast<TokenId>(num_ordinary_); }
  TokenId bos() const noexcept { return pad() + 1; }
  TokenId eos() const noexcept { return pad() + 2; }
  TokenId sep() const noexcept { return pad() + 3; }
  TokenId task_tag(std::string_view name) const;
  bool has_task(std::string_view name) const;
  bool is_reserved(TokenId id) const noexcept { return id >= pad(); }

  const std::vector<std::string>& task_names() const noexcept { return task_names_; }
  std::vector<std::string> ordinary_tokens() const;
  const std::vector<std::string>& all_tokens() const noexcept { return tokens_; }

  /// FNV-1a over every token in id order. Used for checkpoint compatibility.
  std::uint64_t fingerprint() const noexcept;

  Sequence tokenize(std::string_view text, TokenScheme scheme) const;
  std::string detokenize(const Sequence& seq, TokenScheme scheme) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> task_names_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t num_ordinary_ = 0;
  std::size_t max_char_unit_ = 1;
};

/// Collapses runs of whitespace to one space and trims both ends.
std::string normalize_whitespace(std::string_view text);

/// Units the CHAR scheme would produce from `text`, treating the listed
/// multi-character units as atomic (used to harvest vocabularies).
std::vector<std::string> char_units(std::string_view text, const std::vector<std::string>& multi = {});
std::vector<std::string> whitespace_units(std::string_view text);

}  // namespace rtrl
