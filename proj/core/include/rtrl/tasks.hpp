#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rtrl/domain.hpp"
#include "rtrl/reward.hpp"
#include "rtrl/vocab.hpp"

namespace rtrl {

/// A pair of inverse prompts t_f / t_g over two domains.
struct TaskPair {
  std::string forward;   // task name registered in the vocabulary
  std::string backward;
  DomainKind source = DomainKind::Symbol;
  DomainKind target = DomainKind::Symbol;
  FormatChecker forward_checker = FormatChecker::None;
  FormatChecker backward_checker = FormatChecker::None;

  TokenId forward_tag(const Vocab& v) const { return v.task_tag(forward); }
  TokenId backward_tag(const Vocab& v) const { return v.task_tag(backward); }
  /// Roles reversed: backward becomes the trained direction.
  TaskPair swapped() const;
  /// Throws std::invalid_argument when tags coincide or are not registered.
  void validate(const Vocab& v) const;

  bool operator==(const TaskPair&) const = default;
};

/// Presets: "cipher" (symbol <-> symbol), "reaction" (reactants <-> product),
/// "caption" (molecule <-> text).
TaskPair task_pair_preset(std::string_view name);
std::vector<std::string> task_pair_presets();

/// Vocabulary covering every string on both sides, with the pair's two tasks
/// registered. Chemistry keeps Cl and Br atomic.
Vocab build_task_vocab(const TaskPair& pair, const std::vector<std::string>& source_texts,
                       const std::vector<std::string>& target_texts);

}  // namespace rtrl
