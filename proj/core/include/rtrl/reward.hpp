#pragma once

#include <string>
#include <string_view>

#include "rtrl/domain.hpp"
#include "rtrl/policy.hpp"

namespace rtrl {

/// Well-formedness checks behind the format reward F(y).
enum class FormatChecker {
  None,             // always 1
  ReactionProduct,  // exactly one valid component
  Retrosynthesis,   // at least one component, all valid
  Caption,          // non-empty, no SMILES bracket characters [ ] ( )
  Molecule,         // parses as a single molecule
  NonEmpty,         // any non-empty string
};

std::string_view to_string(FormatChecker c);
/// Throws std::invalid_argument for an unregistered checker name.
FormatChecker parse_format_checker(std::string_view name);

struct RewardConfig {
  /// Format weight. Negative means "auto": 2 ln V.
  double alpha = -1.0;
  bool length_normalize = true;
  FormatChecker checker = FormatChecker::None;
  bool copy_guard = false;

  double resolved_alpha(std::size_t vocab_size) const;
  /// alpha must be >= ln V whenever a checker is active.
  void validate(std::size_t vocab_size) const;
};

/// Mean (or summed) teacher-forced log-likelihood of reconstructing x from y
/// under the frozen judge with the backward tag; L = |x| + 1 counts EOS.
double roundtrip_reward(const PolicySnapshot& judge, const Sequence& x, const Sequence& y, TokenId backward_tag,
                        bool length_normalize = true);

/// F(y) in {0, 1}. With copy_guard, a verbatim copy of the input scores 0.
int format_reward(std::string_view y_text, FormatChecker checker, std::string_view input_text = {},
                  bool copy_guard = false);

/// roundtrip_reward + alpha * F(y).
double total_reward(const PolicySnapshot& judge, const Sequence& x, const Sequence& y, TokenId backward_tag,
                    std::string_view x_text, std::string_view y_text, const RewardConfig& cfg);

/// Auxiliary supervised score in [0, 1]. Text: mean of BLEU-2, BLEU-4,
/// METEOR, ROUGE-1, ROUGE-2, ROUGE-L. Chemistry: mean of char BLEU and the
/// three fingerprint similarities (0 when y does not parse). Symbol: mean of
/// exact match, char BLEU and 1 - normalized edit distance.
double metric_reward(std::string_view y_text, std::string_view label_text, DomainKind kind);

/// Negative mean next-token entropy of the policy along y (teacher forced,
/// |y| + 1 positions including EOS). Lies in [-ln V, 0].
double entropy_reward(const PolicyParams& params, TokenId tag, const Sequence& x, const Sequence& y);

}  // namespace rtrl
