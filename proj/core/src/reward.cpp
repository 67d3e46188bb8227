#include "rtrl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtrl/chem/fingerprint.hpp"
#include "rtrl/chem/smiles.hpp"
#include "rtrl/metrics.hpp"

namespace rtrl {

std::string_view to_string(FormatChecker c) {
  switch (c) {
    case FormatChecker::None:
      return "none";
    case FormatChecker::ReactionProduct:
      return "reaction_product";
    case FormatChecker::Retrosynthesis:
      return "retrosynthesis";
    case FormatChecker::Caption:
      return "caption";
    case FormatChecker::Molecule:
      return "molecule";
    case FormatChecker::NonEmpty:
      return "nonempty";
  }
  return "none";
}

FormatChecker parse_format_checker(std::string_view name) {
  for (auto c : {FormatChecker::None, FormatChecker::ReactionProduct, FormatChecker::Retrosynthesis,
                 FormatChecker::Caption, FormatChecker::Molecule, FormatChecker::NonEmpty})
    if (to_string(c) == name) return c;
  throw std::invalid_argument("unregistered format checker '" + std::string(name) + "'");
}

double RewardConfig::resolved_alpha(std::size_t vocab_size) const {
  return alpha < 0.0 ? 2.0 * std::log(static_cast<double>(vocab_size)) : alpha;
}

void RewardConfig::validate(std::size_t vocab_size) const {
  const double a = resolved_alpha(vocab_size);
  if (checker != FormatChecker::None && a < std::log(static_cast<double>(vocab_size)))
    throw std::invalid_argument("reward: alpha must be >= ln V when a format checker is active");
}

double roundtrip_reward(const PolicySnapshot& judge, const Sequence& x, const Sequence& y, TokenId backward_tag,
                        bool length_normalize) {
  if (x.empty()) throw std::invalid_argument("roundtrip_reward: empty input");
  const auto lp = sequence_logprob(judge.params(), backward_tag, y, x, true);
  return length_normalize ? lp.total / static_cast<double>(x.size() + 1) : lp.total;
}

int format_reward(std::string_view y_text, FormatChecker checker, std::string_view input_text, bool copy_guard) {
  if (copy_guard && y_text == input_text) return 0;
  switch (checker) {
    case FormatChecker::None:
      return 1;
    case FormatChecker::ReactionProduct:
      return chem::count_components(y_text) == 1 ? 1 : 0;
    case FormatChecker::Retrosynthesis:
      return chem::count_components(y_text) >= 1 ? 1 : 0;
    case FormatChecker::Caption:
      return !y_text.empty() && y_text.find_first_of("[]()") == std::string_view::npos ? 1 : 0;
    case FormatChecker::Molecule:
      try {
        chem::parse_smiles(y_text);
        return 1;
      } catch (const chem::SmilesError&) {
        return 0;
      }
    case FormatChecker::NonEmpty:
      return y_text.empty() ? 0 : 1;
  }
  return 0;
}

double total_reward(const PolicySnapshot& judge, const Sequence& x, const Sequence& y, TokenId backward_tag,
                    std::string_view x_text, std::string_view y_text, const RewardConfig& cfg) {
  const double rt = roundtrip_reward(judge, x, y, backward_tag, cfg.length_normalize);
  const double alpha = cfg.resolved_alpha(judge.params().vocab_size());
  return rt + alpha * format_reward(y_text, cfg.checker, x_text, cfg.copy_guard);
}

double metric_reward(std::string_view y_text, std::string_view label_text, DomainKind kind) {
  using namespace metrics;
  switch (kind) {
    case DomainKind::Text: {
      const auto y = whitespace_units(y_text), l = whitespace_units(label_text);
      if (l.empty()) return y.empty() ? 1.0 : 0.0;
      return (bleu(y, l, 2) + bleu(y, l, 4) + meteor_exact(y, l) + rouge_n(y, l, 1) + rouge_n(y, l, 2) +
              rouge_l(y, l)) / 6.0;
    }
    case DomainKind::Molecule:
    case DomainKind::Reaction: {
      const auto lt = char_tokens(label_text);
      double sum = lt.empty() ? 0.0 : bleu(char_tokens(y_text), lt, 4);
      if (is_valid_chemistry(y_text) && y_text.find('>') == std::string_view::npos &&
          label_text.find('>') == std::string_view::npos) {
        try {
          const auto ym = chem::parse_multi(y_text);
          const auto lm = chem::parse_multi(label_text);
          sum += chem::tanimoto(chem::circular_fingerprint(ym, 2), chem::circular_fingerprint(lm, 2));
          sum += chem::tanimoto(chem::path_fingerprint(ym), chem::path_fingerprint(lm));
          sum += chem::tanimoto(chem::circular_fingerprint(ym, 1), chem::circular_fingerprint(lm, 1));
        } catch (const chem::SmilesError&) {
          // label itself malformed: fingerprint terms stay 0
        }
      }
      return sum / 4.0;
    }
    case DomainKind::Symbol: {
      const auto lt = char_tokens(label_text);
      const double em = exact_match(y_text, label_text, DomainKind::Symbol);
      const double bl = lt.empty() ? 0.0 : bleu(char_tokens(y_text), lt, 4);
      const double denom = static_cast<double>(std::max<std::size_t>({y_text.size(), label_text.size(), 1}));
      const double ed = 1.0 - static_cast<double>(levenshtein(y_text, label_text)) / denom;
      return (em + bl + ed) / 3.0;
    }
  }
  return 0.0;
}

double entropy_reward(const PolicyParams& params, TokenId tag, const Sequence& x, const Sequence& y) {
  double sum = 0.0;
  const std::size_t steps = y.size() + 1;
  for (std::size_t i = 0; i < steps; ++i) {
    const auto p = next_token_dist(params, params.context(tag, x, y, i));
    double h = 0.0;
    for (double q : p)
      if (q > 0.0) h -= q * std::log(q);
    sum += h;
  }
  return -sum / static_cast<double>(steps);
}

}  // namespace rtrl
