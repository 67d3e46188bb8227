#include "rtrl/tasks.hpp"

#include <set>
#include <stdexcept>

namespace rtrl {

std::string_view to_string(DomainKind kind) {
  switch (kind) {
    case DomainKind::Molecule: return "molecule";
    case DomainKind::Reaction: return "reaction";
    case DomainKind::Text: return "text";
    case DomainKind::Symbol: return "symbol";
  }
  return "?";
}

DomainKind parse_domain_kind(std::string_view s) {
  if (s == "molecule") return DomainKind::Molecule;
  if (s == "reaction") return DomainKind::Reaction;
  if (s == "text") return DomainKind::Text;
  if (s == "symbol") return DomainKind::Symbol;
  throw std::invalid_argument("unknown domain kind '" + std::string(s) + "'");
}

TaskPair TaskPair::swapped() const {
  return {backward, forward, target, source, backward_checker, forward_checker};
}

void TaskPair::validate(const Vocab& v) const {
  if (forward == backward) throw std::invalid_argument("task pair: forward and backward tags must differ");
  if (!v.has_task(forward)) throw std::invalid_argument("task pair: task '" + forward + "' not in vocabulary");
  if (!v.has_task(backward)) throw std::invalid_argument("task pair: task '" + backward + "' not in vocabulary");
}

TaskPair task_pair_preset(std::string_view name) {
  if (name == "cipher")
    return {"encode", "decode", DomainKind::Symbol, DomainKind::Symbol, FormatChecker::NonEmpty,
            FormatChecker::NonEmpty};
  if (name == "reaction")
    return {"reaction", "retrosynthesis", DomainKind::Molecule, DomainKind::Molecule,
            FormatChecker::ReactionProduct, FormatChecker::Retrosynthesis};
  if (name == "caption")
    return {"caption", "design", DomainKind::Molecule, DomainKind::Text, FormatChecker::Caption,
            FormatChecker::Molecule};
  throw std::invalid_argument("unknown task preset '" + std::string(name) + "'");
}

std::vector<std::string> task_pair_presets() { return {"cipher", "reaction", "caption"}; }

namespace {

void harvest(std::set<std::string>& out, const std::vector<std::string>& texts, DomainKind kind) {
  static const std::vector<std::string> kChemMulti = {"Cl", "Br"};
  for (const auto& t : texts) {
    std::vector<std::string> units;
    if (kind == DomainKind::Text)
      units = whitespace_units(t);
    else
      units = char_units(t, is_chemical(kind) ? kChemMulti : std::vector<std::string>{});
    out.insert(units.begin(), units.end());
  }
}

}  // namespace

Vocab build_task_vocab(const TaskPair& pair, const std::vector<std::string>& source_texts,
                       const std::vector<std::string>& target_texts) {
  std::set<std::string> tokens;
  harvest(tokens, source_texts, pair.source);
  harvest(tokens, target_texts, pair.target);
  return Vocab::build({tokens.begin(), tokens.end()}, {pair.forward, pair.backward});
}

}  // namespace rtrl
