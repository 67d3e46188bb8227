#pragma once

#include <string_view>

#include "rtrl/vocab.hpp"

namespace rtrl {

/// What a string in a dataset denotes. Decides tokenization and which
/// metric battery applies.
enum class DomainKind {
  Molecule,  // SMILES, possibly dot-joined
  Reaction,  // reactants>reagents>products
  Text,      // whitespace-tokenized natural language
  Symbol,    // opaque character strings (toy cipher tasks)
};

std::string_view to_string(DomainKind kind);
DomainKind parse_domain_kind(std::string_view s);

inline TokenScheme scheme_for(DomainKind kind) {
  return kind == DomainKind::Text ? TokenScheme::Whitespace : TokenScheme::Char;
}

inline bool is_chemical(DomainKind kind) { return kind == DomainKind::Molecule || kind == DomainKind::Reaction; }

}  // namespace rtrl
