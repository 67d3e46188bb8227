#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "rtrl/chem/molecule.hpp"

namespace rtrl::chem {

enum class SmilesErrorKind {
  Syntax,
  UnmatchedRingClosure,
  UnbalancedParenthesis,
  Valence,
  MultiComponent,
  Unsupported,
};

class SmilesError : public std::runtime_error {
 public:
  /// `where` is a character offset, except for Valence where it is the atom index.
  SmilesError(SmilesErrorKind kind, std::size_t where, const std::string& what)
      : std::runtime_error(what), kind_(kind), where_(where) {}
  SmilesErrorKind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return where_; }
  std::size_t atom() const noexcept { return where_; }

 private:
  SmilesErrorKind kind_;
  std::size_t where_;
};

/// Restricted SMILES: organic subset, bracket atoms [iso Sym Hn charge],
/// aromatic b c n o p s, bonds - = # :, branches, ring closures 1-9 and %nn.
/// No stereo, no wildcards, no dots.
Molecule parse_smiles(std::string_view smiles);

/// Writes SMILES following a DFS driven by `ranks` (one distinct value per
/// atom; lower visits first). The molecule must be a single component.
std::string write_smiles(const Molecule& mol, std::span<const int> ranks);

/// Canonical SMILES: invariant under atom relabeling.
std::string canonical_smiles(const Molecule& mol);

/// Canonical atom ranks (a permutation of 0..n-1) realizing canonical_smiles.
std::vector<int> canonical_ranks(const Molecule& mol);

/// Number of dot-separated components when every component parses, else 0.
int count_components(std::string_view text);

/// Canonicalizes each component of a dot-joined string, sorts, re-joins.
/// Throws SmilesError on any bad component.
std::string canonical_multi(std::string_view text);

}  // namespace rtrl::chem

namespace rtrl::chem {

/// Parses a dot-joined SMILES into one (possibly disconnected) graph.
Molecule parse_multi(std::string_view text);

/// Merges molecules into one disconnected graph.
Molecule merge(const std::vector<Molecule>& parts);

}  // namespace rtrl::chem
