#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rtrl/chem/molecule.hpp"

namespace rtrl::chem {

/// Reactants>Reagents>Products. Element balance is not required; products
/// must be non-empty.
struct Reaction {
  std::vector<Molecule> reactants;
  std::vector<Molecule> reagents;
  std::vector<Molecule> products;
};

/// Throws std::invalid_argument for a malformed layout and SmilesError for a
/// bad component.
Reaction parse_reaction(std::string_view text);

}  // namespace rtrl::chem
