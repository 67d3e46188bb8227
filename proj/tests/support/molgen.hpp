#pragma once

#include <vector>

#include "rtrl/chem/molecule.hpp"
#include "rtrl/rng.hpp"

namespace oracle {

/// Random valid single-component molecule with at most `max_atoms` heavy
/// atoms: a random tree over C N O S F Cl Br, optional extra ring bonds,
/// optional aromatic six-ring, occasional charged bracket nitrogen.
rtrl::chem::Molecule random_molecule(rtrl::Rng& rng, int max_atoms = 12);

std::vector<int> random_permutation(rtrl::Rng& rng, std::size_t n);

/// Backtracking search for an atom mapping that preserves atom labels
/// (element, aromaticity, charge, hydrogens, isotope) and bond orders.
bool isomorphic(const rtrl::chem::Molecule& a, const rtrl::chem::Molecule& b);

}  // namespace oracle
