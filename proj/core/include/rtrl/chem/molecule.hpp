#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rtrl::chem {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

/// Contribution of a bond to an atom's valence. Aromatic bonds count as 1.
int valence_contribution(BondOrder order) noexcept;

struct Atom {
  int element = 6;  // atomic number
  bool aromatic = false;
  int charge = 0;
  int hcount = 0;    // total attached hydrogens
  int isotope = 0;   // 0 = unspecified
  bool implicit_h = true;  // hcount derived from the valence table (organic-subset atom)

  bool operator==(const Atom&) const = default;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;

  int other(int atom) const noexcept { return atom == a ? b : a; }
  bool operator==(const Bond&) const = default;
};

struct Neighbor {
  int atom;
  int bond;
};

class ValenceError : public std::runtime_error {
 public:
  ValenceError(int atom, const std::string& what) : std::runtime_error(what), atom_(atom) {}
  int atom() const noexcept { return atom_; }

 private:
  int atom_;
};

/// Element data for the supported subset: B C N O P S F Cl Br I, plus H
/// (bracket only).
struct ElementInfo {
  int number;
  std::string_view symbol;
  std::span<const int> valences;  // neutral valences, ascending
  bool organic;                   // may appear outside brackets
  bool aromatic_ok;               // may be written lowercase
};

const ElementInfo* element_by_symbol(std::string_view symbol);
const ElementInfo& element_info(int number);

/// Allowed valences after adjusting for formal charge (ascending, non-negative).
/// N O P S and halogens shift by +charge, C by -|charge|, B by -charge.
std::vector<int> allowed_valences(int element, int charge);

/// Molecular graph. Immutable once validated; graph edits go through the
/// mutators and must be followed by assign_implicit_h()/validate().
class Molecule {
 public:
  int add_atom(const Atom& atom);
  int add_bond(int a, int b, BondOrder order);  // rejects self loops and duplicates
  void set_bond_order(int bond, BondOrder order);
  void set_element(int atom, int element);
  /// Removes an atom and its bonds; later atom indices shift down by one.
  void remove_atom(int atom);

  std::size_t num_atoms() const noexcept { return atoms_.size(); }
  std::size_t num_bonds() const noexcept { return bonds_.size(); }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  const std::vector<Bond>& bonds() const noexcept { return bonds_; }
  const Atom& atom(int i) const { return atoms_.at(static_cast<std::size_t>(i)); }
  const Bond& bond(int i) const { return bonds_.at(static_cast<std::size_t>(i)); }
  std::span<const Neighbor> neighbors(int atom) const {
    return adjacency_.at(static_cast<std::size_t>(atom));
  }
  int degree(int atom) const { return static_cast<int>(neighbors(atom).size()); }
  std::optional<int> bond_between(int a, int b) const;

  /// Sum of bond contributions (aromatic = 1), hydrogens excluded.
  int bond_valence(int atom) const;
  /// Hydrogen count implied by the valence table for an organic-subset atom.
  int implicit_hydrogens(int atom) const;
  void assign_implicit_h();

  /// Per-bond flag: bond lies on a cycle (not a bridge).
  std::vector<bool> ring_bonds() const;
  std::vector<bool> ring_atoms() const;
  int num_components() const;

  /// Throws ValenceError (naming the atom) or std::invalid_argument.
  void validate() const;

  /// Returns the molecule with atom i moved to position perm[i].
  Molecule permuted(std::span<const int> perm) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

}  // namespace rtrl::chem
