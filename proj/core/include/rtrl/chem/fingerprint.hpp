#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "rtrl/chem/molecule.hpp"

namespace rtrl::chem {

enum class FingerprintFamily { Circular, Path };

class Fingerprint {
 public:
  Fingerprint(FingerprintFamily family, std::size_t nbits);

  FingerprintFamily family() const noexcept { return family_; }
  std::size_t width() const noexcept { return nbits_; }
  void set(std::size_t bit);
  bool test(std::size_t bit) const;
  std::size_t count() const noexcept;
  std::vector<std::size_t> on_bits() const;
  const std::vector<std::uint64_t>& words() const noexcept { return words_; }

  bool operator==(const Fingerprint&) const = default;

 private:
  FingerprintFamily family_;
  std::size_t nbits_;
  std::vector<std::uint64_t> words_;
};

/// Bit index for a 64-bit feature hash: splitmix64(h) & (nbits - 1).
std::size_t feature_bit(std::uint64_t feature_hash, std::size_t nbits) noexcept;

/// FNV-1a 64 over a string, used for path labels.
std::uint64_t fnv1a(std::string_view s) noexcept;

/// Morgan-style circular fingerprint. Radius 0 encodes heavy-atom identity
/// (element, aromaticity, charge, isotope); each further radius folds in the
/// sorted (bond order, neighbor id) multiset.
Fingerprint circular_fingerprint(const Molecule& mol, int radius = 2, std::size_t nbits = 2048);

/// Circular environment identifiers, one list per radius (exposed for tests).
std::vector<std::vector<std::uint64_t>> circular_environments(const Molecule& mol, int radius);

/// All simple bond paths of 1..max_len bonds, labelled as e.g. "C-C=O" and
/// read in the lexicographically smaller direction.
Fingerprint path_fingerprint(const Molecule& mol, int max_len = 5, std::size_t nbits = 2048);
std::vector<std::string> path_strings(const Molecule& mol, int max_len);

/// |A and B| / |A or B|; 1.0 when both are empty.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

/// Fixed order: atom count, bond count, ring count (cyclomatic), aromatic
/// atom count, heteroatom count, mean degree, formal charge sum, density of
/// the radius-2 circular fingerprint at 2048 bits.
inline constexpr std::size_t kDescriptorDim = 8;
std::vector<double> descriptor_vector(const Molecule& mol);

}  // namespace rtrl::chem
