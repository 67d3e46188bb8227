#include "rtrl/chem/fingerprint.hpp"

#include <algorithm>
#include <bit>
#include <set>
#include <stdexcept>
#include <string>

#include "rtrl/rng.hpp"

namespace rtrl::chem {

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) noexcept { return splitmix64(h ^ splitmix64(v)); }

char bond_char(BondOrder o) {
  switch (o) {
    case BondOrder::Single:
      return '-';
    case BondOrder::Double:
      return '=';
    case BondOrder::Triple:
      return '#';
    case BondOrder::Aromatic:
      return ':';
  }
  return '?';
}

std::string atom_label(const Atom& a) {
  std::string s(element_info(a.element).symbol);
  if (a.aromatic) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

Fingerprint::Fingerprint(FingerprintFamily family, std::size_t nbits) : family_(family), nbits_(nbits) {
  if (nbits == 0 || !std::has_single_bit(nbits)) throw std::invalid_argument("fingerprint width must be a power of two");
  words_.assign((nbits + 63) / 64, 0);
}

void Fingerprint::set(std::size_t bit) { words_.at(bit / 64) |= (std::uint64_t{1} << (bit % 64)); }

bool Fingerprint::test(std::size_t bit) const { return (words_.at(bit / 64) >> (bit % 64)) & 1U; }

std::size_t Fingerprint::count() const noexcept {
  std::size_t c = 0;
  for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
  return c;
}

std::vector<std::size_t> Fingerprint::on_bits() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nbits_; ++i)
    if (test(i)) out.push_back(i);
  return out;
}

std::size_t feature_bit(std::uint64_t feature_hash, std::size_t nbits) noexcept {
  return static_cast<std::size_t>(splitmix64(feature_hash) & (nbits - 1));
}

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::vector<std::vector<std::uint64_t>> circular_environments(const Molecule& mol, int radius) {
  if (radius < 0) throw std::invalid_argument("circular fingerprint radius must be >= 0");
  std::vector<std::vector<std::uint64_t>> envs;
  std::vector<std::uint64_t> cur(mol.num_atoms());
  for (std::size_t i = 0; i < mol.num_atoms(); ++i) {
    const Atom& a = mol.atoms()[i];
    std::uint64_t h = 0x6D6F7267616E3030ULL;  // "morgan00"
    h = mix(h, static_cast<std::uint64_t>(a.element));
    h = mix(h, a.aromatic ? 1U : 0U);
    h = mix(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(a.charge)));
    h = mix(h, static_cast<std::uint64_t>(a.isotope));
    cur[i] = h;
  }
  envs.push_back(cur);
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(mol.num_atoms());
    for (std::size_t i = 0; i < mol.num_atoms(); ++i) {
      std::vector<std::pair<int, std::uint64_t>> nbrs;
      for (const auto& nb : mol.neighbors(static_cast<int>(i)))
        nbrs.push_back({static_cast<int>(mol.bond(nb.bond).order), cur[static_cast<std::size_t>(nb.atom)]});
      std::sort(nbrs.begin(), nbrs.end());
      std::uint64_t h = mix(cur[i], static_cast<std::uint64_t>(r));
      for (const auto& [order, id] : nbrs) h = mix(mix(h, static_cast<std::uint64_t>(order)), id);
      next[i] = h;
    }
    cur = std::move(next);
    envs.push_back(cur);
  }
  return envs;
}

Fingerprint circular_fingerprint(const Molecule& mol, int radius, std::size_t nbits) {
  Fingerprint fp(FingerprintFamily::Circular, nbits);
  for (const auto& layer : circular_environments(mol, radius))
    for (auto id : layer) fp.set(feature_bit(id, nbits));
  return fp;
}

std::vector<std::string> path_strings(const Molecule& mol, int max_len) {
  if (max_len < 1) throw std::invalid_argument("path fingerprint max_len must be >= 1");
  std::set<std::string> found;
  std::vector<int> atoms;
  std::vector<BondOrder> orders;
  std::vector<bool> on_path(mol.num_atoms(), false);

  auto label = [&]() {
    std::string fwd, rev;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      if (k) fwd += bond_char(orders[k - 1]);
      fwd += atom_label(mol.atom(atoms[k]));
    }
    for (std::size_t k = atoms.size(); k-- > 0;) {
      rev += atom_label(mol.atom(atoms[k]));
      if (k) rev += bond_char(orders[k - 1]);
    }
    return std::min(fwd, rev);
  };

  auto extend = [&](auto&& self, int u) -> void {
    if (static_cast<int>(orders.size()) == max_len) return;
    for (const auto& nb : mol.neighbors(u)) {
      if (on_path[static_cast<std::size_t>(nb.atom)]) continue;
      on_path[static_cast<std::size_t>(nb.atom)] = true;
      atoms.push_back(nb.atom);
      orders.push_back(mol.bond(nb.bond).order);
      found.insert(label());
      self(self, nb.atom);
      atoms.pop_back();
      orders.pop_back();
      on_path[static_cast<std::size_t>(nb.atom)] = false;
    }
  };

  for (std::size_t s = 0; s < mol.num_atoms(); ++s) {
    on_path[s] = true;
    atoms.push_back(static_cast<int>(s));
    extend(extend, static_cast<int>(s));
    atoms.pop_back();
    on_path[s] = false;
  }
  return {found.begin(), found.end()};
}

Fingerprint path_fingerprint(const Molecule& mol, int max_len, std::size_t nbits) {
  Fingerprint fp(FingerprintFamily::Path, nbits);
  for (const auto& p : path_strings(mol, max_len)) fp.set(feature_bit(fnv1a(p), nbits));
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.family() != b.family()) throw std::invalid_argument("tanimoto: fingerprint families differ");
  if (a.width() != b.width()) throw std::invalid_argument("tanimoto: fingerprint widths differ");
  std::size_t both = 0, either = 0;
  for (std::size_t i = 0; i < a.words().size(); ++i) {
    both += static_cast<std::size_t>(std::popcount(a.words()[i] & b.words()[i]));
    either += static_cast<std::size_t>(std::popcount(a.words()[i] | b.words()[i]));
  }
  if (either == 0) return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

std::vector<double> descriptor_vector(const Molecule& mol) {
  const double atoms = static_cast<double>(mol.num_atoms());
  const double bonds = static_cast<double>(mol.num_bonds());
  double aromatic = 0, hetero = 0, charge = 0;
  for (const auto& a : mol.atoms()) {
    aromatic += a.aromatic ? 1 : 0;
    hetero += (a.element != 6 && a.element != 1) ? 1 : 0;
    charge += a.charge;
  }
  const double rings = bonds - atoms + mol.num_components();
  const double mean_degree = atoms > 0 ? 2.0 * bonds / atoms : 0.0;
  const double density = static_cast<double>(circular_fingerprint(mol, 2, 2048).count()) / 2048.0;
  return {atoms, bonds, rings, aromatic, hetero, mean_degree, charge, density};
}

}  // namespace rtrl::chem
