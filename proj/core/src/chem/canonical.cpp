#include <algorithm>
#include <numeric>
#include <tuple>
#include <vector>

#include "rtrl/chem/smiles.hpp"

namespace rtrl::chem {

namespace {

std::string atom_symbol(const Molecule& mol, int i) {
  const Atom& a = mol.atom(i);
  const auto& info = element_info(a.element);
  std::string sym(info.symbol);
  if (a.aromatic) sym[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(sym[0])));

  const bool bare = info.organic && a.charge == 0 && a.isotope == 0 && mol.implicit_hydrogens(i) == a.hcount;
  if (bare) return sym;

  std::string out = "[";
  if (a.isotope > 0) out += std::to_string(a.isotope);
  out += sym;
  if (a.hcount > 0) {
    out += 'H';
    if (a.hcount > 1) out += std::to_string(a.hcount);
  }
  if (a.charge != 0) {
    out += a.charge > 0 ? '+' : '-';
    if (std::abs(a.charge) > 1) out += std::to_string(std::abs(a.charge));
  }
  out += ']';
  return out;
}

std::string bond_symbol(const Molecule& mol, const Bond& b) {
  const bool both_aromatic = mol.atom(b.a).aromatic && mol.atom(b.b).aromatic;
  switch (b.order) {
    case BondOrder::Single:
      return both_aromatic ? "-" : "";
    case BondOrder::Double:
      return "=";
    case BondOrder::Triple:
      return "#";
    case BondOrder::Aromatic:
      return both_aromatic ? "" : ":";
  }
  return "";
}

std::string ring_label(int digit) {
  if (digit < 10) return std::to_string(digit);
  return "%" + std::to_string(digit);
}

struct Writer {
  Writer(const Molecule& m, std::span<const int> r) : mol(m), ranks(r) {}

  const Molecule& mol;
  std::span<const int> ranks;

  std::vector<int> order;           // visit position per atom
  std::vector<int> parent_bond;     // tree bond into each atom
  std::vector<std::vector<int>> children;
  std::vector<std::vector<int>> ring_bonds;  // ring-closure bonds per atom
  std::vector<bool> bond_used;
  int visited = 0;

  std::vector<int> digit_of;  // per bond
  std::vector<bool> digit_busy;
  std::string out;

  std::vector<Neighbor> sorted_neighbors(int u) const {
    auto nbs = mol.neighbors(u);
    std::vector<Neighbor> v(nbs.begin(), nbs.end());
    std::sort(v.begin(), v.end(), [&](const Neighbor& x, const Neighbor& y) {
      return ranks[static_cast<std::size_t>(x.atom)] < ranks[static_cast<std::size_t>(y.atom)];
    });
    return v;
  }

  void walk(int u) {
    order[static_cast<std::size_t>(u)] = visited++;
    for (const auto& nb : sorted_neighbors(u)) {
      if (bond_used[static_cast<std::size_t>(nb.bond)]) continue;
      bond_used[static_cast<std::size_t>(nb.bond)] = true;
      if (order[static_cast<std::size_t>(nb.atom)] < 0) {
        parent_bond[static_cast<std::size_t>(nb.atom)] = nb.bond;
        children[static_cast<std::size_t>(u)].push_back(nb.atom);
        walk(nb.atom);
      } else {
        ring_bonds[static_cast<std::size_t>(u)].push_back(nb.bond);
        ring_bonds[static_cast<std::size_t>(nb.atom)].push_back(nb.bond);
      }
    }
  }

  int take_digit() {
    for (std::size_t d = 1; d < digit_busy.size(); ++d) {
      if (!digit_busy[d]) {
        digit_busy[d] = true;
        return static_cast<int>(d);
      }
    }
    throw std::runtime_error("write_smiles: more than 99 open rings");
  }

  void emit(int u) {
    const int pb = parent_bond[static_cast<std::size_t>(u)];
    if (pb >= 0) out += bond_symbol(mol, mol.bond(pb));
    out += atom_symbol(mol, u);

    // Closings first (partner visited earlier), in digit order; then openings
    // ordered by the partner's visit position.
    std::vector<std::pair<int, int>> closings, openings;
    for (int b : ring_bonds[static_cast<std::size_t>(u)]) {
      const int other = mol.bond(b).other(u);
      if (order[static_cast<std::size_t>(other)] < order[static_cast<std::size_t>(u)])
        closings.push_back({digit_of[static_cast<std::size_t>(b)], b});
      else
        openings.push_back({order[static_cast<std::size_t>(other)], b});
    }
    std::sort(closings.begin(), closings.end());
    std::sort(openings.begin(), openings.end());
    for (const auto& [digit, b] : closings) out += ring_label(digit);
    for (const auto& [pos, b] : openings) {
      const int d = take_digit();
      digit_of[static_cast<std::size_t>(b)] = d;
      out += bond_symbol(mol, mol.bond(b));
      out += ring_label(d);
    }
    for (const auto& [digit, b] : closings) digit_busy[static_cast<std::size_t>(digit)] = false;

    const auto& kids = children[static_cast<std::size_t>(u)];
    for (std::size_t k = 0; k < kids.size(); ++k) {
      const bool last = k + 1 == kids.size();
      if (!last) out += '(';
      emit(kids[k]);
      if (!last) out += ')';
    }
  }

  std::string run() {
    const std::size_t n = mol.num_atoms();
    order.assign(n, -1);
    parent_bond.assign(n, -1);
    children.assign(n, {});
    ring_bonds.assign(n, {});
    bond_used.assign(mol.num_bonds(), false);
    digit_of.assign(mol.num_bonds(), -1);
    digit_busy.assign(100, false);

    int start = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (ranks[i] < ranks[static_cast<std::size_t>(start)]) start = static_cast<int>(i);
    walk(start);
    if (visited != static_cast<int>(n)) throw std::invalid_argument("write_smiles: molecule is not connected");
    emit(start);
    return out;
  }
};

using Ranks = std::vector<int>;

/// Replaces arbitrary sortable keys with dense ranks 0..k-1.
template <typename Key>
Ranks dense_ranks(const std::vector<Key>& keys) {
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  Ranks r(keys.size(), 0);
  int cur = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (k > 0 && keys[idx[k - 1]] < keys[idx[k]]) ++cur;
    r[idx[k]] = cur;
  }
  return r;
}

int num_classes(const Ranks& r) { return r.empty() ? 0 : *std::max_element(r.begin(), r.end()) + 1; }

/// Iterative neighbor refinement until the partition stops splitting.
Ranks refine(const Molecule& mol, Ranks ranks) {
  int classes = num_classes(ranks);
  while (true) {
    using Key = std::pair<int, std::vector<std::pair<int, int>>>;
    std::vector<Key> keys(mol.num_atoms());
    for (std::size_t i = 0; i < mol.num_atoms(); ++i) {
      keys[i].first = ranks[i];
      for (const auto& nb : mol.neighbors(static_cast<int>(i)))
        keys[i].second.push_back({ranks[static_cast<std::size_t>(nb.atom)], static_cast<int>(mol.bond(nb.bond).order)});
      std::sort(keys[i].second.begin(), keys[i].second.end());
    }
    Ranks next = dense_ranks(keys);
    const int next_classes = num_classes(next);
    if (next_classes == classes) return ranks;
    ranks = std::move(next);
    classes = next_classes;
  }
}

Ranks initial_ranks(const Molecule& mol) {
  const auto in_ring = mol.ring_atoms();
  using Key = std::tuple<int, int, int, int, int, int, int>;
  std::vector<Key> keys;
  keys.reserve(mol.num_atoms());
  for (std::size_t i = 0; i < mol.num_atoms(); ++i) {
    const Atom& a = mol.atoms()[i];
    keys.emplace_back(a.element, mol.degree(static_cast<int>(i)), a.charge, a.hcount, a.aromatic ? 1 : 0, a.isotope,
                      in_ring[i] ? 1 : 0);
  }
  return dense_ranks(keys);
}

struct Best {
  std::string smiles;
  Ranks ranks;
  bool found = false;
};

/// Exhaustive tie-breaking over the lowest tied class; keeps the
/// lexicographically smallest string. Exact invariance at the cost of
/// exponential time on highly symmetric graphs.
void search(const Molecule& mol, Ranks ranks, Best& best) {
  ranks = refine(mol, std::move(ranks));
  const int classes = num_classes(ranks);
  if (classes == static_cast<int>(mol.num_atoms())) {
    std::string s = write_smiles(mol, ranks);
    if (!best.found || s < best.smiles) {
      best.smiles = std::move(s);
      best.ranks = ranks;
      best.found = true;
    }
    return;
  }
  std::vector<int> count(static_cast<std::size_t>(classes), 0);
  for (int r : ranks) ++count[static_cast<std::size_t>(r)];
  int tied = 0;
  while (count[static_cast<std::size_t>(tied)] < 2) ++tied;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] != tied) continue;
    Ranks split(ranks.size());
    for (std::size_t j = 0; j < ranks.size(); ++j) split[j] = 2 * ranks[j] + ((ranks[j] == tied && j != i) ? 1 : 0);
    search(mol, dense_ranks(split), best);
  }
}

}  // namespace

std::string write_smiles(const Molecule& mol, std::span<const int> ranks) {
  if (ranks.size() != mol.num_atoms()) throw std::invalid_argument("write_smiles: rank count mismatch");
  if (mol.num_atoms() == 0) return "";
  return Writer(mol, ranks).run();
}

std::vector<int> canonical_ranks(const Molecule& mol) {
  if (mol.num_atoms() == 0) return {};
  Best best;
  search(mol, initial_ranks(mol), best);
  return best.ranks;
}

std::string canonical_smiles(const Molecule& mol) {
  if (mol.num_atoms() == 0) return "";
  Best best;
  search(mol, initial_ranks(mol), best);
  return best.smiles;
}

}  // namespace rtrl::chem
