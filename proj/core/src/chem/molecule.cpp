#include "rtrl/chem/molecule.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <functional>

namespace rtrl::chem {

namespace {

constexpr std::array<int, 1> kV1{1};
constexpr std::array<int, 1> kV2{2};
constexpr std::array<int, 1> kV3{3};
constexpr std::array<int, 1> kV4{4};
constexpr std::array<int, 2> kV35{3, 5};
constexpr std::array<int, 3> kV246{2, 4, 6};

const std::array<ElementInfo, 11> kElements{{
    {1, "H", kV1, false, false},
    {5, "B", kV3, true, true},
    {6, "C", kV4, true, true},
    {7, "N", kV35, true, true},
    {8, "O", kV2, true, true},
    {9, "F", kV1, true, false},
    {15, "P", kV35, true, true},
    {16, "S", kV246, true, true},
    {17, "Cl", kV1, true, false},
    {35, "Br", kV1, true, false},
    {53, "I", kV1, true, false},
}};

}  // namespace

int valence_contribution(BondOrder order) noexcept {
  return order == BondOrder::Aromatic ? 1 : static_cast<int>(order);
}

const ElementInfo* element_by_symbol(std::string_view symbol) {
  for (const auto& e : kElements)
    if (e.symbol == symbol) return &e;
  return nullptr;
}

const ElementInfo& element_info(int number) {
  for (const auto& e : kElements)
    if (e.number == number) return e;
  throw std::invalid_argument("unsupported element number " + std::to_string(number));
}

std::vector<int> allowed_valences(int element, int charge) {
  std::vector<int> out;
  for (int v : element_info(element).valences) {
    int adj;
    if (element == 6)
      adj = v - std::abs(charge);
    else if (element == 5)
      adj = v - charge;
    else
      adj = v + charge;
    if (adj >= 0) out.push_back(adj);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int Molecule::add_atom(const Atom& atom) {
  element_info(atom.element);
  atoms_.push_back(atom);
  adjacency_.emplace_back();
  return static_cast<int>(atoms_.size()) - 1;
}

int Molecule::add_bond(int a, int b, BondOrder order) {
  const int n = static_cast<int>(atoms_.size());
  if (a < 0 || b < 0 || a >= n || b >= n) throw std::out_of_range("add_bond: atom index out of range");
  if (a == b) throw std::invalid_argument("add_bond: self loop on atom " + std::to_string(a));
  if (bond_between(a, b)) {
    throw std::invalid_argument("add_bond: duplicate bond " + std::to_string(a) + "-" + std::to_string(b));
  }
  bonds_.push_back({a, b, order});
  const int id = static_cast<int>(bonds_.size()) - 1;
  adjacency_[static_cast<std::size_t>(a)].push_back({b, id});
  adjacency_[static_cast<std::size_t>(b)].push_back({a, id});
  return id;
}

void Molecule::set_bond_order(int bond, BondOrder order) { bonds_.at(static_cast<std::size_t>(bond)).order = order; }

void Molecule::set_element(int atom, int element) {
  element_info(element);
  atoms_.at(static_cast<std::size_t>(atom)).element = element;
}

void Molecule::remove_atom(int atom) {
  Molecule out;
  std::vector<int> remap(atoms_.size(), -1);
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (static_cast<int>(i) == atom) continue;
    remap[i] = out.add_atom(atoms_[i]);
  }
  for (const auto& b : bonds_) {
    if (b.a == atom || b.b == atom) continue;
    out.add_bond(remap[static_cast<std::size_t>(b.a)], remap[static_cast<std::size_t>(b.b)], b.order);
  }
  *this = std::move(out);
}

std::optional<int> Molecule::bond_between(int a, int b) const {
  for (const auto& nb : adjacency_.at(static_cast<std::size_t>(a)))
    if (nb.atom == b) return nb.bond;
  return std::nullopt;
}

int Molecule::bond_valence(int atom) const {
  int sum = 0;
  for (const auto& nb : neighbors(atom)) sum += valence_contribution(bonds_[static_cast<std::size_t>(nb.bond)].order);
  return sum;
}

int Molecule::implicit_hydrogens(int atom) const {
  const Atom& a = atoms_.at(static_cast<std::size_t>(atom));
  const int used = bond_valence(atom);
  bool has_aromatic_bond = false;
  for (const auto& nb : neighbors(atom))
    has_aromatic_bond |= bonds_[static_cast<std::size_t>(nb.bond)].order == BondOrder::Aromatic;
  for (int v : allowed_valences(a.element, a.charge)) {
    if (v < used) continue;
    int h = v - used;
    // One valence unit of an aromatic atom goes to the pi system.
    if (a.aromatic && has_aromatic_bond) h = std::max(0, h - 1);
    return h;
  }
  return 0;
}

void Molecule::assign_implicit_h() {
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    if (atoms_[i].implicit_h) atoms_[i].hcount = implicit_hydrogens(static_cast<int>(i));
}

std::vector<bool> Molecule::ring_bonds() const {
  // Bridge finding (Tarjan); a bond is a ring bond iff it is not a bridge.
  const std::size_t n = atoms_.size();
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> ring(bonds_.size(), true);
  int timer = 0;
  std::function<void(int, int)> dfs = [&](int u, int via) {
    disc[static_cast<std::size_t>(u)] = low[static_cast<std::size_t>(u)] = timer++;
    for (const auto& nb : adjacency_[static_cast<std::size_t>(u)]) {
      if (nb.bond == via) continue;
      auto v = static_cast<std::size_t>(nb.atom);
      if (disc[v] < 0) {
        dfs(nb.atom, nb.bond);
        low[static_cast<std::size_t>(u)] = std::min(low[static_cast<std::size_t>(u)], low[v]);
        if (low[v] > disc[static_cast<std::size_t>(u)]) ring[static_cast<std::size_t>(nb.bond)] = false;
      } else {
        low[static_cast<std::size_t>(u)] = std::min(low[static_cast<std::size_t>(u)], disc[v]);
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i)
    if (disc[i] < 0) dfs(static_cast<int>(i), -1);
  return ring;
}

std::vector<bool> Molecule::ring_atoms() const {
  const auto rb = ring_bonds();
  std::vector<bool> out(atoms_.size(), false);
  for (std::size_t i = 0; i < bonds_.size(); ++i) {
    if (!rb[i]) continue;
    out[static_cast<std::size_t>(bonds_[i].a)] = true;
    out[static_cast<std::size_t>(bonds_[i].b)] = true;
  }
  return out;
}

int Molecule::num_components() const {
  std::vector<bool> seen(atoms_.size(), false);
  int comps = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < atoms_.size(); ++s) {
    if (seen[s]) continue;
    ++comps;
    seen[s] = true;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (const auto& nb : neighbors(u)) {
        if (!seen[static_cast<std::size_t>(nb.atom)]) {
          seen[static_cast<std::size_t>(nb.atom)] = true;
          stack.push_back(nb.atom);
        }
      }
    }
  }
  return comps;
}

void Molecule::validate() const {
  if (atoms_.empty()) throw std::invalid_argument("molecule has no atoms");
  const auto in_ring = ring_atoms();
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const Atom& a = atoms_[i];
    const auto& info = element_info(a.element);
    const int idx = static_cast<int>(i);
    if (a.hcount < 0) throw ValenceError(idx, "negative hydrogen count on atom " + std::to_string(i));
    if (a.aromatic && !info.aromatic_ok)
      throw ValenceError(idx, "element " + std::string(info.symbol) + " cannot be aromatic (atom " + std::to_string(i) + ")");
    if (a.aromatic && !in_ring[i]) throw ValenceError(idx, "aromatic atom " + std::to_string(i) + " is not on a ring");
    const auto allowed = allowed_valences(a.element, a.charge);
    const int used = bond_valence(idx) + a.hcount;
    if (allowed.empty() || used > allowed.back()) {
      throw ValenceError(idx, "valence violation on atom " + std::to_string(i) + " (" + std::string(info.symbol) +
                                  " uses " + std::to_string(used) + ")");
    }
  }
  for (const auto& b : bonds_) {
    if (b.order == BondOrder::Aromatic &&
        !(atoms_[static_cast<std::size_t>(b.a)].aromatic && atoms_[static_cast<std::size_t>(b.b)].aromatic)) {
      throw ValenceError(b.a, "aromatic bond between non-aromatic atoms " + std::to_string(b.a) + "-" + std::to_string(b.b));
    }
  }
}

Molecule Molecule::permuted(std::span<const int> perm) const {
  if (perm.size() != atoms_.size()) throw std::invalid_argument("permuted: size mismatch");
  std::vector<int> inverse(perm.size(), -1);
  for (std::size_t i = 0; i < perm.size(); ++i) inverse.at(static_cast<std::size_t>(perm[i])) = static_cast<int>(i);
  Molecule out;
  for (int src : inverse) out.add_atom(atoms_.at(static_cast<std::size_t>(src)));
  for (const auto& b : bonds_)
    out.add_bond(perm[static_cast<std::size_t>(b.a)], perm[static_cast<std::size_t>(b.b)], b.order);
  return out;
}

}  // namespace rtrl::chem
