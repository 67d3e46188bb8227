#include "rtrl/chem/smiles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <vector>

namespace rtrl::chem {

namespace {

struct RingOpen {
  int atom;
  std::optional<BondOrder> order;
  std::size_t pos;
};

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Molecule run() {
    if (s_.empty()) fail(SmilesErrorKind::Syntax, 0, "empty SMILES");
    while (i_ < s_.size()) {
      const char c = s_[i_];
      if (c == '(') {
        if (prev_ < 0) fail(SmilesErrorKind::Syntax, i_, "branch without preceding atom");
        if (pending_) fail(SmilesErrorKind::Syntax, i_, "bond symbol before '('");
        branches_.push_back({prev_, i_});
        need_atom_ = true;
        ++i_;
      } else if (c == ')') {
        if (branches_.empty()) fail(SmilesErrorKind::UnbalancedParenthesis, i_, "unmatched ')'");
        if (need_atom_ || pending_) fail(SmilesErrorKind::Syntax, i_, "empty branch or dangling bond before ')'");
        prev_ = branches_.back().first;
        branches_.pop_back();
        ++i_;
      } else if (c == '-' || c == '=' || c == '#' || c == ':') {
        if (prev_ < 0) fail(SmilesErrorKind::Syntax, i_, "bond without preceding atom");
        if (pending_) fail(SmilesErrorKind::Syntax, i_, "consecutive bond symbols");
        pending_ = c == '-' ? BondOrder::Single
                 : c == '=' ? BondOrder::Double
                 : c == '#' ? BondOrder::Triple
                            : BondOrder::Aromatic;
        pending_pos_ = i_;
        ++i_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        ring_closure();
      } else if (c == '[') {
        add_atom(bracket_atom());
      } else if (c == '.') {
        fail(SmilesErrorKind::MultiComponent, i_, "multi-component SMILES not accepted here");
      } else if (c == '/' || c == '\\' || c == '@' || c == '*') {
        fail(SmilesErrorKind::Unsupported, i_, std::string("unsupported SMILES feature '") + c + "'");
      } else {
        add_atom(organic_atom());
      }
    }
    if (pending_) fail(SmilesErrorKind::Syntax, pending_pos_, "dangling bond at end of input");
    if (!branches_.empty())
      fail(SmilesErrorKind::UnbalancedParenthesis, branches_.back().second, "unclosed '('");
    if (!rings_.empty()) {
      const auto& [digit, open] = *rings_.begin();
      fail(SmilesErrorKind::UnmatchedRingClosure, open.pos, "unmatched ring closure " + std::to_string(digit));
    }
    mol_.assign_implicit_h();
    try {
      mol_.validate();
    } catch (const ValenceError& e) {
      throw SmilesError(SmilesErrorKind::Valence, static_cast<std::size_t>(e.atom()), e.what());
    } catch (const std::invalid_argument& e) {
      throw SmilesError(SmilesErrorKind::Syntax, 0, e.what());
    }
    return std::move(mol_);
  }

 private:
  [[noreturn]] void fail(SmilesErrorKind kind, std::size_t pos, const std::string& msg) const {
    throw SmilesError(kind, pos, msg + " (position " + std::to_string(pos) + ")");
  }

  BondOrder default_order(int a, int b) const {
    return mol_.atom(a).aromatic && mol_.atom(b).aromatic ? BondOrder::Aromatic : BondOrder::Single;
  }

  void bond(int a, int b, BondOrder order, std::size_t pos) {
    try {
      mol_.add_bond(a, b, order);
    } catch (const std::invalid_argument& e) {
      fail(SmilesErrorKind::Syntax, pos, e.what());
    }
  }

  void add_atom(const Atom& atom) {
    const int id = mol_.add_atom(atom);
    if (prev_ >= 0) bond(prev_, id, pending_.value_or(default_order(prev_, id)), atom_pos_);
    pending_.reset();
    prev_ = id;
    need_atom_ = false;
  }

  Atom organic_atom() {
    atom_pos_ = i_;
    const char c = s_[i_];
    std::string_view two = s_.substr(i_, 2);
    if (two == "Cl" || two == "Br") {
      i_ += 2;
      return Atom{element_by_symbol(two)->number, false, 0, 0, 0, true};
    }
    if (std::islower(static_cast<unsigned char>(c))) {
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      const auto* e = element_by_symbol(std::string_view(&up, 1));
      if (!e || !e->organic || !e->aromatic_ok) fail(SmilesErrorKind::Syntax, i_, std::string("unexpected character '") + c + "'");
      ++i_;
      return Atom{e->number, true, 0, 0, 0, true};
    }
    const auto* e = element_by_symbol(std::string_view(&s_[i_], 1));
    if (!e || !e->organic) fail(SmilesErrorKind::Syntax, i_, std::string("unexpected character '") + c + "'");
    ++i_;
    return Atom{e->number, false, 0, 0, 0, true};
  }

  int read_int() {
    int v = 0;
    bool any = false;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) {
      v = v * 10 + (s_[i_] - '0');
      if (v > 999) fail(SmilesErrorKind::Syntax, i_, "number too large");
      ++i_;
      any = true;
    }
    return any ? v : -1;
  }

  Atom bracket_atom() {
    const std::size_t open = i_;
    atom_pos_ = i_;
    ++i_;
    Atom atom;
    atom.implicit_h = false;
    const int iso = read_int();
    atom.isotope = iso < 0 ? 0 : iso;
    if (i_ >= s_.size()) fail(SmilesErrorKind::Syntax, open, "unterminated bracket atom");

    const ElementInfo* e = nullptr;
    std::string_view two = s_.substr(i_, 2);
    if (two.size() == 2 && std::isupper(static_cast<unsigned char>(two[0])) &&
        std::islower(static_cast<unsigned char>(two[1])) && element_by_symbol(two)) {
      e = element_by_symbol(two);
      i_ += 2;
    } else if (std::isupper(static_cast<unsigned char>(s_[i_]))) {
      e = element_by_symbol(s_.substr(i_, 1));
      ++i_;
    } else if (std::islower(static_cast<unsigned char>(s_[i_]))) {
      const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(s_[i_])));
      e = element_by_symbol(std::string_view(&up, 1));
      if (e && !e->aromatic_ok) e = nullptr;
      atom.aromatic = true;
      ++i_;
    }
    if (!e) fail(SmilesErrorKind::Syntax, i_, "unknown or unsupported element in bracket atom");
    atom.element = e->number;

    if (i_ < s_.size() && s_[i_] == '@') fail(SmilesErrorKind::Unsupported, i_, "stereochemistry is not supported");
    if (i_ < s_.size() && s_[i_] == 'H') {
      ++i_;
      const int h = read_int();
      atom.hcount = h < 0 ? 1 : h;
    }
    if (i_ < s_.size() && (s_[i_] == '+' || s_[i_] == '-')) {
      const char sign = s_[i_++];
      int mag = read_int();
      if (mag < 0) {
        mag = 1;
        while (i_ < s_.size() && s_[i_] == sign) {
          ++mag;
          ++i_;
        }
      }
      atom.charge = sign == '+' ? mag : -mag;
    }
    if (i_ < s_.size() && s_[i_] == ':') fail(SmilesErrorKind::Unsupported, i_, "atom classes are not supported");
    if (i_ >= s_.size() || s_[i_] != ']') fail(SmilesErrorKind::Syntax, i_, "expected ']'");
    ++i_;
    return atom;
  }

  void ring_closure() {
    const std::size_t pos = i_;
    if (prev_ < 0) fail(SmilesErrorKind::Syntax, pos, "ring closure without preceding atom");
    int digit;
    if (s_[i_] == '%') {
      if (i_ + 2 >= s_.size() || !std::isdigit(static_cast<unsigned char>(s_[i_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s_[i_ + 2])))
        fail(SmilesErrorKind::Syntax, pos, "'%' must be followed by two digits");
      digit = (s_[i_ + 1] - '0') * 10 + (s_[i_ + 2] - '0');
      i_ += 3;
    } else {
      digit = s_[i_] - '0';
      ++i_;
    }
    if (digit == 0 && s_[pos] != '%') fail(SmilesErrorKind::Syntax, pos, "ring closure digit 0 is not allowed");
    auto it = rings_.find(digit);
    if (it == rings_.end()) {
      rings_.emplace(digit, RingOpen{prev_, pending_, pos});
    } else {
      const RingOpen open = it->second;
      rings_.erase(it);
      BondOrder order;
      if (open.order && pending_ && *open.order != *pending_)
        fail(SmilesErrorKind::Syntax, pos, "conflicting ring bond orders for closure " + std::to_string(digit));
      if (open.order)
        order = *open.order;
      else if (pending_)
        order = *pending_;
      else
        order = default_order(open.atom, prev_);
      if (open.atom == prev_) fail(SmilesErrorKind::Syntax, pos, "ring closure onto the same atom");
      bond(open.atom, prev_, order, pos);
    }
    pending_.reset();
  }

  std::string_view s_;
  std::size_t i_ = 0;
  Molecule mol_;
  int prev_ = -1;
  bool need_atom_ = false;
  std::optional<BondOrder> pending_;
  std::size_t pending_pos_ = 0;
  std::size_t atom_pos_ = 0;
  std::vector<std::pair<int, std::size_t>> branches_;
  std::map<int, RingOpen> rings_;
};

std::vector<std::string_view> split_dots(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto dot = text.find('.', start);
    out.push_back(text.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

}  // namespace

Molecule parse_smiles(std::string_view smiles) { return Parser(smiles).run(); }

int count_components(std::string_view text) {
  if (text.empty()) return 0;
  int n = 0;
  for (auto part : split_dots(text)) {
    try {
      parse_smiles(part);
    } catch (const SmilesError&) {
      return 0;
    }
    ++n;
  }
  return n;
}

std::string canonical_multi(std::string_view text) {
  std::vector<std::string> parts;
  for (auto part : split_dots(text)) parts.push_back(canonical_smiles(parse_smiles(part)));
  std::sort(parts.begin(), parts.end());
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back('.');
    out += parts[i];
  }
  return out;
}

}  // namespace rtrl::chem

namespace rtrl::chem {

Molecule merge(const std::vector<Molecule>& parts) {
  Molecule out;
  for (const auto& m : parts) {
    const int base = static_cast<int>(out.num_atoms());
    for (const auto& a : m.atoms()) out.add_atom(a);
    for (const auto& b : m.bonds()) out.add_bond(base + b.a, base + b.b, b.order);
  }
  return out;
}

Molecule parse_multi(std::string_view text) {
  std::vector<Molecule> parts;
  for (auto part : split_dots(text)) parts.push_back(parse_smiles(part));
  return merge(parts);
}

}  // namespace rtrl::chem
