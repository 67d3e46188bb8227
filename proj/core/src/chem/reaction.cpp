#include "rtrl/chem/reaction.hpp"

#include <stdexcept>

#include "rtrl/chem/smiles.hpp"

namespace rtrl::chem {

namespace {

std::vector<Molecule> parse_field(std::string_view field) {
  std::vector<Molecule> out;
  if (field.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto dot = field.find('.', start);
    const auto part = field.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    out.push_back(parse_smiles(part));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

}  // namespace

Reaction parse_reaction(std::string_view text) {
  const auto first = text.find('>');
  const auto second = first == std::string_view::npos ? first : text.find('>', first + 1);
  if (first == std::string_view::npos || second == std::string_view::npos ||
      text.find('>', second + 1) != std::string_view::npos) {
    throw std::invalid_argument("reaction SMILES needs exactly two '>' separators: '" + std::string(text) + "'");
  }
  Reaction r;
  r.reactants = parse_field(text.substr(0, first));
  r.reagents = parse_field(text.substr(first + 1, second - first - 1));
  r.products = parse_field(text.substr(second + 1));
  if (r.products.empty()) throw std::invalid_argument("reaction has no products");
  return r;
}

}  // namespace rtrl::chem
