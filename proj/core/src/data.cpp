#include "rtrl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rtrl/chem/smiles.hpp"
#include "rtrl/rng.hpp"

namespace rtrl {

using nlohmann::json;

std::vector<std::string> Dataset::inputs() const {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.input);
  return out;
}

std::vector<std::string> Dataset::outputs() const {
  if (!labeled) throw std::invalid_argument("dataset has no labels");
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(*r.output);
  return out;
}

Dataset Dataset::without_labels() const {
  Dataset d = *this;
  d.labeled = false;
  for (auto& r : d.records) r.output.reset();
  return d;
}

Dataset Dataset::swapped() const {
  if (!labeled) throw std::invalid_argument("cannot swap an unlabeled dataset");
  Dataset d = *this;
  std::swap(d.source, d.target);
  for (auto& r : d.records) std::swap(r.input, *r.output);
  return d;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].input.empty()) throw std::invalid_argument("record " + std::to_string(i) + ": empty input");
    if (records[i].output.has_value() != labeled)
      throw std::invalid_argument("record " + std::to_string(i) + ": labeled flag mismatch");
  }
}

Dataset parse_jsonl(std::istream& in) {
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  std::optional<bool> labeled;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(lineno, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError(lineno, "expected a JSON object");
    if (!j.contains("input")) throw DataError(lineno, "missing \"input\"");
    if (!j["input"].is_string()) throw DataError(lineno, "\"input\" must be a string");
    PairRecord r;
    r.input = j["input"].get<std::string>();
    if (r.input.empty()) throw DataError(lineno, "empty \"input\"");
    if (j.contains("output") && !j["output"].is_null()) {
      if (!j["output"].is_string()) throw DataError(lineno, "\"output\" must be a string");
      r.output = j["output"].get<std::string>();
    }
    if (j.contains("meta")) {
      if (!j["meta"].is_object()) throw DataError(lineno, "\"meta\" must be an object");
      for (const auto& [k, v] : j["meta"].items()) {
        if (!v.is_string()) throw DataError(lineno, "meta value for '" + k + "' must be a string");
        r.meta[k] = v.get<std::string>();
      }
    }
    if (!labeled) labeled = r.output.has_value();
    if (*labeled != r.output.has_value()) throw DataError(lineno, "mixed labeled and unlabeled records");
    d.records.push_back(std::move(r));
  }
  d.labeled = labeled.value_or(false);
  return d;
}

void write_jsonl(const Dataset& d, std::ostream& out) {
  for (const auto& r : d.records) {
    nlohmann::ordered_json j;
    j["input"] = r.input;
    if (r.output) j["output"] = *r.output;
    if (!r.meta.empty()) j["meta"] = r.meta;
    out << j.dump() << '\n';
  }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  Dataset d = parse_jsonl(in);
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream s(side);
    json j;
    try {
      j = json::parse(s);
      d.source = parse_domain_kind(j.at("source").get<std::string>());
      d.target = parse_domain_kind(j.at("target").get<std::string>());
      d.seed = j.value("seed", std::uint64_t{0});
      if (j.contains("labeled") && j["labeled"].get<bool>() != d.labeled && !d.empty())
        throw std::runtime_error("labeled flag disagrees with records");
    } catch (const std::exception& e) {
      throw std::runtime_error("bad sidecar " + side.string() + ": " + e.what());
    }
  }
  return d;
}

void save_jsonl(const Dataset& d, const std::filesystem::path& path) {
  d.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    write_jsonl(d, out);
  }
  nlohmann::ordered_json j;
  j["source"] = to_string(d.source);
  j["target"] = to_string(d.target);
  j["labeled"] = d.labeled;
  j["seed"] = d.seed;
  j["count"] = d.size();
  std::ofstream s(sidecar_path(path), std::ios::binary);
  s << j.dump(2) << '\n';
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

DatasetSplit split(const Dataset& d, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) throw std::invalid_argument("split: fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(order, rng);
  const auto n = static_cast<double>(d.size());
  const auto n_train = static_cast<std::size_t>(std::floor(fractions[0] * n + 1e-9));
  const auto n_valid = std::min(d.size() - n_train, static_cast<std::size_t>(std::floor(fractions[1] * n + 1e-9)));
  DatasetSplit out;
  for (Dataset* part : {&out.train, &out.valid, &out.test}) {
    *part = d;
    part->records.clear();
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    Dataset& part = i < n_train ? out.train : (i < n_train + n_valid ? out.valid : out.test);
    part.records.push_back(d.records[order[i]]);
  }
  return out;
}

Dataset take(const Dataset& d, std::size_t n) {
  Dataset out = d;
  if (n < out.records.size()) out.records.resize(n);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const std::string_view kLetters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";

}  // namespace

std::string CipherTask::encode(std::string_view plain) const {
  std::string out;
  for (char c : plain) {
    auto i = alphabet.find(c);
    if (i == std::string::npos) throw std::invalid_argument(std::string("cipher: symbol '") + c + "' not in alphabet");
    out.push_back(alphabet[static_cast<std::size_t>(sigma[i])]);
  }
  return out;
}

std::string CipherTask::decode(std::string_view cipher) const {
  std::vector<int> inv(sigma.size());
  for (std::size_t i = 0; i < sigma.size(); ++i) inv[static_cast<std::size_t>(sigma[i])] = static_cast<int>(i);
  std::string out;
  for (char c : cipher) {
    auto i = alphabet.find(c);
    if (i == std::string::npos) throw std::invalid_argument(std::string("cipher: symbol '") + c + "' not in alphabet");
    out.push_back(alphabet[static_cast<std::size_t>(inv[i])]);
  }
  return out;
}

CipherTask gen_cipher_task(std::uint64_t seed, std::size_t n, int alphabet_size, int max_len, int min_len) {
  if (alphabet_size < 4 || alphabet_size > static_cast<int>(kLetters.size()))
    throw std::invalid_argument("gen_cipher_task: alphabet size must lie in [4, 52]");
  if (max_len < 4) throw std::invalid_argument("gen_cipher_task: max_len must be >= 4");
  if (min_len < 1 || min_len > max_len) throw std::invalid_argument("gen_cipher_task: bad min_len");

  CipherTask task;
  task.alphabet = std::string(kLetters.substr(0, static_cast<std::size_t>(alphabet_size)));
  Rng perm_rng = Rng::stream(seed, {0});
  // Rejection-sample a derangement so no correct output equals its input.
  std::vector<int> sigma(static_cast<std::size_t>(alphabet_size));
  for (;;) {
    std::iota(sigma.begin(), sigma.end(), 0);
    shuffle(sigma, perm_rng);
    bool fixed = false;
    for (std::size_t i = 0; i < sigma.size(); ++i) fixed |= sigma[i] == static_cast<int>(i);
    if (!fixed) break;
  }
  task.sigma = sigma;

  Rng rng = Rng::stream(seed, {1});
  std::set<std::string> seen;
  const std::size_t max_attempts = 100 * n + 1000;
  std::size_t attempts = 0;
  for (auto* d : {&task.x, &task.y}) {
    d->labeled = true;
    d->seed = seed;
  }
  while (task.x.size() < n) {
    if (++attempts > max_attempts) throw std::runtime_error("gen_cipher_task: cannot draw enough distinct strings");
    const auto len = static_cast<std::size_t>(min_len) + rng.below(static_cast<std::uint64_t>(max_len - min_len + 1));
    std::string plain;
    for (std::size_t i = 0; i < len; ++i) plain.push_back(task.alphabet[rng.below(task.alphabet.size())]);
    if (!seen.insert(plain).second) continue;
    std::string enc = task.encode(plain);
    task.x.records.push_back({plain, enc, {}});
    task.y.records.push_back({enc, plain, {}});
  }
  return task;
}

Dataset corrupt_outputs(const Dataset& d, std::string_view alphabet, const NoiseConfig& noise, std::uint64_t seed) {
  if (!d.labeled) throw std::invalid_argument("corrupt_outputs: dataset has no labels");
  if (alphabet.empty()) throw std::invalid_argument("corrupt_outputs: empty alphabet");
  if (noise.max_append < 1) throw std::invalid_argument("corrupt_outputs: max_append must be >= 1");
  Dataset out = d;
  Rng rng(seed);
  for (auto& r : out.records) {
    std::string& y = *r.output;
    for (char& c : y) {
      if (rng.uniform() < noise.substitute) c = alphabet[rng.below(alphabet.size())];
    }
    if (rng.uniform() < noise.append) {
      const auto k = 1 + rng.below(static_cast<std::uint64_t>(noise.max_append));
      for (std::uint64_t i = 0; i < k; ++i) y.push_back(alphabet[rng.below(alphabet.size())]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ReactionTemplate t) {
  switch (t) {
    case ReactionTemplate::HalideToAlcohol: return "halide_alcohol";
    case ReactionTemplate::Esterification: return "esterification";
    case ReactionTemplate::Hydrogenation: return "hydrogenation";
  }
  return "?";
}

ReactionTemplate parse_reaction_template(std::string_view s) {
  for (auto t : default_templates())
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown reaction template '" + std::string(s) + "'");
}

std::vector<ReactionTemplate> default_templates() {
  return {ReactionTemplate::HalideToAlcohol, ReactionTemplate::Esterification, ReactionTemplate::Hydrogenation};
}

namespace {

using chem::BondOrder;
using chem::Molecule;

constexpr int kC = 6, kO = 8, kCl = 17, kBr = 35, kI = 53;

bool is_halogen(int e) { return e == kCl || e == kBr || e == kI; }

bool has_carbonyl(const Molecule& m, int c) {
  for (const auto& nb : m.neighbors(c))
    if (m.atom(nb.atom).element == kO && m.bond(nb.bond).order == BondOrder::Double) return true;
  return false;
}

// Hydroxyl oxygen on a non-carbonyl, non-aromatic carbon.
std::optional<std::pair<int, int>> find_alcohol(const Molecule& m) {
  for (int i = 0; i < static_cast<int>(m.num_atoms()); ++i) {
    const auto& a = m.atom(i);
    if (a.element != kO || a.charge != 0 || a.hcount != 1 || m.degree(i) != 1) continue;
    const auto& nb = m.neighbors(i)[0];
    const auto& c = m.atom(nb.atom);
    if (c.element != kC || c.aromatic || m.bond(nb.bond).order != BondOrder::Single) continue;
    if (has_carbonyl(m, nb.atom)) continue;
    return std::pair{i, nb.atom};
  }
  return std::nullopt;
}

// Hydroxyl oxygen of a carboxylic acid.
std::optional<int> find_acid_oh(const Molecule& m) {
  for (int i = 0; i < static_cast<int>(m.num_atoms()); ++i) {
    const auto& a = m.atom(i);
    if (a.element != kO || a.charge != 0 || a.hcount != 1 || m.degree(i) != 1) continue;
    const auto& nb = m.neighbors(i)[0];
    if (m.atom(nb.atom).element == kC && has_carbonyl(m, nb.atom)) return i;
  }
  return std::nullopt;
}

std::optional<std::string> finish(Molecule m) {
  m.assign_implicit_h();
  try {
    m.validate();
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (m.num_components() != 1) return std::nullopt;
  return chem::canonical_smiles(m);
}

}  // namespace

std::optional<std::string> apply_template(ReactionTemplate t, const std::vector<std::string>& reactants) {
  if (reactants.empty()) return std::nullopt;
  Molecule a;
  try {
    a = chem::parse_smiles(reactants[0]);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  switch (t) {
    case ReactionTemplate::HalideToAlcohol: {
      for (int i = 0; i < static_cast<int>(a.num_atoms()); ++i) {
        const auto& x = a.atom(i);
        if (!is_halogen(x.element) || x.charge != 0 || a.degree(i) != 1) continue;
        const auto& nb = a.neighbors(i)[0];
        if (a.atom(nb.atom).element != kC || a.atom(nb.atom).aromatic) continue;
        a.set_element(i, kO);
        return finish(std::move(a));
      }
      return std::nullopt;
    }
    case ReactionTemplate::Esterification: {
      if (reactants.size() < 2) return std::nullopt;
      Molecule acid;
      try {
        acid = chem::parse_smiles(reactants[1]);
      } catch (const std::exception&) {
        return std::nullopt;
      }
      auto alc = find_alcohol(a);
      auto oh = find_acid_oh(acid);
      if (!alc || !oh) return std::nullopt;
      // The alcohol's oxygen leaves with the acid's hydrogen; the acid's
      // hydroxyl oxygen bonds to the alcohol carbon.
      int carbon = alc->second;
      a.remove_atom(alc->first);
      if (alc->first < carbon) --carbon;
      const int offset = static_cast<int>(a.num_atoms());
      Molecule m = chem::merge({a, acid});
      m.add_bond(carbon, offset + *oh, BondOrder::Single);
      return finish(std::move(m));
    }
    case ReactionTemplate::Hydrogenation: {
      for (int b = 0; b < static_cast<int>(a.num_bonds()); ++b) {
        const auto& bond = a.bond(b);
        if (bond.order != BondOrder::Double) continue;
        if (a.atom(bond.a).element != kC || a.atom(bond.b).element != kC) continue;
        a.set_bond_order(b, BondOrder::Single);
        return finish(std::move(a));
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

namespace {

// Random acyclic carbon skeleton; every carbon keeps at least one free valence.
Molecule random_skeleton(Rng& rng, int atoms) {
  Molecule m;
  m.add_atom({});
  for (int i = 1; i < atoms; ++i) {
    std::vector<int> open;
    for (int j = 0; j < i; ++j)
      if (m.degree(j) < 3) open.push_back(j);
    const int parent = open[rng.below(open.size())];
    const int c = m.add_atom({});
    m.add_bond(parent, c, BondOrder::Single);
  }
  // Occasionally close one ring of size >= 3.
  if (atoms >= 3 && rng.below(4) == 0) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < atoms; ++i)
      for (int j = i + 1; j < atoms; ++j)
        if (m.degree(i) < 3 && m.degree(j) < 3 && !m.bond_between(i, j)) pairs.emplace_back(i, j);
    if (!pairs.empty()) {
      const auto [a, b] = pairs[rng.below(pairs.size())];
      m.add_bond(a, b, BondOrder::Single);
    }
  }
  return m;
}

int random_site(const Molecule& m, Rng& rng, int max_degree) {
  std::vector<int> open;
  for (int j = 0; j < static_cast<int>(m.num_atoms()); ++j)
    if (m.degree(j) <= max_degree && m.bond_valence(j) < 4) open.push_back(j);
  if (open.empty()) return -1;
  return open[rng.below(open.size())];
}

std::string canon(Molecule m) {
  m.assign_implicit_h();
  m.validate();
  return chem::canonical_smiles(m);
}

struct Draw {
  std::vector<std::string> reactants;
};

std::optional<Draw> draw_reactants(ReactionTemplate t, Rng& rng) {
  switch (t) {
    case ReactionTemplate::HalideToAlcohol: {
      Molecule m = random_skeleton(rng, 1 + static_cast<int>(rng.below(8)));
      const int site = random_site(m, rng, 3);
      if (site < 0) return std::nullopt;
      static constexpr int kHal[] = {kCl, kBr, kI};
      chem::Atom x;
      x.element = kHal[rng.below(3)];
      m.add_bond(site, m.add_atom(x), BondOrder::Single);
      return Draw{{canon(m), "O"}};
    }
    case ReactionTemplate::Esterification: {
      Molecule alc = random_skeleton(rng, 1 + static_cast<int>(rng.below(6)));
      const int s1 = random_site(alc, rng, 3);
      chem::Atom o;
      o.element = kO;
      if (s1 < 0) return std::nullopt;
      alc.add_bond(s1, alc.add_atom(o), BondOrder::Single);
      Molecule acid = random_skeleton(rng, 1 + static_cast<int>(rng.below(5)));
      const int s2 = random_site(acid, rng, 3);
      if (s2 < 0) return std::nullopt;
      const int carbonyl = acid.add_atom({});
      acid.add_bond(s2, carbonyl, BondOrder::Single);
      acid.add_bond(carbonyl, acid.add_atom(o), BondOrder::Double);
      acid.add_bond(carbonyl, acid.add_atom(o), BondOrder::Single);
      return Draw{{canon(alc), canon(acid)}};
    }
    case ReactionTemplate::Hydrogenation: {
      Molecule m = random_skeleton(rng, 2 + static_cast<int>(rng.below(7)));
      std::vector<int> candidates;
      for (int b = 0; b < static_cast<int>(m.num_bonds()); ++b)
        if (m.bond_valence(m.bond(b).a) <= 3 && m.bond_valence(m.bond(b).b) <= 3) candidates.push_back(b);
      if (candidates.empty()) return std::nullopt;
      m.set_bond_order(candidates[rng.below(candidates.size())], BondOrder::Double);
      return Draw{{canon(m), "[H][H]"}};
    }
  }
  return std::nullopt;
}

}  // namespace

Dataset gen_toy_reactions(std::uint64_t seed, std::size_t n, const std::vector<ReactionTemplate>& templates) {
  if (templates.empty()) throw std::invalid_argument("gen_toy_reactions: no templates");
  Dataset d;
  d.source = DomainKind::Molecule;
  d.target = DomainKind::Molecule;
  d.labeled = true;
  d.seed = seed;
  Rng rng(seed);
  std::set<std::string> seen;
  const std::size_t max_attempts = 200 * n + 1000;
  std::size_t attempts = 0;
  while (d.size() < n) {
    if (++attempts > max_attempts)
      throw std::runtime_error("gen_toy_reactions: gave up after " + std::to_string(max_attempts) +
                               " attempts with " + std::to_string(d.size()) + " records");
    const ReactionTemplate t = templates[rng.below(templates.size())];
    auto draw = draw_reactants(t, rng);
    if (!draw) continue;
    auto product = apply_template(t, draw->reactants);
    if (!product || chem::count_components(*product) != 1) continue;
    std::string input;
    for (const auto& r : draw->reactants) input += (input.empty() ? "" : ".") + r;
    if (!seen.insert(input).second) continue;
    d.records.push_back({input, *product, {{"template", std::string(to_string(t))}}});
  }
  return d;
}

}  // namespace rtrl
