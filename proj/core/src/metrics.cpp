#include "rtrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>

#include "json.hpp"
#include "rtrl/chem/fingerprint.hpp"
#include "rtrl/chem/reaction.hpp"
#include "rtrl/chem/smiles.hpp"

namespace rtrl::metrics {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(std::span<const std::string> toks, int n) {
  NgramCounts out;
  const auto un = static_cast<std::size_t>(n);
  if (toks.size() < un) return out;
  for (std::size_t i = 0; i + un <= toks.size(); ++i) ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i + un))];
  return out;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t m = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

std::size_t total(const NgramCounts& c) {
  std::size_t t = 0;
  for (const auto& [g, k] : c) t += k;
  return t;
}

void require_reference(std::span<const std::string> reference, const char* who) {
  if (reference.empty()) throw std::invalid_argument(std::string(who) + ": empty reference");
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

Tokens char_tokens(std::string_view s) {
  Tokens out;
  out.reserve(s.size());
  for (char c : s) out.emplace_back(1, c);
  return out;
}

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference, int max_n) {
  require_reference(reference, "bleu");
  if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto c = ngrams(candidate, n);
    const auto r = ngrams(reference, n);
    const std::size_t matches = clipped_overlap(c, r);
    const std::size_t t = total(c);
    double p;
    if (matches > 0) {
      p = static_cast<double>(matches) / static_cast<double>(t);
    } else if (n == 1) {
      return 0.0;
    } else {
      p = 1.0 / static_cast<double>(t + 1);
    }
    log_sum += std::log(p);
  }
  const double c_len = static_cast<double>(candidate.size());
  const double r_len = static_cast<double>(reference.size());
  const double bp = c_len >= r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * std::exp(log_sum / max_n);
}

double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n) {
  require_reference(reference, "rouge_n");
  if (n < 1) throw std::invalid_argument("rouge_n: n must be >= 1");
  const auto c = ngrams(candidate, n);
  const auto r = ngrams(reference, n);
  const std::size_t tc = total(c), tr = total(r);
  if (tr == 0) {
    return (tc == 0 && std::equal(candidate.begin(), candidate.end(), reference.begin(), reference.end())) ? 1.0 : 0.0;
  }
  const std::size_t m = clipped_overlap(c, r);
  if (m == 0) return 0.0;
  return f1(static_cast<double>(m) / static_cast<double>(tc), static_cast<double>(m) / static_cast<double>(tr));
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  require_reference(reference, "rouge_l");
  if (candidate.empty()) return 0.0;
  const double l = static_cast<double>(lcs_length(candidate, reference));
  return f1(l / static_cast<double>(candidate.size()), l / static_cast<double>(reference.size()));
}

namespace {

// Chunks of an alignment given as ref position per candidate position (-1 = unmatched).
std::size_t count_chunks(const std::vector<std::ptrdiff_t>& ref_of) {
  std::size_t chunks = 0;
  std::ptrdiff_t last_c = -2, last_r = -2;
  for (std::size_t i = 0; i < ref_of.size(); ++i) {
    if (ref_of[i] < 0) continue;
    if (!(last_c == static_cast<std::ptrdiff_t>(i) - 1 && ref_of[i] == last_r + 1)) ++chunks;
    last_c = static_cast<std::ptrdiff_t>(i);
    last_r = ref_of[i];
  }
  return chunks;
}

// Repeatedly aligns the longest common block of unused positions. Every word
// still shared ends up matched, so this reaches the maximum match count and
// seeds the exact search with a tight chunk bound.
std::vector<std::ptrdiff_t> greedy_alignment(const std::vector<int>& c, const std::vector<int>& r) {
  std::vector<std::ptrdiff_t> ref_of(c.size(), -1);
  std::vector<bool> used_r(r.size(), false);
  for (;;) {
    std::size_t best_len = 0, bi = 0, bj = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = 0; j < r.size(); ++j) {
        std::size_t k = 0;
        while (i + k < c.size() && j + k < r.size() && ref_of[i + k] < 0 && !used_r[j + k] && c[i + k] == r[j + k]) ++k;
        if (k > best_len) best_len = k, bi = i, bj = j;
      }
    if (best_len == 0) return ref_of;
    for (std::size_t k = 0; k < best_len; ++k) {
      ref_of[bi + k] = static_cast<std::ptrdiff_t>(bj + k);
      used_r[bj + k] = true;
    }
  }
}

}  // namespace

MeteorAlignment meteor_align(std::span<const std::string> candidate, std::span<const std::string> reference) {
  // Dense word ids.
  std::map<std::string, int> ids;
  auto id_of = [&ids](const std::string& w) { return ids.emplace(w, static_cast<int>(ids.size())).first->second; };
  std::vector<int> c, r;
  for (const auto& w : reference) r.push_back(id_of(w));
  for (const auto& w : candidate) c.push_back(id_of(w));
  const std::size_t words = ids.size();

  std::vector<std::size_t> remaining_ref(words, 0);
  for (int w : r) ++remaining_ref[w];
  std::vector<std::size_t> cand_count(words, 0);
  for (int w : c) ++cand_count[w];
  std::size_t target = 0;
  for (std::size_t w = 0; w < words; ++w) target += std::min(cand_count[w], remaining_ref[w]);
  if (target == 0) return {};

  const auto greedy = greedy_alignment(c, r);
  std::size_t best = count_chunks(greedy);
  if (best <= 1) return {target, best};

  // suffix[i][w]: occurrences of word w in candidate[i..].
  std::vector<std::vector<std::size_t>> suffix(c.size() + 1, std::vector<std::size_t>(words, 0));
  for (std::size_t i = c.size(); i-- > 0;) {
    suffix[i] = suffix[i + 1];
    ++suffix[i][c[i]];
  }
  std::vector<std::vector<std::size_t>> options(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j)
      if (c[i] == r[j]) options[i].push_back(j);

  std::vector<bool> used(r.size(), false);
  std::size_t budget = 200'000;  // node cap for long inputs; the greedy bound stands if it runs out

  std::function<void(std::size_t, std::size_t, std::ptrdiff_t, std::ptrdiff_t, std::size_t)> dfs =
      [&](std::size_t i, std::size_t matched, std::ptrdiff_t last_c, std::ptrdiff_t last_r, std::size_t chunks) {
        if (budget == 0 || chunks >= best) return;
        --budget;
        if (matched == target) {
          best = chunks;
          return;
        }
        if (i == c.size()) return;
        std::size_t reachable = 0;
        for (std::size_t w = 0; w < words; ++w) reachable += std::min(suffix[i][w], remaining_ref[w]);
        if (matched + reachable < target) return;

        const bool adjacent = last_c == static_cast<std::ptrdiff_t>(i) - 1;
        // Continue the current chunk first.
        if (adjacent && last_r + 1 < static_cast<std::ptrdiff_t>(r.size())) {
          const auto j = static_cast<std::size_t>(last_r + 1);
          if (!used[j] && r[j] == c[i]) {
            used[j] = true;
            --remaining_ref[c[i]];
            dfs(i + 1, matched + 1, static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j), chunks);
            ++remaining_ref[c[i]];
            used[j] = false;
          }
        }
        // A new chunk only helps when it beats the incumbent.
        if (chunks + 1 < best) {
          for (std::size_t j : options[i]) {
            if (used[j] || (adjacent && static_cast<std::ptrdiff_t>(j) == last_r + 1)) continue;
            used[j] = true;
            --remaining_ref[c[i]];
            dfs(i + 1, matched + 1, static_cast<std::ptrdiff_t>(i), static_cast<std::ptrdiff_t>(j), chunks + 1);
            ++remaining_ref[c[i]];
            used[j] = false;
          }
        }
        dfs(i + 1, matched, last_c, last_r, chunks);
      };
  dfs(0, 0, -2, -2, 0);
  return {target, best};
}

double meteor_exact(std::span<const std::string> candidate, std::span<const std::string> reference) {
  require_reference(reference, "meteor_exact");
  if (candidate.empty()) return 0.0;
  const auto a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return fmean * (1.0 - penalty);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

namespace {

/// Canonical text for a molecule or reaction string; throws on bad input.
std::string canonical_chem(std::string_view text) {
  if (text.find('>') == std::string_view::npos) return chem::canonical_multi(text);
  chem::parse_reaction(text);  // layout + component validity
  std::string out;
  std::size_t start = 0;
  for (int field = 0; field < 3; ++field) {
    const auto end = field < 2 ? text.find('>', start) : text.size();
    const auto part = text.substr(start, end - start);
    if (field) out.push_back('>');
    if (!part.empty()) out += chem::canonical_multi(part);
    start = end + 1;
  }
  return out;
}

std::optional<chem::Molecule> chem_graph(std::string_view text) {
  try {
    if (text.find('>') == std::string_view::npos) return chem::parse_multi(text);
    const auto r = chem::parse_reaction(text);
    std::vector<chem::Molecule> all;
    for (const auto* field : {&r.reactants, &r.reagents, &r.products}) all.insert(all.end(), field->begin(), field->end());
    return chem::merge(all);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

int exact_match(std::string_view pred, std::string_view label, DomainKind kind) {
  switch (kind) {
    case DomainKind::Molecule:
    case DomainKind::Reaction: {
      std::string p;
      try {
        p = canonical_chem(pred);
      } catch (const std::exception&) {
        return 0;
      }
      try {
        return p == canonical_chem(label) ? 1 : 0;
      } catch (const std::exception&) {
        return pred == label ? 1 : 0;
      }
    }
    case DomainKind::Text:
      return normalize_whitespace(pred) == normalize_whitespace(label) ? 1 : 0;
    case DomainKind::Symbol:
      return pred == label ? 1 : 0;
  }
  return 0;
}

bool is_valid_chemistry(std::string_view text) {
  if (text.empty()) return false;
  if (text.find('>') != std::string_view::npos) {
    try {
      chem::parse_reaction(text);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }
  return chem::count_components(text) > 0;
}

double validity_rate(std::span<const std::string> preds) {
  if (preds.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& p : preds) ok += is_valid_chemistry(p) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("frechet_distance: empty set");
  const std::size_t d = a.front().size();
  auto moments = [d](const std::vector<std::vector<double>>& s) {
    std::vector<double> mu(d, 0.0), var(d, 0.0);
    for (const auto& v : s) {
      if (v.size() != d) throw std::invalid_argument("frechet_distance: dimension mismatch");
      for (std::size_t k = 0; k < d; ++k) mu[k] += v[k];
    }
    for (double& m : mu) m /= static_cast<double>(s.size());
    for (const auto& v : s)
      for (std::size_t k = 0; k < d; ++k) var[k] += (v[k] - mu[k]) * (v[k] - mu[k]);
    for (double& x : var) x /= static_cast<double>(s.size());
    return std::pair{mu, var};
  };
  const auto [mu_a, var_a] = moments(a);
  const auto [mu_b, var_b] = moments(b);
  double fd2 = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double dm = mu_a[k] - mu_b[k];
    fd2 += dm * dm;
    fd2 += var_a[k] + var_b[k] - 2.0 * std::sqrt(var_a[k] * var_b[k]);
  }
  return std::sqrt(std::max(0.0, fd2));
}

double frechet_descriptor_distance(std::span<const chem::Molecule> a, std::span<const chem::Molecule> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("frechet_descriptor_distance: each set needs >= 2 molecules");
  std::vector<std::vector<double>> fa, fb;
  for (const auto& m : a) fa.push_back(chem::descriptor_vector(m));
  for (const auto& m : b) fb.push_back(chem::descriptor_vector(m));
  return frechet_distance(fa, fb);
}

void MetricsReport::set(const std::string& name, double value) {
  for (auto& [k, v] : values_) {
    if (k == name) {
      v = value;
      return;
    }
  }
  values_.emplace_back(name, value);
}

double MetricsReport::get(const std::string& name) const {
  for (const auto& [k, v] : values_)
    if (k == name) return v;
  throw std::out_of_range("metric '" + name + "' not in report");
}

bool MetricsReport::has(const std::string& name) const {
  return std::any_of(values_.begin(), values_.end(), [&](const auto& kv) { return kv.first == name; });
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind_;
  j["n"] = n;
  j["n_valid"] = n_valid;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : values_) m[k] = v;
  j["metrics"] = m;
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(std::string_view text) {
  const auto j = nlohmann::ordered_json::parse(text);
  MetricsReport r(j.at("kind").get<std::string>());
  r.n = j.at("n").get<std::size_t>();
  r.n_valid = j.at("n_valid").get<std::size_t>();
  for (const auto& [k, v] : j.at("metrics").items()) r.set(k, v.get<double>());
  return r;
}

std::string MetricsReport::csv_header() const {
  std::string s = "kind,n,n_valid";
  for (const auto& [k, v] : values_) s += "," + k;
  return s;
}

std::string MetricsReport::csv_row() const {
  std::string s = kind_ + "," + std::to_string(n) + "," + std::to_string(n_valid);
  char buf[64];
  for (const auto& [k, v] : values_) {
    std::snprintf(buf, sizeof buf, ",%.10g", v);
    s += buf;
  }
  return s;
}

MetricsReport evaluate_molecule_task(std::span<const PredLabel> pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_molecule_task: no pairs");
  MetricsReport rep("molecule");
  double bleu_sum = 0, lev_sum = 0, em_sum = 0, circ = 0, path = 0, circ1 = 0;
  std::size_t valid = 0;
  std::vector<std::vector<double>> pred_desc, label_desc;
  const std::vector<double> zero(chem::kDescriptorDim, 0.0);
  for (const auto& [pred, label] : pairs) {
    const auto pt = char_tokens(pred), lt = char_tokens(label);
    bleu_sum += lt.empty() ? 0.0 : bleu(pt, lt, 4);
    lev_sum += static_cast<double>(levenshtein(pred, label));
    em_sum += exact_match(pred, label, DomainKind::Molecule);
    const auto pm = is_valid_chemistry(pred) ? chem_graph(pred) : std::nullopt;
    const auto lm = chem_graph(label);
    if (pm) ++valid;
    pred_desc.push_back(pm ? chem::descriptor_vector(*pm) : zero);
    label_desc.push_back(lm ? chem::descriptor_vector(*lm) : zero);
    if (pm && lm) {
      circ += chem::tanimoto(chem::circular_fingerprint(*pm, 2), chem::circular_fingerprint(*lm, 2));
      path += chem::tanimoto(chem::path_fingerprint(*pm), chem::path_fingerprint(*lm));
      circ1 += chem::tanimoto(chem::circular_fingerprint(*pm, 1), chem::circular_fingerprint(*lm, 1));
    }
  }
  const double n = static_cast<double>(pairs.size());
  rep.n = pairs.size();
  rep.n_valid = valid;
  rep.set("bleu", bleu_sum / n);
  rep.set("levenshtein", lev_sum / n);
  rep.set("exact_match", em_sum / n);
  rep.set("circular_sim", circ / n);
  rep.set("path_sim", path / n);
  rep.set("circular_r1_sim", circ1 / n);
  rep.set("fd_descriptor", frechet_distance(pred_desc, label_desc));
  rep.set("validity", static_cast<double>(valid) / n);
  return rep;
}

MetricsReport evaluate_text_task(std::span<const PredLabel> pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_text_task: no pairs");
  MetricsReport rep("text");
  double b2 = 0, b4 = 0, r1 = 0, r2 = 0, rl = 0, met = 0;
  std::size_t nonempty = 0;
  for (const auto& [pred, label] : pairs) {
    const auto pt = whitespace_units(pred), lt = whitespace_units(label);
    if (!pt.empty()) ++nonempty;
    if (lt.empty()) continue;
    b2 += bleu(pt, lt, 2);
    b4 += bleu(pt, lt, 4);
    r1 += rouge_n(pt, lt, 1);
    r2 += rouge_n(pt, lt, 2);
    rl += rouge_l(pt, lt);
    met += meteor_exact(pt, lt);
  }
  const double n = static_cast<double>(pairs.size());
  rep.n = pairs.size();
  rep.n_valid = nonempty;
  rep.set("bleu2", b2 / n);
  rep.set("bleu4", b4 / n);
  rep.set("rouge1", r1 / n);
  rep.set("rouge2", r2 / n);
  rep.set("rougeL", rl / n);
  rep.set("meteor", met / n);
  return rep;
}

MetricsReport evaluate_symbol_task(std::span<const PredLabel> pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_symbol_task: no pairs");
  MetricsReport rep("symbol");
  double em = 0, bl = 0, lev = 0;
  std::size_t nonempty = 0;
  for (const auto& [pred, label] : pairs) {
    if (!pred.empty()) ++nonempty;
    em += exact_match(pred, label, DomainKind::Symbol);
    const auto lt = char_tokens(label);
    bl += lt.empty() ? 0.0 : bleu(char_tokens(pred), lt, 4);
    lev += static_cast<double>(levenshtein(pred, label));
  }
  const double n = static_cast<double>(pairs.size());
  rep.n = pairs.size();
  rep.n_valid = nonempty;
  rep.set("exact_match", em / n);
  rep.set("bleu", bl / n);
  rep.set("levenshtein", lev / n);
  return rep;
}

MetricsReport evaluate(DomainKind kind, std::span<const PredLabel> pairs) {
  switch (kind) {
    case DomainKind::Molecule:
    case DomainKind::Reaction:
      return evaluate_molecule_task(pairs);
    case DomainKind::Text:
      return evaluate_text_task(pairs);
    case DomainKind::Symbol:
      return evaluate_symbol_task(pairs);
  }
  throw std::invalid_argument("evaluate: unknown kind");
}

}  // namespace rtrl::metrics
