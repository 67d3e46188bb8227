#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

namespace oracle {

using rtrl::ContextKey;
using rtrl::PolicyParams;
using rtrl::Sequence;
using rtrl::TokenId;

ContextKey key_at(const PolicyParams& p, TokenId tag, const Sequence& cond, const Sequence& out, std::size_t pos) {
  ContextKey k;
  k.tag = tag;
  k.aligned = pos < cond.size() ? cond[pos] : p.special().pad;
  for (int j = 0; j < p.order(); ++j) {
    const long src = static_cast<long>(pos) - 1 - j;
    k.history[static_cast<std::size_t>(j)] = src < 0 ? p.special().bos : out[static_cast<std::size_t>(src)];
  }
  return k;
}

std::vector<double> probs(const PolicyParams& p, const ContextKey& key) {
  std::vector<double> z(p.vocab_size(), 0.0);
  if (const auto* row = p.find(key)) z = *row;
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    s += v;
  }
  for (double& v : z) v /= s;
  return z;
}

double seq_logprob(const PolicyParams& p, TokenId tag, const Sequence& cond, const Sequence& target, bool include_eos) {
  double total = 0.0;
  const std::size_t steps = target.size() + (include_eos ? 1 : 0);
  for (std::size_t i = 0; i < steps; ++i) {
    const TokenId t = i < target.size() ? target[i] : p.special().eos;
    total += std::log(probs(p, key_at(p, tag, cond, target, i))[static_cast<std::size_t>(t)]);
  }
  return total;
}

DenseGrad fd_logprob_grad(const PolicyParams& p, TokenId tag, const Sequence& cond, const Sequence& target,
                          bool include_eos, double h) {
  std::set<ContextKey> keys;
  const std::size_t steps = target.size() + (include_eos ? 1 : 0);
  for (std::size_t i = 0; i < steps; ++i) keys.insert(key_at(p, tag, cond, target, i));
  DenseGrad out;
  PolicyParams q = p;
  for (const auto& k : keys) {
    auto& g = out[k];
    g.assign(p.vocab_size(), 0.0);
    for (std::size_t j = 0; j < p.vocab_size(); ++j) {
      auto& row = q.row(k);
      const double saved = row[j];
      row[j] = saved + h;
      const double up = seq_logprob(q, tag, cond, target, include_eos);
      q.row(k)[j] = saved - h;
      const double down = seq_logprob(q, tag, cond, target, include_eos);
      q.row(k)[j] = saved;
      g[j] = (up - down) / (2.0 * h);
    }
  }
  return out;
}

DenseGrad reinforce_grad(const PolicyParams& p, const std::vector<rtrl::RolloutGroup>& groups) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.completions.size();
  DenseGrad out;
  for (const auto& g : groups) {
    for (const auto& c : g.completions) {
      const std::size_t steps = c.tokens.size() + (c.terminated ? 1 : 0);
      for (std::size_t i = 0; i < steps; ++i) {
        const auto k = key_at(p, g.tag, g.input, c.tokens, i);
        const auto pr = probs(p, k);
        const TokenId t = i < c.tokens.size() ? c.tokens[i] : p.special().eos;
        auto& row = out[k];
        if (row.empty()) row.assign(p.vocab_size(), 0.0);
        for (std::size_t j = 0; j < pr.size(); ++j) {
          const double d = (static_cast<TokenId>(j) == t ? 1.0 : 0.0) - pr[j];
          row[j] -= c.advantage * d / static_cast<double>(n);
        }
      }
    }
  }
  return out;
}

DenseGrad to_dense(const rtrl::GradAccumulator& g) {
  DenseGrad out;
  for (const auto& [k, v] : g.entries()) out[k] = v;
  return out;
}

namespace {

template <class F>
void for_union(const DenseGrad& a, const DenseGrad& b, F f) {
  std::set<ContextKey> keys;
  for (const auto& [k, v] : a) keys.insert(k);
  for (const auto& [k, v] : b) keys.insert(k);
  for (const auto& k : keys) {
    const auto ia = a.find(k);
    const auto ib = b.find(k);
    const std::size_t n = std::max(ia == a.end() ? 0 : ia->second.size(), ib == b.end() ? 0 : ib->second.size());
    for (std::size_t j = 0; j < n; ++j) {
      const double x = ia == a.end() ? 0.0 : ia->second[j];
      const double y = ib == b.end() ? 0.0 : ib->second[j];
      f(x, y);
    }
  }
}

}  // namespace

double max_abs_diff(const DenseGrad& a, const DenseGrad& b) {
  double m = 0.0;
  for_union(a, b, [&](double x, double y) { m = std::max(m, std::abs(x - y)); });
  return m;
}

double norm(const DenseGrad& a) {
  double s = 0.0;
  for (const auto& [k, v] : a)
    for (double x : v) s += x * x;
  return std::sqrt(s);
}

double norm_diff(const DenseGrad& a, const DenseGrad& b) {
  double s = 0.0;
  for_union(a, b, [&](double x, double y) { s += (x - y) * (x - y); });
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

std::size_t edit_distance(std::string_view a, std::string_view b) {
  // Top-down recursion over suffixes, memoized.
  std::vector<std::vector<long>> memo(a.size() + 1, std::vector<long>(b.size() + 1, -1));
  std::function<long(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> long {
    if (i == a.size()) return static_cast<long>(b.size() - j);
    if (j == b.size()) return static_cast<long>(a.size() - i);
    long& m = memo[i][j];
    if (m >= 0) return m;
    long best = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    return m = best;
  };
  return static_cast<std::size_t>(go(0, 0));
}

namespace {

bool is_subsequence(const Tokens& sub, const Tokens& seq) {
  std::size_t k = 0;
  for (const auto& t : seq)
    if (k < sub.size() && t == sub[k]) ++k;
  return k == sub.size();
}

std::vector<Tokens> grams(const Tokens& s, int n) {
  std::vector<Tokens> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i)
    out.emplace_back(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i) + n);
  return out;
}

std::size_t clipped(const std::vector<Tokens>& c, const std::vector<Tokens>& r) {
  std::vector<Tokens> seen;
  std::size_t m = 0;
  for (const auto& g : c) {
    if (std::find(seen.begin(), seen.end(), g) != seen.end()) continue;
    seen.push_back(g);
    const auto cc = static_cast<std::size_t>(std::count(c.begin(), c.end(), g));
    const auto rc = static_cast<std::size_t>(std::count(r.begin(), r.end(), g));
    m += std::min(cc, rc);
  }
  return m;
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

std::size_t lcs(const Tokens& a, const Tokens& b) {
  const Tokens& s = a.size() <= b.size() ? a : b;
  const Tokens& t = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  const std::size_t n = s.size();
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    Tokens sub;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) sub.push_back(s[i]);
    if (sub.size() > best && is_subsequence(sub, t)) best = sub.size();
  }
  return best;
}

double bleu(const Tokens& cand, const Tokens& ref, int max_n) {
  if (cand.empty()) return 0.0;
  std::vector<double> logs;
  for (int n = 1; n <= max_n; ++n) {
    const auto c = grams(cand, n);
    const auto m = clipped(c, grams(ref, n));
    if (m == 0 && n == 1) return 0.0;
    const double p = m > 0 ? double(m) / double(c.size()) : 1.0 / double(c.size() + 1);
    logs.push_back(std::log(p));
  }
  double s = 0.0;
  for (double l : logs) s += l;
  const double bp = cand.size() >= ref.size() ? 1.0 : std::exp(1.0 - double(ref.size()) / double(cand.size()));
  return bp * std::exp(s / max_n);
}

double rouge_n(const Tokens& cand, const Tokens& ref, int n) {
  const auto c = grams(cand, n);
  const auto r = grams(ref, n);
  if (r.empty()) return (c.empty() && cand == ref) ? 1.0 : 0.0;
  const auto m = clipped(c, r);
  if (m == 0) return 0.0;
  return f1(double(m) / double(c.size()), double(m) / double(r.size()));
}

double rouge_l(const Tokens& cand, const Tokens& ref) {
  if (cand.empty()) return 0.0;
  const double l = static_cast<double>(lcs(cand, ref));
  return f1(l / double(cand.size()), l / double(ref.size()));
}

Alignment meteor_align(const Tokens& cand, const Tokens& ref) {
  Alignment best;
  bool have = false;
  std::vector<int> map(cand.size(), -1);
  std::vector<bool> used(ref.size(), false);
  std::function<void(std::size_t)> go = [&](std::size_t i) {
    if (i == cand.size()) {
      std::size_t m = 0, chunks = 0;
      long prev_c = -2, prev_r = -2;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        if (map[k] < 0) continue;
        ++m;
        if (!(static_cast<long>(k) == prev_c + 1 && map[k] == prev_r + 1)) ++chunks;
        prev_c = static_cast<long>(k);
        prev_r = map[k];
      }
      if (!have || m > best.matches || (m == best.matches && chunks < best.chunks)) best = {m, chunks};
      have = true;
      return;
    }
    map[i] = -1;
    go(i + 1);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (used[j] || ref[j] != cand[i]) continue;
      used[j] = true;
      map[i] = static_cast<int>(j);
      go(i + 1);
      used[j] = false;
      map[i] = -1;
    }
  };
  go(0);
  return best;
}

double meteor(const Tokens& cand, const Tokens& ref) {
  if (cand.empty()) return 0.0;
  const auto a = meteor_align(cand, ref);
  if (a.matches == 0) return 0.0;
  const double m = double(a.matches);
  const double p = m / double(cand.size()), r = m / double(ref.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  return fmean * (1.0 - 0.5 * std::pow(double(a.chunks) / m, 3.0));
}

}  // namespace oracle
