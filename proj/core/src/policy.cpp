#include "rtrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtrl {

std::size_t ContextKeyHash::operator()(const ContextKey& k) const noexcept {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.tag) * 0x100000001B3ULL + static_cast<std::uint64_t>(k.aligned));
  for (TokenId t : k.history) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  return static_cast<std::size_t>(h);
}

std::string to_string(const ContextKey& key) {
  std::string s = "(tag=" + std::to_string(key.tag) + ", aligned=" + std::to_string(key.aligned) + ", history=[";
  bool first = true;
  for (TokenId t : key.history) {
    if (t < 0) continue;
    if (!first) s += ",";
    s += std::to_string(t);
    first = false;
  }
  return s + "])";
}

PolicyParams::PolicyParams(std::size_t vocab_size, int order, SpecialTokens special)
    : vocab_size_(vocab_size), order_(order), special_(special) {
  if (vocab_size == 0) throw std::invalid_argument("policy: empty vocabulary");
  if (order < 0 || order > kMaxOrder)
    throw std::invalid_argument("policy: order must lie in [0, " + std::to_string(kMaxOrder) + "]");
}

const std::vector<double>* PolicyParams::find(const ContextKey& key) const {
  auto it = table_.find(key);
  return it == table_.end() ? nullptr : &it->second;
}

std::vector<double>& PolicyParams::row(const ContextKey& key) {
  auto [it, inserted] = table_.try_emplace(key);
  if (inserted) it->second.assign(vocab_size_, 0.0);
  return it->second;
}

std::vector<ContextKey> PolicyParams::sorted_keys() const {
  std::vector<ContextKey> keys;
  keys.reserve(table_.size());
  for (const auto& [k, v] : table_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

ContextKey PolicyParams::context(TokenId tag, std::span<const TokenId> conditioning, std::span<const TokenId> output,
                                 std::size_t pos) const {
  ContextKey key;
  key.tag = tag;
  key.aligned = pos < conditioning.size() ? conditioning[pos] : special_.pad;
  for (int j = 0; j < order_; ++j) {
    // history[0] is the most recent token.
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(pos) - 1 - j;
    key.history[static_cast<std::size_t>(j)] = src >= 0 ? output[static_cast<std::size_t>(src)] : special_.bos;
  }
  return key;
}

bool PolicyParams::same_values(const PolicyParams& other) const {
  if (vocab_size_ != other.vocab_size_ || order_ != other.order_ || !(special_ == other.special_)) return false;
  auto nonzero = [](const std::vector<double>& v) {
    return std::any_of(v.begin(), v.end(), [](double x) { return x != 0.0; });
  };
  for (const auto& [k, v] : table_) {
    const auto* o = other.find(k);
    if (o ? *o != v : nonzero(v)) return false;
  }
  for (const auto& [k, v] : other.table_)
    if (!find(k) && nonzero(v)) return false;
  return true;
}

void GradAccumulator::add(const ContextKey& key, std::span<const double> values, double scale) {
  if (values.size() != vocab_size_) throw std::invalid_argument("GradAccumulator: row width mismatch");
  auto [it, inserted] = entries_.try_emplace(key);
  if (inserted) it->second.assign(vocab_size_, 0.0);
  for (std::size_t j = 0; j < vocab_size_; ++j) it->second[j] += scale * values[j];
}

void GradAccumulator::merge(const GradAccumulator& other, double scale) {
  // Sorted so the floating-point result does not depend on hash order.
  std::vector<ContextKey> keys;
  keys.reserve(other.entries_.size());
  for (const auto& [k, v] : other.entries_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (const auto& k : keys) add(k, other.entries_.at(k), scale);
}

void GradAccumulator::scale(double factor) {
  for (auto& [k, v] : entries_)
    for (double& x : v) x *= factor;
}

const std::vector<double>* GradAccumulator::find(const ContextKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

std::vector<double> next_token_dist(const PolicyParams& params, const ContextKey& key) {
  if (const auto* row = params.find(key)) return softmax(*row);
  return std::vector<double>(params.vocab_size(), 1.0 / static_cast<double>(params.vocab_size()));
}

Generation sample_sequence(const PolicyParams& params, TokenId tag, const Sequence& input, const SamplerConfig& cfg,
                           std::size_t max_len, Rng& rng) {
  if (max_len < 1) throw std::invalid_argument("generate: max_len must be >= 1");
  Generation g;
  while (g.tokens.size() < max_len) {
    const auto key = params.context(tag, input, g.tokens, g.tokens.size());
    const auto probs = next_token_dist(params, key);
    const TokenId t = sample_categorical(probs, cfg, rng);
    if (t == params.special().eos) {
      g.terminated = true;
      break;
    }
    g.tokens.push_back(t);
  }
  return g;
}

Sequence generate(const PolicyParams& params, TokenId tag, const Sequence& input, const SamplerConfig& cfg,
                  std::size_t max_len) {
  Rng rng(cfg.seed);
  return sample_sequence(params, tag, input, cfg, max_len, rng).tokens;
}

namespace {

double log_softmax_at(std::span<const double> logits, std::size_t index) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  return logits[index] - m - std::log(z);
}

}  // namespace

LogProb sequence_logprob(const PolicyParams& params, TokenId tag, const Sequence& conditioning, const Sequence& target,
                         bool include_eos) {
  LogProb out;
  const std::size_t steps = target.size() + (include_eos ? 1 : 0);
  const double uniform = -std::log(static_cast<double>(params.vocab_size()));
  out.per_token.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const TokenId t = i < target.size() ? target[i] : params.special().eos;
    const auto key = params.context(tag, conditioning, target, i);
    const auto* row = params.find(key);
    const double lp = row ? log_softmax_at(*row, static_cast<std::size_t>(t)) : uniform;
    out.per_token.push_back(lp);
    out.total += lp;
  }
  return out;
}

void accumulate_logprob_grad(const PolicyParams& params, TokenId tag, const Sequence& conditioning,
                             const Sequence& target, bool include_eos, double scale, GradAccumulator& grad) {
  const std::size_t steps = target.size() + (include_eos ? 1 : 0);
  for (std::size_t i = 0; i < steps; ++i) {
    const TokenId t = i < target.size() ? target[i] : params.special().eos;
    const auto key = params.context(tag, conditioning, target, i);
    auto g = next_token_dist(params, key);
    for (double& x : g) x = -x;
    g[static_cast<std::size_t>(t)] += 1.0;
    grad.add(key, g, scale);
  }
}

GradAccumulator logprob_grad(const PolicyParams& params, TokenId tag, const Sequence& conditioning,
                             const Sequence& target, bool include_eos) {
  GradAccumulator grad(params.vocab_size());
  accumulate_logprob_grad(params, tag, conditioning, target, include_eos, 1.0, grad);
  return grad;
}

void apply_update(PolicyParams& params, const GradAccumulator& grad, double learning_rate) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("apply_update: learning rate must be positive");
  if (grad.vocab_size() != params.vocab_size()) throw std::invalid_argument("apply_update: vocabulary size mismatch");
  for (const auto& [key, g] : grad.entries()) {
    for (double x : g)
      if (!std::isfinite(x)) throw std::domain_error("apply_update: non-finite gradient at context " + to_string(key));
  }
  for (const auto& [key, g] : grad.entries()) {
    if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) continue;
    auto& row = params.row(key);
    for (std::size_t j = 0; j < g.size(); ++j) row[j] += learning_rate * g[j];
  }
  params.set_steps(params.steps() + 1);
}

double batch_loglik(const PolicyParams& params, std::span<const SftExample> batch) {
  if (batch.empty()) throw std::invalid_argument("batch_loglik: empty batch");
  double sum = 0.0;
  for (const auto& ex : batch) sum += sequence_logprob(params, ex.tag, ex.conditioning, ex.target).total;
  return sum / static_cast<double>(batch.size());
}

void sft_update(PolicyParams& params, std::span<const SftExample> batch, double learning_rate) {
  if (batch.empty()) throw std::invalid_argument("sft_update: empty batch");
  GradAccumulator grad(params.vocab_size());
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) accumulate_logprob_grad(params, ex.tag, ex.conditioning, ex.target, true, w, grad);
  apply_update(params, grad, learning_rate);
}

}  // namespace rtrl
