#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtrl/rng.hpp"
#include "rtrl/sampler.hpp"
#include "rtrl/vocab.hpp"

namespace rtrl {

inline constexpr int kMaxOrder = 4;

/// What the policy conditions on when emitting output position i: the task
/// tag, the input token aligned with i (PAD past the end of the input), and
/// the previous `order` output tokens (BOS-padded). Unused history slots hold -1.
struct ContextKey {
  TokenId tag = 0;
  TokenId aligned = 0;
  std::array<TokenId, kMaxOrder> history{-1, -1, -1, -1};

  auto operator<=>(const ContextKey&) const = default;
  bool operator==(const ContextKey&) const = default;
};

struct ContextKeyHash {
  std::size_t operator()(const ContextKey& k) const noexcept;
};

std::string to_string(const ContextKey& key);

/// Ids the policy needs to know about; taken from the vocabulary.
struct SpecialTokens {
  TokenId pad = 0;
  TokenId bos = 0;
  TokenId eos = 0;

  static SpecialTokens from(const Vocab& v) { return {v.pad(), v.bos(), v.eos()}; }
  bool operator==(const SpecialTokens&) const = default;
};

using LogitTable = std::unordered_map<ContextKey, std::vector<double>, ContextKeyHash>;

/// Sparse logit table. Keys that were never written behave as all-zero logits
/// (uniform next-token distribution).
class PolicyParams {
 public:
  PolicyParams(std::size_t vocab_size, int order, SpecialTokens special);
  PolicyParams(const Vocab& vocab, int order) : PolicyParams(vocab.size(), order, SpecialTokens::from(vocab)) {}

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  int order() const noexcept { return order_; }
  const SpecialTokens& special() const noexcept { return special_; }
  std::uint64_t steps() const noexcept { return steps_; }
  void set_steps(std::uint64_t s) noexcept { steps_ = s; }

  const std::vector<double>* find(const ContextKey& key) const;
  /// Creates a zero row when absent.
  std::vector<double>& row(const ContextKey& key);
  const LogitTable& table() const noexcept { return table_; }
  std::vector<ContextKey> sorted_keys() const;

  /// Context for output position `pos` given the conditioning input and the
  /// output tokens produced so far (only the last `order` are read).
  ContextKey context(TokenId tag, std::span<const TokenId> conditioning, std::span<const TokenId> output,
                     std::size_t pos) const;

  bool same_values(const PolicyParams& other) const;

 private:
  std::size_t vocab_size_;
  int order_;
  SpecialTokens special_;
  std::uint64_t steps_ = 0;
  LogitTable table_;
};

/// Frozen copy of the policy. Copies share the same immutable storage.
class PolicySnapshot {
 public:
  static PolicySnapshot of(const PolicyParams& params) {
    return PolicySnapshot(std::make_shared<const PolicyParams>(params));
  }
  const PolicyParams& params() const noexcept { return *params_; }
  operator const PolicyParams&() const noexcept { return *params_; }

 private:
  explicit PolicySnapshot(std::shared_ptr<const PolicyParams> p) : params_(std::move(p)) {}
  std::shared_ptr<const PolicyParams> params_;
};

inline PolicySnapshot snapshot(const PolicyParams& params) { return PolicySnapshot::of(params); }
inline PolicySnapshot snapshot(const PolicySnapshot& snap) { return snap; }

/// Sparse per-context gradient (or any update direction) over logits.
class GradAccumulator {
 public:
  explicit GradAccumulator(std::size_t vocab_size = 0) : vocab_size_(vocab_size) {}

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  void add(const ContextKey& key, std::span<const double> values, double scale = 1.0);
  void merge(const GradAccumulator& other, double scale = 1.0);
  void scale(double factor);
  const std::vector<double>* find(const ContextKey& key) const;
  const LogitTable& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }

 private:
  std::size_t vocab_size_;
  LogitTable entries_;
};

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> next_token_dist(const PolicyParams& params, const ContextKey& key);

struct Generation {
  Sequence tokens;         // EOS excluded
  bool terminated = false; // EOS was sampled before max_len
};

Generation sample_sequence(const PolicyParams& params, TokenId tag, const Sequence& input, const SamplerConfig& cfg,
                           std::size_t max_len, Rng& rng);
/// Uses Rng(cfg.seed).
Sequence generate(const PolicyParams& params, TokenId tag, const Sequence& input, const SamplerConfig& cfg,
                  std::size_t max_len);

struct LogProb {
  std::vector<double> per_token;
  double total = 0.0;
};

/// Teacher-forced log-likelihood of `target` (plus the EOS step when
/// include_eos) given the conditioning sequence.
LogProb sequence_logprob(const PolicyParams& params, TokenId tag, const Sequence& conditioning, const Sequence& target,
                         bool include_eos = true);

/// Adds scale * d/dlogits log p(target | conditioning) into `grad`.
void accumulate_logprob_grad(const PolicyParams& params, TokenId tag, const Sequence& conditioning,
                             const Sequence& target, bool include_eos, double scale, GradAccumulator& grad);
GradAccumulator logprob_grad(const PolicyParams& params, TokenId tag, const Sequence& conditioning,
                             const Sequence& target, bool include_eos = true);

/// Ascent step: logits[c] += lr * grad[c]. All-zero rows are skipped so
/// they never materialize new keys. Rejects non-finite rows.
void apply_update(PolicyParams& params, const GradAccumulator& grad, double learning_rate);

struct SftExample {
  TokenId tag;
  Sequence conditioning;
  Sequence target;
};

/// Mean teacher-forced log-likelihood of a batch.
double batch_loglik(const PolicyParams& params, std::span<const SftExample> batch);
/// One ascent step on the mean log-likelihood of the batch.
void sft_update(PolicyParams& params, std::span<const SftExample> batch, double learning_rate);

}  // namespace rtrl
