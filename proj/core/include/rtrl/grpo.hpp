#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rtrl/policy.hpp"
#include "rtrl/sampler.hpp"

namespace rtrl {

/// Which policy the KL penalty is measured against.
enum class KlReference {
  Old,      // pi_theta_old, the per-step sampling snapshot
  Initial,  // a fixed reference supplied by the caller (phase start)
};

struct GrpoConfig {
  int group_size = 12;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  double eps_norm = 1e-8;
  double learning_rate = 1.0;
  int inner_epochs = 1;
  int groups_per_step = 16;
  KlReference kl_reference = KlReference::Old;

  void validate() const;
};

struct Completion {
  Sequence tokens;
  std::string text;
  bool terminated = false;
  double reward = 0.0;
  double advantage = 0.0;
  std::vector<double> old_logprobs;  // per position under theta_old
  double old_logprob = 0.0;          // their sum
};

struct RolloutGroup {
  Sequence input;
  std::string input_text;
  TokenId tag = 0;
  std::vector<Completion> completions;
  bool normalized = false;
};

/// (r_i - mean) / (std_pop + eps_norm).
std::vector<double> normalize_advantages(std::span<const double> rewards, double eps_norm);
void normalize_group(RolloutGroup& group, double eps_norm);

struct GrpoLoss {
  double loss = 0.0;
  double policy_term = 0.0;  // mean clipped surrogate (before the minus sign)
  double kl = 0.0;           // mean per-completion KL
  double clip_fraction = 0.0;
  GradAccumulator grad;      // d loss / d logits
};

/// Clipped surrogate with a sequence-level ratio plus beta * mean per-position
/// KL(pi_theta || reference) along each completion. `kl_reference` defaults to
/// theta_old.
GrpoLoss grpo_loss(const PolicyParams& theta, const PolicySnapshot& theta_old, std::span<const RolloutGroup> groups,
                   const GrpoConfig& cfg, const PolicyParams* kl_reference = nullptr);

struct SourceItem {
  Sequence tokens;
  std::string text;
};

using RewardFn = std::function<double(const RolloutGroup&, const Completion&)>;

struct RolloutOptions {
  TokenId forward_tag = 0;
  std::size_t max_len = 64;
  std::function<std::string(const Sequence&)> detokenize;
  unsigned threads = 1;
  /// Used when GrpoConfig::kl_reference == Initial.
  const PolicyParams* kl_reference = nullptr;
};

struct StepStats {
  std::uint64_t step = 0;
  double mean_reward = 0.0;
  double mean_abs_advantage = 0.0;
  double clip_fraction = 0.0;
  double kl = 0.0;
  double loss = 0.0;
  std::size_t completions = 0;

  std::string to_json_line() const;
};

/// Samples group_size completions per input with theta_old (streams keyed by
/// seed, step, input index, completion index), scores them and normalizes.
std::vector<RolloutGroup> collect_rollouts(const PolicyParams& theta_old, std::span<const SourceItem> batch,
                                           const RewardFn& reward, const GrpoConfig& cfg,
                                           const SamplerConfig& sampler, const RolloutOptions& opts,
                                           std::uint64_t step);

/// One GRPO optimization step. The step counter of theta advances by one.
StepStats train_step(PolicyParams& theta, std::span<const SourceItem> batch, const RewardFn& reward,
                     const GrpoConfig& cfg, const SamplerConfig& sampler, const RolloutOptions& opts);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace rtrl
