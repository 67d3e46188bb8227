#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "rtrl/data.hpp"
#include "rtrl/grpo.hpp"
#include "rtrl/metrics.hpp"
#include "rtrl/policy.hpp"
#include "rtrl/reward.hpp"
#include "rtrl/sampler.hpp"
#include "rtrl/tasks.hpp"
#include "rtrl/vocab.hpp"

namespace rtrl {

struct IterationSchedule {
  int iterations = 2;         // phases; odd phases train the reverse direction
  bool start_forward = true;
  bool early_stop = false;    // needs a held-out score hook
  int patience = 1;

  void validate() const;
};

struct RunConfig {
  GrpoConfig grpo;
  SamplerConfig sampler;
  RewardConfig reward;  // the checker comes from the task pair, per direction
  IterationSchedule schedule;

  std::string task = "cipher";
  std::string train_path;      // source records (labels ignored by self-supervised regimes)
  std::string unpaired_path;   // target-side records for the iterative regime
  std::string eval_path;       // held-out labeled records
  std::string init_checkpoint; // empty = uniform policy over the data vocabulary

  int order = 2;               // output-history length of the tabular policy
  int steps = 500;             // optimization steps per phase
  std::size_t max_len = 32;    // generation cap
  std::uint64_t seed = 0;
  unsigned threads = 1;
  int eval_every = 0;          // 0 = only at the end
  int checkpoint_every = 0;    // 0 = only at the end
  bool eval_greedy = true;     // evaluation decoding; false = the sampler settings

  double metric_weight = 1.0;  // supervised regime
  std::size_t supervised_subset = 0;  // 0 = all labeled records
  int sft_epochs = 2;
  int sft_batch = 16;
  double sft_lr = 1.0;
  int selfplay_rounds = 2;

  void validate() const;
};

/// Optional callbacks; every one may be empty.
struct TrainHooks {
  std::function<void(const StepStats&, std::string_view phase)> on_step;
  std::function<void(const PolicyParams&, std::string_view phase)> on_eval;
  std::function<void(const PolicyParams&)> on_checkpoint;
  std::function<void(std::string_view name, const Dataset&)> on_synthetic;
  std::function<void(std::string_view message)> log;
};

struct TrainContext {
  const Vocab& vocab;
  TaskPair pair;
  RunConfig cfg;
  TrainHooks hooks;
};

/// Tokenized copy of a dataset's inputs in the given domain.
std::vector<SourceItem> source_items(const Vocab& vocab, const Dataset& d, DomainKind kind);

/// Self-supervised RTRL: phi = snapshot(theta) once, then `steps` GRPO steps
/// with reward log p_phi(x | y, t_g) / (|x|+1) + alpha F(y). Batches cycle
/// through seeded epoch permutations keyed by the global step counter.
void rtrl_train(PolicyParams& theta, const Dataset& x, const TrainContext& ctx);
void rtrl_train(PolicyParams& theta, const Dataset& x, const TrainContext& ctx, int steps);

/// Alternating phases; phase 2k trains t_f on X, phase 2k+1 trains t_g on Y.
/// With early stopping, `heldout` is called after each phase and the best
/// policy seen is kept.
struct IterativeResult {
  int phases_run = 0;
  std::vector<double> heldout_scores;  // empty unless a scorer was given
};
IterativeResult iterative_rtrl(PolicyParams& theta, const Dataset& x, const Dataset& y, const TrainContext& ctx,
                               const std::function<double(const PolicyParams&)>& heldout = {});

/// SFT warm start on both directions (sft_epochs), then RTRL with
/// reward = total_reward + metric_weight * metric_reward(y, label).
void supervised_rtrl(PolicyParams& theta, const Dataset& paired, const TrainContext& ctx);

struct SelfPlayResult {
  std::vector<double> survival_rates;  // per round
};
/// Round r trains the current direction on the current source set, then
/// greedily synthesizes targets, keeps those with F = 1, and swaps roles.
SelfPlayResult selfplay_rtrl(PolicyParams& theta, const Dataset& seed_set, const TrainContext& ctx);

/// Reward = negative generation entropy + alpha F(y).
void em_train(PolicyParams& theta, const Dataset& x, const TrainContext& ctx);

/// Greedy labels Y* for X, then SFT on (X, Y*) in the forward direction.
void sft_synthetic_output(PolicyParams& theta, const Dataset& x, const TrainContext& ctx);
/// Greedy inputs X* for Y through t_g, then SFT on (X*, Y) in the forward direction.
void sft_synthetic_input(PolicyParams& theta, const Dataset& y, const TrainContext& ctx);

/// Mini-batch SFT for `epochs` epochs over seeded permutations.
void sft_train(PolicyParams& theta, std::span<const SftExample> examples, int epochs, int batch, double lr,
               std::uint64_t seed);
/// Forward (t_f: input -> output) and backward (t_g: output -> input) examples.
std::vector<SftExample> bidirectional_examples(const Vocab& vocab, const Dataset& paired, const TaskPair& pair);

/// x -> y with t_f, y -> x' with t_g, metrics on (x', x) over the source
/// battery. Decoding stream i uses Rng::stream(sampler.seed, {i, direction}).
metrics::MetricsReport roundtrip_eval(const PolicyParams& theta, const Vocab& vocab, const Dataset& x,
                                      const TaskPair& pair, const SamplerConfig& sampler, std::size_t max_len);
/// Forward predictions against labels over the target battery.
metrics::MetricsReport task_eval(const PolicyParams& theta, const Vocab& vocab, const Dataset& labeled,
                                 const TaskPair& pair, const SamplerConfig& sampler, std::size_t max_len);

/// Generates one output per input (stream i), detokenized.
std::vector<std::string> predict(const PolicyParams& theta, const Vocab& vocab, const std::vector<std::string>& inputs,
                                 TokenId tag, DomainKind in_kind, DomainKind out_kind, const SamplerConfig& sampler,
                                 std::size_t max_len, unsigned threads = 1);

}  // namespace rtrl
