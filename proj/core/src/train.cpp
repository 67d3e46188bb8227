#include "rtrl/train.hpp"

#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace rtrl {

void IterationSchedule::validate() const {
  if (iterations < 1) throw std::invalid_argument("schedule: iterations must be >= 1");
  if (patience < 1) throw std::invalid_argument("schedule: patience must be >= 1");
}

void RunConfig::validate() const {
  grpo.validate();
  sampler.validate();
  schedule.validate();
  if (order < 0 || order > kMaxOrder) throw std::invalid_argument("config: order must lie in [0, 4]");
  if (steps < 0) throw std::invalid_argument("config: steps must be >= 0");
  if (max_len < 1) throw std::invalid_argument("config: max_len must be >= 1");
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (eval_every < 0 || checkpoint_every < 0) throw std::invalid_argument("config: cadences must be >= 0");
  if (metric_weight < 0.0) throw std::invalid_argument("config: metric_weight must be >= 0");
  if (sft_epochs < 0 || sft_batch < 1 || !(sft_lr > 0.0))
    throw std::invalid_argument("config: sft_epochs >= 0, sft_batch >= 1 and sft_lr > 0 required");
  if (selfplay_rounds < 1) throw std::invalid_argument("config: selfplay_rounds must be >= 1");
}

std::vector<SourceItem> source_items(const Vocab& vocab, const Dataset& d, DomainKind kind) {
  std::vector<SourceItem> out;
  out.reserve(d.size());
  for (const auto& r : d.records) out.push_back({vocab.tokenize(r.input, scheme_for(kind)), r.input});
  return out;
}

namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C;
constexpr std::uint64_t kSftStream = 0x5F7;

void log(const TrainContext& ctx, const std::string& msg) {
  if (ctx.hooks.log) ctx.hooks.log(msg);
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch, std::uint64_t stream) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  Rng rng = Rng::stream(seed, {stream, epoch});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

// Inputs for global step s: positions s*G .. s*G+G-1 of an endless sequence
// of seeded epoch permutations.
class BatchCursor {
 public:
  BatchCursor(std::size_t n, std::size_t per_step, std::uint64_t seed) : n_(n), per_step_(per_step), seed_(seed) {}

  std::vector<std::size_t> at(std::uint64_t step) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < per_step_; ++j) {
      const std::uint64_t pos = step * per_step_ + j;
      const std::uint64_t epoch = pos / n_;
      auto it = perms_.find(epoch);
      if (it == perms_.end()) it = perms_.emplace(epoch, permutation(n_, seed_, epoch, kBatchStream)).first;
      out.push_back(it->second[pos % n_]);
    }
    if (perms_.size() > 4) perms_.erase(perms_.begin());
    return out;
  }

 private:
  std::size_t n_, per_step_;
  std::uint64_t seed_;
  std::map<std::uint64_t, std::vector<std::size_t>> perms_;
};

using RewardFactory = std::function<RewardFn(const PolicyParams& theta)>;

// Shared GRPO loop. `make_reward` is called once, before the first step.
void grpo_phase(PolicyParams& theta, const Dataset& x, const TrainContext& ctx, int steps,
                const RewardFactory& make_reward) {
  if (x.empty()) throw std::invalid_argument("training: empty dataset");
  if (steps < 0) throw std::invalid_argument("training: steps must be >= 0");
  const auto& cfg = ctx.cfg;
  const TaskPair& pair = ctx.pair;
  pair.validate(ctx.vocab);
  cfg.grpo.validate();
  const auto items = source_items(ctx.vocab, x, pair.source);
  const RewardFn reward = make_reward(theta);

  const PolicySnapshot initial = snapshot(theta);
  RolloutOptions opts;
  opts.forward_tag = pair.forward_tag(ctx.vocab);
  opts.max_len = cfg.max_len;
  opts.threads = cfg.threads;
  opts.kl_reference = &initial.params();
  const Vocab& vocab = ctx.vocab;
  const TokenScheme out_scheme = scheme_for(pair.target);
  opts.detokenize = [&vocab, out_scheme](const Sequence& s) { return vocab.detokenize(s, out_scheme); };

  BatchCursor cursor(items.size(), static_cast<std::size_t>(cfg.grpo.groups_per_step), cfg.seed);
  std::vector<SourceItem> batch;
  for (int i = 0; i < steps; ++i) {
    batch.clear();
    for (std::size_t idx : cursor.at(theta.steps())) batch.push_back(items[idx]);
    const StepStats stats = train_step(theta, batch, reward, cfg.grpo, cfg.sampler, opts);
    if (ctx.hooks.on_step) ctx.hooks.on_step(stats, pair.forward);
    if (cfg.eval_every > 0 && stats.step % static_cast<std::uint64_t>(cfg.eval_every) == 0 && ctx.hooks.on_eval)
      ctx.hooks.on_eval(theta, pair.forward);
    if (cfg.checkpoint_every > 0 && stats.step % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0 &&
        ctx.hooks.on_checkpoint)
      ctx.hooks.on_checkpoint(theta);
  }
}

RewardConfig direction_reward(const TrainContext& ctx) {
  RewardConfig rc = ctx.cfg.reward;
  rc.checker = ctx.pair.forward_checker;
  rc.validate(ctx.vocab.size());
  return rc;
}

}  // namespace

void rtrl_train(PolicyParams& theta, const Dataset& x, const TrainContext& ctx) {
  rtrl_train(theta, x, ctx, ctx.cfg.steps);
}

void rtrl_train(PolicyParams& theta, const Dataset& x, const TrainContext& ctx, int steps) {
  const RewardConfig rc = direction_reward(ctx);
  const TokenId tg = ctx.pair.backward_tag(ctx.vocab);
  grpo_phase(theta, x, ctx, steps, [&](const PolicyParams& current) -> RewardFn {
    // phi: frozen for the whole phase.
    auto judge = std::make_shared<PolicySnapshot>(snapshot(current));
    return [judge, rc, tg](const RolloutGroup& g, const Completion& c) {
      return total_reward(*judge, g.input, c.tokens, tg, g.input_text, c.text, rc);
    };
  });
}

IterativeResult iterative_rtrl(PolicyParams& theta, const Dataset& x, const Dataset& y, const TrainContext& ctx,
                               const std::function<double(const PolicyParams&)>& heldout) {
  if (x.empty() || y.empty()) throw std::invalid_argument("iterative_rtrl: empty dataset");
  const auto& sched = ctx.cfg.schedule;
  sched.validate();
  if (sched.early_stop && !heldout) throw std::invalid_argument("iterative_rtrl: early stop needs a held-out scorer");

  IterativeResult result;
  std::optional<PolicyParams> best;
  double best_score = 0.0;
  int since_best = 0;
  for (int phase = 0; phase < sched.iterations; ++phase) {
    const bool forward = (phase % 2 == 0) == sched.start_forward;
    TrainContext phase_ctx{ctx.vocab, forward ? ctx.pair : ctx.pair.swapped(), ctx.cfg, ctx.hooks};
    log(ctx, "phase " + std::to_string(phase) + ": training " + phase_ctx.pair.forward);
    rtrl_train(theta, forward ? x : y, phase_ctx);
    ++result.phases_run;
    if (!heldout) continue;
    const double score = heldout(theta);
    result.heldout_scores.push_back(score);
    if (!best || score > best_score) {
      best = theta;
      best_score = score;
      since_best = 0;
    } else if (sched.early_stop && ++since_best >= sched.patience) {
      log(ctx, "early stop after phase " + std::to_string(phase));
      break;
    }
  }
  if (sched.early_stop && best) theta = *best;
  return result;
}

void supervised_rtrl(PolicyParams& theta, const Dataset& paired, const TrainContext& ctx) {
  if (!paired.labeled) throw std::invalid_argument("supervised_rtrl: dataset has no labels");
  if (paired.empty()) throw std::invalid_argument("supervised_rtrl: empty dataset");
  const Dataset data = ctx.cfg.supervised_subset > 0 ? take(paired, ctx.cfg.supervised_subset) : paired;
  const auto& cfg = ctx.cfg;

  if (cfg.sft_epochs > 0) {
    const auto examples = bidirectional_examples(ctx.vocab, data, ctx.pair);
    sft_train(theta, examples, cfg.sft_epochs, cfg.sft_batch, cfg.sft_lr, cfg.seed);
  }

  auto labels = std::make_shared<std::unordered_map<std::string, std::string>>();
  for (const auto& r : data.records) labels->emplace(r.input, *r.output);
  const RewardConfig rc = direction_reward(ctx);
  const TokenId tg = ctx.pair.backward_tag(ctx.vocab);
  const DomainKind kind = ctx.pair.target;
  const double w = cfg.metric_weight;
  grpo_phase(theta, data, ctx, cfg.steps, [&](const PolicyParams& current) -> RewardFn {
    auto judge = std::make_shared<PolicySnapshot>(snapshot(current));
    return [judge, rc, tg, labels, kind, w](const RolloutGroup& g, const Completion& c) {
      double r = total_reward(*judge, g.input, c.tokens, tg, g.input_text, c.text, rc);
      if (w != 0.0) r += w * metric_reward(c.text, labels->at(g.input_text), kind);
      return r;
    };
  });
}

SelfPlayResult selfplay_rtrl(PolicyParams& theta, const Dataset& seed_set, const TrainContext& ctx) {
  if (seed_set.empty()) throw std::invalid_argument("selfplay_rtrl: empty seed set");
  SelfPlayResult result;
  Dataset source = seed_set.without_labels();
  TaskPair pair = ctx.pair;
  for (int round = 0; round < ctx.cfg.selfplay_rounds; ++round) {
    TrainContext round_ctx{ctx.vocab, pair, ctx.cfg, ctx.hooks};
    log(ctx, "self-play round " + std::to_string(round) + ": training " + pair.forward);
    rtrl_train(theta, source, round_ctx);

    const auto inputs = source.inputs();
    const auto preds = predict(theta, ctx.vocab, inputs, pair.forward_tag(ctx.vocab), pair.source, pair.target,
                               SamplerConfig::greedy(ctx.cfg.seed), ctx.cfg.max_len, ctx.cfg.threads);
    Dataset synthetic;
    synthetic.source = pair.target;
    synthetic.target = pair.source;
    synthetic.seed = ctx.cfg.seed;
    std::size_t kept = 0;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i].empty() ||
          format_reward(preds[i], pair.forward_checker, inputs[i], ctx.cfg.reward.copy_guard) != 1)
        continue;
      ++kept;
      // Round-trip tokenization guards against outputs the vocabulary cannot re-read.
      try {
        (void)ctx.vocab.tokenize(preds[i], scheme_for(pair.target));
      } catch (const TokenizeError&) {
        continue;
      }
      if (seen.insert(preds[i]).second) synthetic.records.push_back({preds[i], std::nullopt, {}});
    }
    const double rate = static_cast<double>(kept) / static_cast<double>(preds.size());
    result.survival_rates.push_back(rate);
    log(ctx, "self-play round " + std::to_string(round) + ": filter survival " + std::to_string(kept) + "/" +
                 std::to_string(preds.size()));
    if (synthetic.empty())
      throw std::runtime_error("selfplay_rtrl: no synthetic record passed the format filter (survival rate " +
                               std::to_string(kept) + "/" + std::to_string(preds.size()) + ")");
    if (ctx.hooks.on_synthetic) ctx.hooks.on_synthetic("round" + std::to_string(round), synthetic);
    source = std::move(synthetic);
    pair = pair.swapped();
  }
  return result;
}

void em_train(PolicyParams& theta, const Dataset& x, const TrainContext& ctx) {
  const RewardConfig rc = direction_reward(ctx);
  const double alpha = rc.checker == FormatChecker::None ? 0.0 : rc.resolved_alpha(ctx.vocab.size());
  const TokenId tf = ctx.pair.forward_tag(ctx.vocab);
  grpo_phase(theta, x, ctx, ctx.cfg.steps, [&](const PolicyParams& current) -> RewardFn {
    // Rollouts run before the update, so `current` equals theta_old while rewards are scored.
    const PolicyParams* policy = &current;
    return [policy, rc, alpha, tf](const RolloutGroup& g, const Completion& c) {
      double r = entropy_reward(*policy, tf, g.input, c.tokens);
      if (alpha != 0.0) r += alpha * format_reward(c.text, rc.checker, g.input_text, rc.copy_guard);
      return r;
    };
  });
}

void sft_train(PolicyParams& theta, std::span<const SftExample> examples, int epochs, int batch, double lr,
               std::uint64_t seed) {
  if (examples.empty()) throw std::invalid_argument("sft_train: no examples");
  if (batch < 1) throw std::invalid_argument("sft_train: batch must be >= 1");
  std::vector<SftExample> mb;
  for (int e = 0; e < epochs; ++e) {
    const auto order = permutation(examples.size(), seed, static_cast<std::uint64_t>(e), kSftStream);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
      mb.clear();
      for (std::size_t j = start; j < std::min(order.size(), start + static_cast<std::size_t>(batch)); ++j)
        mb.push_back(examples[order[j]]);
      sft_update(theta, mb, lr);
    }
  }
}

std::vector<SftExample> bidirectional_examples(const Vocab& vocab, const Dataset& paired, const TaskPair& pair) {
  if (!paired.labeled) throw std::invalid_argument("bidirectional_examples: dataset has no labels");
  const TokenId tf = pair.forward_tag(vocab), tg = pair.backward_tag(vocab);
  std::vector<SftExample> out;
  for (const auto& r : paired.records) {
    auto x = vocab.tokenize(r.input, scheme_for(pair.source));
    auto y = vocab.tokenize(*r.output, scheme_for(pair.target));
    out.push_back({tf, x, y});
    out.push_back({tg, std::move(y), std::move(x)});
  }
  return out;
}

namespace {

std::vector<Sequence> predict_tokens(const PolicyParams& theta, const std::vector<Sequence>& inputs, TokenId tag,
                                     const SamplerConfig& sampler, std::size_t max_len, unsigned threads) {
  std::vector<Sequence> out(inputs.size());
  parallel_for(inputs.size(), threads, [&](std::size_t i) {
    Rng rng = Rng::stream(sampler.seed, {i, static_cast<std::uint64_t>(tag)});
    out[i] = sample_sequence(theta, tag, inputs[i], sampler, max_len, rng).tokens;
  });
  return out;
}

std::vector<Sequence> tokenize_all(const Vocab& vocab, const std::vector<std::string>& texts, DomainKind kind) {
  std::vector<Sequence> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(vocab.tokenize(t, scheme_for(kind)));
  return out;
}

}  // namespace

std::vector<std::string> predict(const PolicyParams& theta, const Vocab& vocab, const std::vector<std::string>& inputs,
                                 TokenId tag, DomainKind in_kind, DomainKind out_kind, const SamplerConfig& sampler,
                                 std::size_t max_len, unsigned threads) {
  const auto toks = predict_tokens(theta, tokenize_all(vocab, inputs, in_kind), tag, sampler, max_len, threads);
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(vocab.detokenize(t, scheme_for(out_kind)));
  return out;
}

void sft_synthetic_output(PolicyParams& theta, const Dataset& x, const TrainContext& ctx) {
  if (x.empty()) throw std::invalid_argument("sft_synthetic_output: empty dataset");
  const TokenId tf = ctx.pair.forward_tag(ctx.vocab);
  const auto inputs = tokenize_all(ctx.vocab, x.inputs(), ctx.pair.source);
  const auto labels =
      predict_tokens(theta, inputs, tf, SamplerConfig::greedy(ctx.cfg.seed), ctx.cfg.max_len, ctx.cfg.threads);
  std::vector<SftExample> ex;
  for (std::size_t i = 0; i < inputs.size(); ++i) ex.push_back({tf, inputs[i], labels[i]});
  sft_train(theta, ex, std::max(1, ctx.cfg.sft_epochs), ctx.cfg.sft_batch, ctx.cfg.sft_lr, ctx.cfg.seed);
}

void sft_synthetic_input(PolicyParams& theta, const Dataset& y, const TrainContext& ctx) {
  if (y.empty()) throw std::invalid_argument("sft_synthetic_input: empty dataset");
  const TokenId tf = ctx.pair.forward_tag(ctx.vocab), tg = ctx.pair.backward_tag(ctx.vocab);
  const auto targets = tokenize_all(ctx.vocab, y.inputs(), ctx.pair.target);
  const auto inputs =
      predict_tokens(theta, targets, tg, SamplerConfig::greedy(ctx.cfg.seed), ctx.cfg.max_len, ctx.cfg.threads);
  std::vector<SftExample> ex;
  for (std::size_t i = 0; i < targets.size(); ++i) ex.push_back({tf, inputs[i], targets[i]});
  sft_train(theta, ex, std::max(1, ctx.cfg.sft_epochs), ctx.cfg.sft_batch, ctx.cfg.sft_lr, ctx.cfg.seed);
}

metrics::MetricsReport roundtrip_eval(const PolicyParams& theta, const Vocab& vocab, const Dataset& x,
                                      const TaskPair& pair, const SamplerConfig& sampler, std::size_t max_len) {
  const auto src = x.inputs();
  const auto xs = tokenize_all(vocab, src, pair.source);
  const auto ys = predict_tokens(theta, xs, pair.forward_tag(vocab), sampler, max_len, 1);
  const auto back = predict_tokens(theta, ys, pair.backward_tag(vocab), sampler, max_len, 1);
  std::vector<metrics::PredLabel> pairs;
  for (std::size_t i = 0; i < src.size(); ++i)
    pairs.emplace_back(vocab.detokenize(back[i], scheme_for(pair.source)), src[i]);
  return metrics::evaluate(pair.source, pairs);
}

metrics::MetricsReport task_eval(const PolicyParams& theta, const Vocab& vocab, const Dataset& labeled,
                                 const TaskPair& pair, const SamplerConfig& sampler, std::size_t max_len) {
  if (!labeled.labeled) throw std::invalid_argument("task evaluation needs labeled records");
  const auto preds =
      predict(theta, vocab, labeled.inputs(), pair.forward_tag(vocab), pair.source, pair.target, sampler, max_len);
  const auto labels = labeled.outputs();
  std::vector<metrics::PredLabel> pairs;
  for (std::size_t i = 0; i < preds.size(); ++i) pairs.emplace_back(preds[i], labels[i]);
  return metrics::evaluate(pair.target, pairs);
}

}  // namespace rtrl
