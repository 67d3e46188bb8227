#include <benchmark/benchmark.h>

#include "rtrl/chem/smiles.hpp"
#include "rtrl/data.hpp"
#include "rtrl/grpo.hpp"
#include "rtrl/metrics.hpp"
#include "rtrl/policy.hpp"
#include "rtrl/reward.hpp"
#include "rtrl/tasks.hpp"

using namespace rtrl;

namespace {

struct Cipher {
  CipherTask task = gen_cipher_task(1, 256, 16, 12);
  TaskPair pair = task_pair_preset("cipher");
  Vocab vocab = build_task_vocab(pair, {task.alphabet}, {task.alphabet});
};

const Cipher& cipher() {
  static const Cipher c;
  return c;
}

void BM_Generate(benchmark::State& state) {
  const auto& c = cipher();
  PolicyParams p(c.vocab, static_cast<int>(state.range(0)));
  const auto x = c.vocab.tokenize(c.task.x.records[0].input, TokenScheme::Char);
  SamplerConfig s;
  s.seed = 3;
  std::uint64_t i = 0;
  for (auto _ : state) {
    Rng rng = Rng::stream(s.seed, {i++});
    benchmark::DoNotOptimize(sample_sequence(p, c.pair.forward_tag(c.vocab), x, s, 16, rng));
  }
}
BENCHMARK(BM_Generate)->Arg(0)->Arg(2);

void BM_Canonicalize(benchmark::State& state) {
  const auto m = chem::parse_smiles("CC(C)Cc1ccc(cc1)C(C)C(=O)OCC(N)C1CCCC1");
  for (auto _ : state) benchmark::DoNotOptimize(chem::canonical_smiles(m));
}
BENCHMARK(BM_Canonicalize);

void BM_GrpoStep(benchmark::State& state) {
  const auto& c = cipher();
  PolicyParams theta(c.vocab, 1);
  GrpoConfig cfg;
  cfg.group_size = 8;
  SamplerConfig s;
  s.seed = 5;
  std::vector<SourceItem> batch;
  for (int i = 0; i < 8; ++i) {
    const auto& in = c.task.x.records[i].input;
    batch.push_back({c.vocab.tokenize(in, TokenScheme::Char), in});
  }
  RolloutOptions o;
  o.forward_tag = c.pair.forward_tag(c.vocab);
  o.max_len = 16;
  o.detokenize = [&c](const Sequence& seq) {
    Sequence ordinary;
    for (auto t : seq)
      if (!c.vocab.is_reserved(t)) ordinary.push_back(t);
    return c.vocab.detokenize(ordinary, TokenScheme::Char);
  };
  const auto judge = snapshot(theta);
  const TokenId tg = c.pair.backward_tag(c.vocab);
  RewardConfig rc;
  const RewardFn reward = [&](const RolloutGroup& g, const Completion& comp) {
    return total_reward(judge, g.input, comp.tokens, tg, g.input_text, comp.text, rc);
  };
  for (auto _ : state) benchmark::DoNotOptimize(train_step(theta, batch, reward, cfg, s, o));
}
BENCHMARK(BM_GrpoStep)->Unit(benchmark::kMillisecond);

void BM_TextMetrics(benchmark::State& state) {
  const auto cand = metrics::char_tokens("the quick brown fox jumps over the lazy dog again and again");
  const auto ref = metrics::char_tokens("a quick brown dog jumps over the lazy fox once and again");
  for (auto _ : state) {
    benchmark::DoNotOptimize(metrics::bleu(cand, ref, 4));
    benchmark::DoNotOptimize(metrics::rouge_l(cand, ref));
    benchmark::DoNotOptimize(metrics::meteor_exact(cand, ref));
  }
}
BENCHMARK(BM_TextMetrics);

}  // namespace

BENCHMARK_MAIN();
