#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "rtrl/policy.hpp"

using namespace rtrl;

namespace {

// 4 ordinary tokens, then pad bos eos sep, then two tags.
Vocab small_vocab() { return Vocab::build({"a", "b", "c", "d"}, {"fwd", "bwd"}); }

}  // namespace

TEST_CASE("next_token_dist is the softmax of the stored row") {
  PolicyParams p(4, 1, SpecialTokens{1, 2, 3});
  const ContextKey k{0, 0, {2, -1, -1, -1}};
  const auto u = next_token_dist(p, k);
  for (double x : u) CHECK(x == doctest::Approx(0.25));
  PolicyParams q(2, 0, SpecialTokens{0, 0, 1});
  q.row(k) = {std::log(2.0), 0.0};
  auto d = next_token_dist(q, k);
  CHECK(d[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  q.row(k) = {std::log(2.0) + 50.0, 50.0};
  d = next_token_dist(q, k);
  CHECK(d[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("context keys align the input and pad the history") {
  const auto v = small_vocab();
  PolicyParams p(v, 2);
  const Sequence in{0, 1};
  const Sequence out{2, 3, 0};
  const auto k0 = p.context(9, in, out, 0);
  CHECK(k0.aligned == 0);
  CHECK(k0.history[0] == v.bos());
  CHECK(k0.history[2] == -1);
  const auto k3 = p.context(9, in, out, 3);
  CHECK(k3.aligned == v.pad());
  CHECK(k3.history[0] == 0);
  CHECK(k3.history[1] == 3);
  CHECK(k3 == oracle::key_at(p, 9, in, out, 3));
}

TEST_CASE("sequence_logprob on uniform and deterministic policies") {
  const auto v = small_vocab();
  PolicyParams p(v, 1);
  const TokenId tag = v.task_tag("fwd");
  const Sequence x{0, 1, 2};
  const auto lp = sequence_logprob(p, tag, x, x);
  CHECK(lp.per_token.size() == 4);
  CHECK(lp.total == doctest::Approx(-4.0 * std::log(double(v.size()))));
  CHECK(sequence_logprob(p, tag, x, x).total == lp.total);

  for (std::size_t i = 0; i <= x.size(); ++i) {
    auto& row = p.row(p.context(tag, x, x, i));
    row[static_cast<std::size_t>(i < x.size() ? x[i] : v.eos())] = 800.0;
  }
  CHECK(sequence_logprob(p, tag, x, x).total == doctest::Approx(0.0));
}

TEST_CASE("logprob_grad matches the closed form and finite differences") {
  PolicyParams p(2, 0, SpecialTokens{0, 0, 1});
  const auto g = logprob_grad(p, 5, {}, {0}, false);
  const auto* row = g.find(p.context(5, Sequence{}, Sequence{0}, 0));
  REQUIRE(row);
  CHECK((*row)[0] == doctest::Approx(0.5));
  CHECK((*row)[1] == doctest::Approx(-0.5));

  const auto v = small_vocab();
  PolicyParams q(v, 2);
  Rng rng(11);
  const TokenId tag = v.task_tag("bwd");
  for (int c = 0; c < 20; ++c) {
    Sequence cond(rng.below(5)), tgt(1 + rng.below(5));
    for (auto& t : cond) t = static_cast<TokenId>(rng.below(4));
    for (auto& t : tgt) t = static_cast<TokenId>(rng.below(4));
    for (std::size_t i = 0; i <= tgt.size(); ++i)
      for (auto& z : q.row(q.context(tag, cond, tgt, i))) z = 2.0 * rng.uniform() - 1.0;
    const auto an = logprob_grad(q, tag, cond, tgt);
    for (const auto& [k, r] : an.entries()) CHECK(std::accumulate(r.begin(), r.end(), 0.0) == doctest::Approx(0.0));
    const auto fd = oracle::fd_logprob_grad(q, tag, cond, tgt, true, 1e-5);
    CHECK(oracle::norm_diff(oracle::to_dense(an), fd) <= 1e-4 * oracle::norm(fd));
  }
}

TEST_CASE("snapshots are immutable") {
  const auto v = small_vocab();
  PolicyParams p(v, 1);
  const TokenId tag = v.task_tag("fwd");
  const Sequence x{0, 1, 2, 3};
  const auto snap = snapshot(p);
  const auto again = snapshot(snap);
  const double before = sequence_logprob(snap, tag, x, x).total;
  for (int i = 0; i < 100; ++i) apply_update(p, logprob_grad(p, tag, x, x), 0.5);
  CHECK(sequence_logprob(snap, tag, x, x).total == before);
  CHECK(&again.params() == &snap.params());
  CHECK(sequence_logprob(p, tag, x, x).total > before);
}

TEST_CASE("apply_update: sparsity, step count, rejection") {
  const auto v = small_vocab();
  PolicyParams p(v, 1);
  GradAccumulator zero(v.size());
  apply_update(p, zero, 1.0);
  CHECK(p.steps() == 1);
  CHECK(p.table().empty());

  GradAccumulator one(v.size());
  const ContextKey k{v.task_tag("fwd"), 0, {v.bos(), -1, -1, -1}};
  std::vector<double> g(v.size(), 0.0);
  g[2] = 1.0;
  one.add(k, g);
  apply_update(p, one, 0.5);
  CHECK(p.table().size() == 1);
  CHECK((*p.find(k))[2] == 0.5);

  g[1] = std::nan("");
  GradAccumulator bad(v.size());
  bad.add(k, g);
  CHECK_THROWS_WITH_AS(apply_update(p, bad, 1.0), doctest::Contains("non-finite"), std::domain_error);
  CHECK_THROWS_AS(apply_update(p, one, 0.0), std::invalid_argument);
}

TEST_CASE("repeated ascent drives one example's log-prob toward zero") {
  const auto v = small_vocab();
  PolicyParams p(v, 1);
  const TokenId tag = v.task_tag("fwd");
  const Sequence x{0, 1, 2}, y{3, 3, 1};
  double prev = sequence_logprob(p, tag, x, y).total;
  for (int i = 0; i < 200; ++i) {
    apply_update(p, logprob_grad(p, tag, x, y), 0.1);
    const double now = sequence_logprob(p, tag, x, y).total;
    CHECK(now > prev);
    CHECK(now < 0.0);
    prev = now;
  }
}

TEST_CASE("sft_update raises batch likelihood and learns the identity task") {
  const auto v = small_vocab();
  PolicyParams p(v, 1);
  const TokenId tag = v.task_tag("fwd");
  Rng rng(5);
  std::vector<SftExample> batch;
  for (int i = 0; i < 10; ++i) {
    Sequence s(1 + rng.below(5));
    for (auto& t : s) t = static_cast<TokenId>(rng.below(4));
    batch.push_back({tag, s, s});
  }
  double prev = batch_loglik(p, batch);
  for (int i = 0; i < 100; ++i) {
    sft_update(p, batch, 0.1);
    const double now = batch_loglik(p, batch);
    CHECK(now >= prev);
    prev = now;
  }
  for (int i = 0; i < 400; ++i) sft_update(p, batch, 2.0);
  for (const auto& ex : batch) CHECK(generate(p, tag, ex.conditioning, SamplerConfig::greedy(), 16) == ex.target);
  CHECK_THROWS_AS(sft_update(p, std::vector<SftExample>{}, 0.1), std::invalid_argument);
}

TEST_CASE("generate: immediate EOS, determinism, cap") {
  const auto v = small_vocab();
  PolicyParams p(v, 1);
  const TokenId tag = v.task_tag("fwd");
  const Sequence in{0, 1, 2};
  p.row(p.context(tag, in, Sequence{}, 0))[static_cast<std::size_t>(v.eos())] = 10.0;
  CHECK(generate(p, tag, in, SamplerConfig::greedy(), 8).empty());

  PolicyParams u(v, 1);
  SamplerConfig s;
  s.top_p = 1.0;
  s.temperature = 1.0;
  s.seed = 77;
  CHECK(generate(u, tag, in, s, 8) == generate(u, tag, in, s, 8));
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto g = sample_sequence(u, tag, in, s, 5, rng);
    CHECK(g.tokens.size() <= 5);
    if (!g.terminated) CHECK(g.tokens.size() == 5);
  }
  CHECK_THROWS_AS(generate(u, tag, in, s, 0), std::invalid_argument);
}
