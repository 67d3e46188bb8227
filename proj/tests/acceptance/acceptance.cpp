// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "molgen.hpp"
#include "oracles.hpp"
#include "rtrl/chem/fingerprint.hpp"
#include "rtrl/chem/smiles.hpp"
#include "rtrl/cli.hpp"
#include "rtrl/grpo.hpp"
#include "rtrl/metrics.hpp"
#include "rtrl/reward.hpp"
#include "rtrl/rng.hpp"
#include "rtrl/train.hpp"
#include "toy.hpp"

namespace fs = std::filesystem;
using namespace rtrl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = seconds_since(t0);
  if (!o.pass) ++failures;
  std::printf("criterion %2d  %s  %-28s %s  [%.2fs]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), dt);
  std::fflush(stdout);
}

// Ids v-3, v-2, v-1 play pad, bos, eos.
PolicyParams bare_policy(std::size_t v, int order) {
  return PolicyParams(v, order, SpecialTokens{static_cast<TokenId>(v - 3), static_cast<TokenId>(v - 2),
                                              static_cast<TokenId>(v - 1)});
}

Sequence random_seq(Rng& rng, std::size_t max_len, TokenId below) {
  Sequence s(rng.below(max_len + 1));
  for (auto& t : s) t = static_cast<TokenId>(rng.below(static_cast<std::uint64_t>(below)));
  return s;
}

void fill_rows(PolicyParams& p, Rng& rng, TokenId tag, const Sequence& cond, const Sequence& target, double scale) {
  for (std::size_t i = 0; i <= target.size(); ++i) {
    auto& row = p.row(oracle::key_at(p, tag, cond, target, i));
    for (auto& z : row) z = scale * (2.0 * rng.uniform() - 1.0);
  }
}

// ---------------------------------------------------------------------------

Outcome c1_advantages() {
  const std::vector<double> r{1, 2, 3};
  const auto a = normalize_advantages(r, 1e-8);
  const double want = std::sqrt(1.5);
  double err = std::max({std::abs(a[0] + want), std::abs(a[1]), std::abs(a[2] - want)});
  bool ok = err <= 1e-5;
  const auto z = normalize_advantages(std::vector<double>{5, 5, 5, 5}, 1e-8);
  ok = ok && std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; });
  Rng rng(1);
  double worst_mean = 0.0;
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> g(2 + rng.below(31));
    for (auto& x : g) x = rng.uniform() < 0.2 ? 1.0 : 20.0 * rng.uniform() - 10.0;
    const auto adv = normalize_advantages(g, 1e-8);
    worst_mean = std::max(worst_mean, std::abs(std::accumulate(adv.begin(), adv.end(), 0.0) / double(adv.size())));
  }
  ok = ok && worst_mean <= 1e-9;
  return {ok, fmt("[1,2,3] err %.1e; constant group zeros; max |mean| %.1e over 10000 groups", err, worst_mean)};
}

Outcome c2_gradients() {
  Rng rng(2);
  const int cases = 200;
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const std::size_t v = 6 + rng.below(6);
    const int order = static_cast<int>(rng.below(4));
    PolicyParams p = bare_policy(v, order);
    const TokenId tag = static_cast<TokenId>(rng.below(v - 3));
    const auto cond = random_seq(rng, 6, static_cast<TokenId>(v - 3));
    const auto target = random_seq(rng, 6, static_cast<TokenId>(v - 3));
    const bool eos = rng.below(4) != 0;
    fill_rows(p, rng, tag, cond, target, 3.0);
    const auto analytic = oracle::to_dense(logprob_grad(p, tag, cond, target, eos));
    const auto numeric = oracle::fd_logprob_grad(p, tag, cond, target, eos, 1e-5);
    const double scale = std::max(oracle::norm(numeric), 1e-12);
    worst = std::max(worst, oracle::norm_diff(analytic, numeric) / scale);
  }
  return {worst <= 1e-4, fmt("%d random cases, max relative error %.2e (tol 1e-4)", cases, worst)};
}

std::vector<RolloutGroup> random_groups(Rng& rng, const PolicyParams& theta, int ngroups, int gsize,
                                        std::size_t max_len) {
  std::vector<SourceItem> batch;
  const TokenId ordinary = theta.special().pad;
  for (int i = 0; i < ngroups; ++i) batch.push_back({random_seq(rng, 6, ordinary), ""});
  GrpoConfig cfg;
  cfg.group_size = gsize;
  SamplerConfig s;
  s.temperature = 1.0;
  s.top_k = 1000;
  s.top_p = 1.0;
  s.seed = rng.next_u64();
  RolloutOptions opts;
  opts.forward_tag = 0;
  opts.max_len = max_len;
  const std::uint64_t salt = rng.next_u64();
  RewardFn reward = [salt](const RolloutGroup&, const Completion& c) {
    std::uint64_t h = salt;
    for (auto t : c.tokens) h = splitmix64(h ^ static_cast<std::uint64_t>(t));
    return static_cast<double>(h % 1000) / 100.0;
  };
  return collect_rollouts(theta, batch, reward, cfg, s, opts, 0);
}

Outcome c3_grpo_degenerate() {
  Rng rng(3);
  double worst_loss = 0.0, worst_kl = 0.0, worst_grad = 0.0, worst_clip = 0.0;
  int clipped_cases = 0;
  for (int c = 0; c < 50; ++c) {
    const std::size_t v = 8;
    PolicyParams theta = bare_policy(v, static_cast<int>(rng.below(3)));
    // Give the policy some shape so completions differ in likelihood.
    for (int k = 0; k < 40; ++k) {
      const auto cond = random_seq(rng, 6, 5);
      const auto tgt = random_seq(rng, 6, 5);
      fill_rows(theta, rng, 0, cond, tgt, 1.5);
    }
    const auto groups = random_groups(rng, theta, 3, 6, 6);
    GrpoConfig cfg;
    cfg.kl_beta = 0.0;
    const auto old = snapshot(theta);
    const auto l = grpo_loss(theta, old, groups, cfg);
    worst_loss = std::max(worst_loss, std::abs(l.loss));
    cfg.kl_beta = 0.04;
    worst_kl = std::max(worst_kl, std::abs(grpo_loss(theta, old, groups, cfg).kl));
    worst_grad = std::max(worst_grad, oracle::max_abs_diff(oracle::to_dense(l.grad), oracle::reinforce_grad(theta, groups)));

    // Push one positive-advantage completion far past 1 + eps.
    cfg.kl_beta = 0.0;
    std::size_t gi = groups.size(), ci = 0;
    for (std::size_t g = 0; g < groups.size() && gi == groups.size(); ++g)
      for (std::size_t k = 0; k < groups[g].completions.size(); ++k)
        if (groups[g].completions[k].advantage > 0.1) {
          gi = g;
          ci = k;
          break;
        }
    if (gi == groups.size()) continue;
    const auto& pick = groups[gi].completions[ci];
    PolicyParams moved = theta;
    apply_update(moved, logprob_grad(theta, groups[gi].tag, groups[gi].input, pick.tokens, pick.terminated), 3.0);
    const double rho = std::exp(sequence_logprob(moved, groups[gi].tag, groups[gi].input, pick.tokens, pick.terminated).total -
                                pick.old_logprob);
    if (rho <= 1.0 + cfg.clip_eps) continue;
    auto zeroed = groups;
    zeroed[gi].completions[ci].advantage = 0.0;
    const auto with = grpo_loss(moved, old, groups, cfg);
    const auto without = grpo_loss(moved, old, zeroed, cfg);
    worst_clip = std::max(worst_clip, oracle::max_abs_diff(oracle::to_dense(with.grad), oracle::to_dense(without.grad)));
    ++clipped_cases;
  }
  const bool ok = worst_loss <= 1e-12 && worst_kl == 0.0 && worst_grad <= 1e-10 && clipped_cases >= 20 &&
                  worst_clip <= 1e-12;
  return {ok, fmt("|loss| %.1e, KL %.1e, grad vs REINFORCE %.1e; %d clipped cases, clipped grad %.1e", worst_loss,
                  worst_kl, worst_grad, clipped_cases, worst_clip)};
}

oracle::Tokens random_tokens(Rng& rng, std::size_t min_len, std::size_t max_len) {
  static const char* words[] = {"a", "b", "c", "d"};
  oracle::Tokens t(min_len + rng.below(max_len - min_len + 1));
  for (auto& w : t) w = words[rng.below(4)];
  return t;
}

Outcome c4_metrics() {
  Rng rng(4);
  std::size_t lev_bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto cand = random_tokens(rng, 0, 9);
    const auto ref = random_tokens(rng, 1, 9);
    std::string a, b;
    for (const auto& w : cand) a += w;
    for (const auto& w : ref) b += w;
    if (metrics::levenshtein(a, b) != oracle::edit_distance(a, b)) ++lev_bad;
    for (int n = 1; n <= 4; ++n) worst = std::max(worst, std::abs(metrics::bleu(cand, ref, n) - oracle::bleu(cand, ref, n)));
    for (int n = 1; n <= 2; ++n)
      worst = std::max(worst, std::abs(metrics::rouge_n(cand, ref, n) - oracle::rouge_n(cand, ref, n)));
    worst = std::max(worst, std::abs(metrics::rouge_l(cand, ref) - oracle::rouge_l(cand, ref)));
    worst = std::max(worst, std::abs(metrics::meteor_exact(cand, ref) - oracle::meteor(cand, ref)));
  }
  std::vector<chem::Molecule> a, b;
  for (int i = 0; i < 40; ++i) a.push_back(oracle::random_molecule(rng));
  for (int i = 0; i < 25; ++i) b.push_back(oracle::random_molecule(rng));
  const double self = metrics::frechet_descriptor_distance(a, a);
  const double ab = metrics::frechet_descriptor_distance(a, b);
  const double ba = metrics::frechet_descriptor_distance(b, a);
  const bool ok = lev_bad == 0 && worst <= 1e-9 && std::abs(self) <= 1e-9 && ab == ba;
  return {ok, fmt("1000 pairs: levenshtein mismatches %zu, max bleu/rouge/meteor diff %.1e; FD(A,A) %.1e, "
                  "FD(A,B)-FD(B,A) %.1e",
                  lev_bad, worst, self, ab - ba)};
}

Outcome c5_parser() {
  Rng rng(5);
  int variant = 0, not_idempotent = 0, not_iso = 0, write_not_iso = 0;
  for (int i = 0; i < 500; ++i) {
    const auto m = oracle::random_molecule(rng, 12);
    const std::string c = chem::canonical_smiles(m);
    for (int k = 0; k < 10; ++k) {
      const auto perm = oracle::random_permutation(rng, m.num_atoms());
      if (chem::canonical_smiles(m.permuted(perm)) != c) ++variant;
    }
    const auto back = chem::parse_smiles(c);
    if (chem::canonical_smiles(back) != c) ++not_idempotent;
    if (!oracle::isomorphic(back, m)) ++not_iso;
    const auto ranks = oracle::random_permutation(rng, m.num_atoms());
    if (!oracle::isomorphic(chem::parse_smiles(chem::write_smiles(m, ranks)), m)) ++write_not_iso;
  }
  const bool ok = variant == 0 && not_idempotent == 0 && not_iso == 0 && write_not_iso == 0;
  return {ok, fmt("500 molecules x 10 relabelings: variant %d, non-idempotent %d, non-isomorphic %d (+%d from "
                  "random-order writes)",
                  variant, not_idempotent, not_iso, write_not_iso)};
}

Outcome c6_reward_guard() {
  Rng rng(6);
  int compared = 0, violations = 0, skipped = 0;
  double min_gap = 1e300;
  while (compared < 1000) {
    const int letters = 3 + static_cast<int>(rng.below(10));
    std::vector<std::string> toks;
    for (int i = 0; i < letters; ++i) toks.push_back(std::string(1, static_cast<char>('a' + i)));
    const Vocab v = Vocab::build(toks, {"fwd", "bwd"});
    const TokenId tg = v.task_tag("bwd");
    PolicyParams phi(v, static_cast<int>(rng.below(3)));
    auto word = [&](std::size_t min_len) {
      std::string s(min_len + rng.below(6), 'a');
      for (auto& ch : s) ch = static_cast<char>('a' + rng.below(static_cast<std::uint64_t>(letters)));
      return s;
    };
    const std::string x = word(1);
    const Sequence xs = v.tokenize(x, TokenScheme::Char);
    // Random judge, sharpened toward reconstructing x on some contexts.
    for (int k = 0; k < 6; ++k) {
      const auto ys = v.tokenize(word(1), TokenScheme::Char);
      fill_rows(phi, rng, tg, ys, xs, 4.0 * rng.uniform());
    }
    const auto judge = snapshot(phi);
    RewardConfig rc;
    rc.checker = FormatChecker::NonEmpty;
    rc.copy_guard = true;
    rc.alpha = 2.0 * std::log(static_cast<double>(v.size()));
    const double copy = total_reward(judge, xs, xs, tg, x, x, rc);
    for (int k = 0; k < 8 && compared < 1000; ++k) {
      const std::string y = word(1);
      if (y == x) continue;
      const auto ys = v.tokenize(y, TokenScheme::Char);
      if (roundtrip_reward(judge, xs, ys, tg) < -std::log(static_cast<double>(v.size()))) {
        ++skipped;
        continue;
      }
      const double good = total_reward(judge, xs, ys, tg, x, y, rc);
      ++compared;
      min_gap = std::min(min_gap, good - copy);
      if (!(copy < good)) ++violations;
    }
  }
  return {violations == 0, fmt("%d copy-vs-valid comparisons, %d violations, min margin %.3f (%d candidates below "
                               "-ln V skipped)",
                               compared, violations, min_gap, skipped)};
}

// Toy runs share one setup; criterion 10 reuses the criterion 7 policy.
struct ToyState {
  toy::Setup setup;
  toy::Scores base;
  std::optional<PolicyParams> rtrl;
  toy::Scores rtrl_scores;
};

ToyState& toy_state() {
  static ToyState s{toy::make(), {}, std::nullopt, {}};
  static bool init = false;
  if (!init) {
    s.base = toy::score(s.setup, s.setup.base);
    init = true;
  }
  return s;
}

Outcome c7_rtrl() {
  auto& st = toy_state();
  const auto& s = st.setup;
  PolicyParams theta = s.base;
  std::vector<double> rewards;
  TrainHooks hooks;
  hooks.on_step = [&](const StepStats& x, std::string_view) { rewards.push_back(x.mean_reward); };
  RunConfig cfg = s.cfg;
  cfg.threads = 1;
  const TrainContext ctx{s.vocab, s.pair, cfg, hooks};
  const auto t0 = Clock::now();
  rtrl_train(theta, s.x, ctx);
  const double train_s = seconds_since(t0);
  st.rtrl_scores = toy::score(s, theta);
  st.rtrl = theta;

  // 50-step moving average of the per-step mean reward.
  double max_drop = 0.0, first = 0.0, last = 0.0;
  for (std::size_t i = 50; i <= rewards.size(); ++i) {
    const double ma = std::accumulate(rewards.begin() + long(i - 50), rewards.begin() + long(i), 0.0) / 50.0;
    if (i == 50) first = ma;
    if (i > 50) max_drop = std::max(max_drop, last - ma);
    last = ma;
  }
  const double gain = st.rtrl_scores.roundtrip - st.base.roundtrip;
  const bool ok = gain >= 0.20 && train_s <= 300.0 && rewards.size() == 500;
  std::printf("              reward MA50 %.4f -> %.4f, largest MA50 decrease %.2e\n", first, last, max_drop);
  return {ok, fmt("round-trip EM %.3f -> %.3f (gain %+.1f pts, need >= 20); train %.1fs", st.base.roundtrip,
                  st.rtrl_scores.roundtrip, 100.0 * gain, train_s)};
}

Outcome c8_iterative() {
  auto& st = toy_state();
  const auto& s = st.setup;
  PolicyParams theta = s.base;
  const TrainContext ctx{s.vocab, s.pair, s.cfg, {}};
  const auto r = iterative_rtrl(theta, take(s.x, toy::kUnlabeled / 2), s.y_other, ctx);
  const auto after = toy::score(s, theta);
  const bool ok = r.phases_run == 2 && after.forward >= st.base.forward && after.backward >= st.base.backward;
  return {ok, fmt("forward EM %.3f -> %.3f, backward EM %.3f -> %.3f", st.base.forward, after.forward,
                  st.base.backward, after.backward)};
}

Outcome c9_selfplay() {
  auto& st = toy_state();
  const auto& s = st.setup;
  PolicyParams theta = s.base;
  const TrainContext ctx{s.vocab, s.pair, s.cfg, {}};
  const auto r = selfplay_rtrl(theta, s.x, ctx);
  const auto after = toy::score(s, theta);
  std::string surv;
  for (double x : r.survival_rates) surv += fmt("%s%.3f", surv.empty() ? "" : ", ", x);
  const bool ok = after.forward >= st.base.forward && after.backward >= st.base.backward;
  return {ok, fmt("forward EM %.3f -> %.3f, backward EM %.3f -> %.3f; filter survival [%s]", st.base.forward,
                  after.forward, st.base.backward, after.backward, surv.c_str())};
}

Outcome c10_baselines() {
  auto& st = toy_state();
  const auto& s = st.setup;
  if (!st.rtrl) return {false, "criterion 7 run unavailable"};
  const TrainContext ctx{s.vocab, s.pair, s.cfg, {}};
  PolicyParams em = s.base, out = s.base, in = s.base;
  em_train(em, s.x, ctx);
  sft_synthetic_output(out, s.x, ctx);
  sft_synthetic_input(in, s.y, ctx);
  const double r = st.rtrl_scores.forward;
  const double e = toy::score(s, em).forward, o = toy::score(s, out).forward, i = toy::score(s, in).forward;
  const bool ok = r >= e && r >= o && r >= i;
  return {ok, fmt("forward EM: rtrl %.3f, em %.3f, sft-syn-out %.3f, sft-syn-in %.3f", r, e, o, i)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  std::vector<std::string> full{"rtrl"};
  full.insert(full.end(), args.begin(), args.end());
  const int rc = run_cli(full, out, err);
  if (rc != 0) throw std::runtime_error("cli failed: " + err.str());
  return rc;
}

// Every regular file under `dir`, relative path -> bytes.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

Outcome c11_determinism() {
  const fs::path root = fs::temp_directory_path() / "rtrl_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string data = (root / "data").string();
  cli({"gen-data", "--kind", "cipher", "--n", "120", "--seed", "3", "--alphabet", "8", "--max-len", "6", "--out", data});
  const std::string x = data + "/x.jsonl", y = data + "/y.jsonl";
  const std::vector<std::string> common{"--set", "train_path=" + x, "--set", "eval_path=" + x, "--set", "order=1",
                                        "--set", "steps=12",         "--set", "groups_per_step=4", "--set",
                                        "group_size=4", "--set", "max_len=10", "--set", "seed=5", "--set",
                                        "eval_decoding=sample", "--set", "sft_epochs=3"};
  cli([&] {
    auto a = std::vector<std::string>{"train", "--regime", "sft", "--out", (root / "warm").string()};
    a.insert(a.end(), common.begin(), common.end());
    return a;
  }());
  const std::string warm = (root / "warm/checkpoints/final.json").string();

  int compared = 0;
  std::vector<std::string> differing;
  for (const std::string regime : {"rtrl", "iterative", "supervised", "selfplay", "em", "sft-syn-out", "sft-syn-in"}) {
    std::map<std::string, std::string> runs[2];
    for (int k = 0; k < 2; ++k) {
      const auto dir = root / (regime + "-" + std::to_string(k));
      std::vector<std::string> a{"train", "--regime", regime, "--out", dir.string(), "--set",
                                 "init_checkpoint=" + warm, "--set", "unpaired_path=" + y};
      a.insert(a.end(), common.begin(), common.end());
      cli(a);
      runs[k] = tree(dir);
    }
    if (runs[0] != runs[1] || runs[0].count("steps.jsonl") == 0 || runs[0].count("reports/roundtrip.json") == 0)
      differing.push_back(regime);
    ++compared;
  }
  for (const std::string mode : {"roundtrip", "task"}) {
    std::map<std::string, std::string> evals[2];
    for (int k = 0; k < 2; ++k) {
      const auto dir = root / ("eval-" + mode + "-" + std::to_string(k));
      cli({"eval", "--checkpoint", (root / "rtrl-0/checkpoints/final.json").string(), "--data", x, "--mode", mode,
           "--decoding", "sample", "--seed", "9", "--out", dir.string()});
      evals[k] = tree(dir);
    }
    if (evals[0] != evals[1] || evals[0].empty()) differing.push_back("eval " + mode);
    ++compared;
  }
  fs::remove_all(root);
  std::string which;
  for (const auto& d : differing) which += " " + d;
  return {differing.empty(), fmt("%d commands run twice (7 training regimes + 2 eval modes), byte-identical run "
                                 "directories; differing:%s",
                                 compared, differing.empty() ? " none" : which.c_str())};
}

}  // namespace

int main() {
  report(1, "advantage normalization", c1_advantages);
  report(2, "log-prob gradients", c2_gradients);
  report(3, "GRPO degenerate cases", c3_grpo_degenerate);
  report(4, "metric oracles", c4_metrics);
  report(5, "SMILES parser suite", c5_parser);
  report(6, "reward-hacking guard", c6_reward_guard);
  report(7, "self-supervised RTRL", c7_rtrl);
  report(8, "iterative RTRL", c8_iterative);
  report(9, "self-play RTRL", c9_selfplay);
  report(10, "baseline ordering", c10_baselines);
  report(11, "determinism", c11_determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
