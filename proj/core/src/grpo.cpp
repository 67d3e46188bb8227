#include "rtrl/grpo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace rtrl {

void GrpoConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("grpo: group_size must be >= 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("grpo: clip_eps must lie in (0, 1)");
  if (kl_beta < 0.0) throw std::invalid_argument("grpo: kl_beta must be >= 0");
  if (eps_norm < 0.0) throw std::invalid_argument("grpo: eps_norm must be >= 0");
  if (learning_rate < 0.0) throw std::invalid_argument("grpo: learning_rate must be >= 0");
  if (inner_epochs < 1) throw std::invalid_argument("grpo: inner_epochs must be >= 1");
  if (groups_per_step < 1) throw std::invalid_argument("grpo: groups_per_step must be >= 1");
}

std::vector<double> normalize_advantages(std::span<const double> rewards, double eps_norm) {
  if (rewards.size() < 2) throw std::invalid_argument("normalize_advantages: need at least two rewards");
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out;
  out.reserve(rewards.size());
  const double denom = sd + eps_norm;
  for (double r : rewards) out.push_back(denom > 0.0 ? (r - mean) / denom : 0.0);
  return out;
}

void normalize_group(RolloutGroup& group, double eps_norm) {
  std::vector<double> r;
  for (const auto& c : group.completions) r.push_back(c.reward);
  const auto a = normalize_advantages(r, eps_norm);
  for (std::size_t i = 0; i < a.size(); ++i) group.completions[i].advantage = a[i];
  group.normalized = true;
}

namespace {

struct PositionDist {
  ContextKey key;
  std::vector<double> p;
};

}  // namespace

GrpoLoss grpo_loss(const PolicyParams& theta, const PolicySnapshot& theta_old, std::span<const RolloutGroup> groups,
                   const GrpoConfig& cfg, const PolicyParams* kl_reference) {
  const PolicyParams& ref = kl_reference ? *kl_reference : theta_old.params();
  GrpoLoss out;
  out.grad = GradAccumulator(theta.vocab_size());
  std::size_t n = 0;
  for (const auto& g : groups) {
    if (!g.normalized) throw std::invalid_argument("grpo_loss: group advantages not normalized");
    n += g.completions.size();
  }
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::size_t clipped = 0;

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    for (std::size_t ci = 0; ci < g.completions.size(); ++ci) {
      const auto& c = g.completions[ci];
      const auto lp = sequence_logprob(theta, g.tag, g.input, c.tokens, c.terminated);
      const double ratio = std::exp(lp.total - c.old_logprob);
      const double a = c.advantage;
      const double unclipped = ratio * a;
      const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
      const double clipped_term = clipped_ratio * a;
      const bool clip_active = clipped_term < unclipped;
      const double term = clip_active ? clipped_term : unclipped;

      // Exact categorical KL per teacher-forced position.
      const std::size_t steps = c.tokens.size() + (c.terminated ? 1 : 0);
      double kl = 0.0;
      std::vector<PositionDist> dists;
      std::vector<double> kls;
      if (steps > 0) {
        for (std::size_t t = 0; t < steps; ++t) {
          const auto key = theta.context(g.tag, g.input, c.tokens, t);
          auto p = next_token_dist(theta, key);
          const auto q = next_token_dist(ref, key);
          double k = 0.0;
          for (std::size_t j = 0; j < p.size(); ++j)
            if (p[j] > 0.0) k += p[j] * (std::log(p[j]) - std::log(q[j]));
          kls.push_back(k);
          kl += k;
          dists.push_back({key, std::move(p)});
        }
        kl /= static_cast<double>(steps);
      }

      if (!std::isfinite(ratio) || !std::isfinite(term) || !std::isfinite(kl)) {
        throw std::domain_error("grpo_loss: non-finite value in group " + std::to_string(gi) + ", completion " +
                                std::to_string(ci));
      }

      out.policy_term += term * inv_n;
      out.kl += kl * inv_n;
      out.loss += (-term + cfg.kl_beta * kl) * inv_n;
      if (clip_active) ++clipped;

      if (!clip_active && a != 0.0)
        accumulate_logprob_grad(theta, g.tag, g.input, c.tokens, c.terminated, -a * ratio * inv_n, out.grad);

      if (cfg.kl_beta > 0.0 && steps > 0) {
        const double w = cfg.kl_beta * inv_n / static_cast<double>(steps);
        for (std::size_t t = 0; t < dists.size(); ++t) {
          const auto& p = dists[t].p;
          const auto q = next_token_dist(ref, dists[t].key);
          std::vector<double> d(p.size());
          for (std::size_t j = 0; j < p.size(); ++j)
            d[j] = p[j] > 0.0 ? p[j] * (std::log(p[j]) - std::log(q[j]) - kls[t]) : 0.0;
          out.grad.add(dists[t].key, d, w);
        }
      }
    }
  }
  out.clip_fraction = static_cast<double>(clipped) * inv_n;
  return out;
}

std::string StepStats::to_json_line() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["mean_reward"] = mean_reward;
  j["mean_abs_advantage"] = mean_abs_advantage;
  j["clip_fraction"] = clip_fraction;
  j["kl"] = kl;
  j["loss"] = loss;
  j["completions"] = completions;
  return j.dump();
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

std::vector<RolloutGroup> collect_rollouts(const PolicyParams& theta_old, std::span<const SourceItem> batch,
                                           const RewardFn& reward, const GrpoConfig& cfg,
                                           const SamplerConfig& sampler, const RolloutOptions& opts,
                                           std::uint64_t step) {
  std::vector<RolloutGroup> groups(batch.size());
  parallel_for(batch.size(), opts.threads, [&](std::size_t b) {
    RolloutGroup& g = groups[b];
    g.input = batch[b].tokens;
    g.input_text = batch[b].text;
    g.tag = opts.forward_tag;
    g.completions.resize(static_cast<std::size_t>(cfg.group_size));
    for (std::size_t k = 0; k < g.completions.size(); ++k) {
      Rng rng = Rng::stream(sampler.seed, {step, b, k});
      auto gen = sample_sequence(theta_old, g.tag, g.input, sampler, opts.max_len, rng);
      Completion& c = g.completions[k];
      c.tokens = std::move(gen.tokens);
      c.terminated = gen.terminated;
      c.text = opts.detokenize ? opts.detokenize(c.tokens) : std::string();
      auto lp = sequence_logprob(theta_old, g.tag, g.input, c.tokens, c.terminated);
      c.old_logprobs = std::move(lp.per_token);
      c.old_logprob = lp.total;
      c.reward = reward(g, c);
    }
    normalize_group(g, cfg.eps_norm);
  });
  return groups;
}

StepStats train_step(PolicyParams& theta, std::span<const SourceItem> batch, const RewardFn& reward,
                     const GrpoConfig& cfg, const SamplerConfig& sampler, const RolloutOptions& opts) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  cfg.validate();
  const std::uint64_t step = theta.steps();
  const PolicySnapshot old = snapshot(theta);
  const auto groups = collect_rollouts(old.params(), batch, reward, cfg, sampler, opts, step);

  const PolicyParams* ref = cfg.kl_reference == KlReference::Initial ? opts.kl_reference : nullptr;
  if (cfg.kl_reference == KlReference::Initial && !ref)
    throw std::invalid_argument("train_step: kl_reference=initial needs a reference policy");

  StepStats stats;
  for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
    auto loss = grpo_loss(theta, old, groups, cfg, ref);
    stats.loss = loss.loss;
    stats.kl = loss.kl;
    stats.clip_fraction = loss.clip_fraction;
    if (cfg.learning_rate > 0.0) {
      loss.grad.scale(-1.0);  // apply_update ascends
      apply_update(theta, loss.grad, cfg.learning_rate);
    }
  }
  theta.set_steps(step + 1);

  for (const auto& g : groups) {
    for (const auto& c : g.completions) {
      stats.mean_reward += c.reward;
      stats.mean_abs_advantage += std::abs(c.advantage);
      ++stats.completions;
    }
  }
  stats.mean_reward /= static_cast<double>(stats.completions);
  stats.mean_abs_advantage /= static_cast<double>(stats.completions);
  stats.step = theta.steps();
  return stats;
}

}  // namespace rtrl
