#include "rtrl/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rtrl {

void SamplerConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw std::invalid_argument("sampler: temperature must be positive");
  if (top_k < 1) throw std::invalid_argument("sampler: top_k must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("sampler: top_p must lie in (0, 1]");
}

std::vector<double> cut_distribution(std::span<const double> probs, const SamplerConfig& cfg) {
  cfg.validate();
  const std::size_t n = probs.size();
  double mass = 0.0;
  double max_log = -std::numeric_limits<double>::infinity();
  for (double p : probs) {
    if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("sample_categorical: invalid probability");
    mass += p;
    if (p > 0.0) max_log = std::max(max_log, std::log(p));
  }
  if (mass <= 0.0) throw std::invalid_argument("sample_categorical: all-zero distribution");
  if (std::abs(mass - 1.0) > 1e-9)
    throw std::invalid_argument("sample_categorical: probabilities sum to " + std::to_string(mass));

  std::vector<double> tempered(n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (probs[i] > 0.0) {
      tempered[i] = std::exp((std::log(probs[i]) - max_log) / cfg.temperature);
      z += tempered[i];
    }
  }
  for (double& t : tempered) t /= z;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return tempered[a] > tempered[b]; });

  std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), n);
  while (keep > 0 && tempered[order[keep - 1]] <= 0.0) --keep;

  double kept_mass = 0.0;
  for (std::size_t i = 0; i < keep; ++i) kept_mass += tempered[order[i]];

  // Prefix mass is measured on the top-k renormalized distribution.
  constexpr double kMassSlack = 1e-12;
  double cum = 0.0;
  std::size_t prefix = keep;
  for (std::size_t i = 0; i < keep; ++i) {
    cum += tempered[order[i]] / kept_mass;
    if (cum >= cfg.top_p - kMassSlack) {
      prefix = i + 1;
      break;
    }
  }

  std::vector<double> out(n, 0.0);
  double cut_mass = 0.0;
  for (std::size_t i = 0; i < prefix; ++i) cut_mass += tempered[order[i]];
  for (std::size_t i = 0; i < prefix; ++i) out[order[i]] = tempered[order[i]] / cut_mass;
  return out;
}

TokenId sample_categorical(std::span<const double> probs, const SamplerConfig& cfg, Rng& rng) {
  const auto cut = cut_distribution(probs, cfg);
  if (cfg.top_k == 1) {
    // Single-element support; no draw so the stream is left untouched.
    for (std::size_t i = 0; i < cut.size(); ++i)
      if (cut[i] > 0.0) return static_cast<TokenId>(i);
  }
  const double u = rng.uniform();
  double cum = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < cut.size(); ++i) {
    if (cut[i] <= 0.0) continue;
    last = i;
    cum += cut[i];
    if (u < cum) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last);
}

}  // namespace rtrl
