#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rtrl/rng.hpp"
#include "rtrl/vocab.hpp"

namespace rtrl {

struct SamplerConfig {
  double temperature = 0.9;
  int top_k = 40;
  double top_p = 0.9;
  std::uint64_t seed = 0;

  /// Greedy decoding: top_k = 1, ties to the lowest id.
  static SamplerConfig greedy(std::uint64_t seed = 0) { return {1.0, 1, 1.0, seed}; }

  void validate() const;
};

/// The renormalized distribution actually sampled from: probabilities are
/// tempered (log p / T, renormalized), cut to the top_k most likely ids, then
/// to the shortest descending-probability prefix whose mass reaches top_p.
/// Ordering ties are broken toward the lower id. Excluded ids get exactly 0.
std::vector<double> cut_distribution(std::span<const double> probs, const SamplerConfig& cfg);

TokenId sample_categorical(std::span<const double> probs, const SamplerConfig& cfg, Rng& rng);

}  // namespace rtrl
