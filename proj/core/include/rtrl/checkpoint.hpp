#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rtrl/policy.hpp"
#include "rtrl/vocab.hpp"

namespace rtrl {

inline constexpr int kCheckpointVersion = 1;

/// A policy together with the vocabulary (and task registry) it was trained on.
struct Checkpoint {
  Vocab vocab;
  PolicyParams params;
};

/// JSON container: format tag, version, order, steps, ordinary tokens,
/// reserved token order, task registry, vocabulary fingerprint and the logit
/// rows sorted by context key. Serialization is canonical, so
/// write -> read -> write is byte-identical.
std::string serialize_checkpoint(const Vocab& vocab, const PolicyParams& params);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Vocab& vocab, const PolicyParams& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace rtrl
