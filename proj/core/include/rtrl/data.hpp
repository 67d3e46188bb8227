#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rtrl/domain.hpp"

namespace rtrl {

struct PairRecord {
  std::string input;
  std::optional<std::string> output;
  std::map<std::string, std::string> meta;

  bool operator==(const PairRecord&) const = default;
};

struct Dataset {
  std::vector<PairRecord> records;
  DomainKind source = DomainKind::Symbol;
  DomainKind target = DomainKind::Symbol;
  bool labeled = false;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  std::vector<std::string> inputs() const;
  /// Throws if unlabeled.
  std::vector<std::string> outputs() const;
  /// Same inputs, labels dropped.
  Dataset without_labels() const;
  /// Input and output exchanged; requires labels.
  Dataset swapped() const;
  /// Throws std::invalid_argument on empty inputs or a mixed labeled flag.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

class DataError : public std::runtime_error {
 public:
  DataError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// One JSON object per line: {"input": ..., "output": ..., "meta": {...}}.
/// Blank lines are skipped. Line numbers in errors are 1-based.
Dataset parse_jsonl(std::istream& in);
void write_jsonl(const Dataset& d, std::ostream& out);

/// Reads `path` and, when present, its "<path>.meta.json" sidecar.
Dataset load_jsonl(const std::filesystem::path& path);
/// Writes `path` and the sidecar.
void save_jsonl(const Dataset& d, const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

struct DatasetSplit {
  Dataset train, valid, test;
};

/// Seeded shuffle, then contiguous cut. Sizes are floor(f * n) for train and
/// valid; test takes the remainder.
DatasetSplit split(const Dataset& d, std::array<double, 3> fractions, std::uint64_t seed);

/// First n records (all if n >= size).
Dataset take(const Dataset& d, std::size_t n);

// ---------------------------------------------------------------------------
// Toy cipher

struct CipherTask {
  Dataset x;  // input = plain string, output = sigma(plain)
  Dataset y;  // input = sigma(plain), output = plain
  std::string alphabet;
  std::vector<int> sigma;  // index into alphabet -> index into alphabet

  std::string encode(std::string_view plain) const;
  std::string decode(std::string_view cipher) const;
};

/// Draws a fixed-point-free bijection over the first `alphabet_size` letters
/// of a..zA..Z and n distinct random strings of length [min_len, max_len].
CipherTask gen_cipher_task(std::uint64_t seed, std::size_t n, int alphabet_size, int max_len, int min_len = 4);

/// Label noise on outputs. Each character is replaced by a uniformly drawn
/// alphabet character (possibly itself) with probability `substitute`; each
/// output then gains 1..max_append random trailing characters with
/// probability `append`.
struct NoiseConfig {
  double substitute = 0.0;
  double append = 0.0;
  int max_append = 2;
};

Dataset corrupt_outputs(const Dataset& d, std::string_view alphabet, const NoiseConfig& noise, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Toy reactions

enum class ReactionTemplate {
  HalideToAlcohol,  // R-X + O -> R-OH
  Esterification,   // R-OH + R'C(=O)O -> R'C(=O)OR
  Hydrogenation,    // C=C + [H][H] -> C-C
};

std::string_view to_string(ReactionTemplate t);
ReactionTemplate parse_reaction_template(std::string_view s);
std::vector<ReactionTemplate> default_templates();

/// Applies a template to parsed reactant graphs; returns the canonical
/// product or nothing when the reactants do not match the template.
std::optional<std::string> apply_template(ReactionTemplate t, const std::vector<std::string>& reactants);

/// Labeled dataset: input = dot-joined reactants, output = one product.
/// Inputs are unique. Throws after a bounded number of failed attempts.
Dataset gen_toy_reactions(std::uint64_t seed, std::size_t n, const std::vector<ReactionTemplate>& templates);

}  // namespace rtrl
