#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtrl/chem/molecule.hpp"
#include "rtrl/domain.hpp"

namespace rtrl::metrics {

using Tokens = std::vector<std::string>;

/// One token per character.
Tokens char_tokens(std::string_view s);

/// Sentence BLEU with uniform weights over 1..max_n, clipped precisions and
/// brevity penalty. Zero higher-order (n >= 2) precisions are smoothed to
/// 1 / (total_n + 1); a zero unigram precision gives 0.
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference, int max_n = 4);

/// ROUGE-N F1 from clipped n-gram overlap.
double rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, int n);
/// ROUGE-L F1 from the longest common subsequence.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Exact-match unigram alignment with the maximum number of matches and,
/// among those, the fewest chunks.
MeteorAlignment meteor_align(std::span<const std::string> candidate, std::span<const std::string> reference);

/// F_mean = 10PR/(R+9P), penalty = 0.5 (chunks/matches)^3.
double meteor_exact(std::span<const std::string> candidate, std::span<const std::string> reference);

/// Unit-cost character edit distance.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// 1 if pred and label denote the same thing for this kind, else 0.
int exact_match(std::string_view pred, std::string_view label, DomainKind kind);

/// Every dot component (or reaction field component) parses.
bool is_valid_chemistry(std::string_view text);
double validity_rate(std::span<const std::string> preds);

/// Frechet distance between diagonal Gaussians fitted (population moments)
/// to two sets of feature vectors.
double frechet_distance(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);
/// Same over descriptor_vector features; both sets need >= 2 molecules.
double frechet_descriptor_distance(std::span<const chem::Molecule> a, std::span<const chem::Molecule> b);

/// Ordered metric name -> value, plus counts.
class MetricsReport {
 public:
  MetricsReport() = default;
  explicit MetricsReport(std::string kind) : kind_(std::move(kind)) {}

  void set(const std::string& name, double value);
  double get(const std::string& name) const;
  bool has(const std::string& name) const;
  const std::vector<std::pair<std::string, double>>& values() const noexcept { return values_; }
  const std::string& kind() const noexcept { return kind_; }

  std::size_t n = 0;
  std::size_t n_valid = 0;

  std::string to_json() const;
  static MetricsReport from_json(std::string_view text);
  std::string csv_header() const;
  std::string csv_row() const;

 private:
  std::string kind_;
  std::vector<std::pair<std::string, double>> values_;
};

using PredLabel = std::pair<std::string, std::string>;

/// bleu (char, 4-gram), levenshtein (mean), exact_match, circular_sim (r=2),
/// path_sim, circular_r1_sim, fd_descriptor, validity. Invalid predictions
/// count as 0 similarity and contribute a zero descriptor vector.
MetricsReport evaluate_molecule_task(std::span<const PredLabel> pairs);
/// bleu2, bleu4, rouge1, rouge2, rougeL, meteor over whitespace tokens.
MetricsReport evaluate_text_task(std::span<const PredLabel> pairs);
/// exact_match, bleu (char, 4-gram), levenshtein (mean).
MetricsReport evaluate_symbol_task(std::span<const PredLabel> pairs);
MetricsReport evaluate(DomainKind kind, std::span<const PredLabel> pairs);

}  // namespace rtrl::metrics
