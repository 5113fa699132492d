#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spot/corpus.hpp"

namespace spot {

struct BinaryScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Positive-class precision/recall/F1. Any 0/0 ratio is 0. Throws UsageError
// on length mismatch or empty input.
BinaryScores prf1(std::span<const bool> preds, std::span<const bool> golds);
BinaryScores prf1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn = 0);

struct ClassScores {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MultiClassScores {
  std::vector<ClassScores> per_class;
  double weighted_f1 = 0.0;
};

// Labels are indices in [0, num_classes). A prediction may be nullopt (the
// item never received one); it then counts as a miss for its gold class and
// as a false positive for no class.
MultiClassScores multiclass_scores(std::span<const std::optional<std::size_t>> preds,
                                   std::span<const std::size_t> golds,
                                   std::span<const std::string> labels);

// Support-weighted mean of per-class F1 over the five persona types.
double weighted_f1(std::span<const PersonaType> preds, std::span<const PersonaType> golds);

struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::size_t> counts;  // row-major [true][predicted]

  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts[truth * labels.size() + predicted];
  }
  std::size_t total() const;
  std::vector<std::size_t> row_sums() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

// counts[i][j] = #{gold = labels[i] and pred = labels[j]}. Throws UsageError
// on length mismatch or a value missing from labels.
ConfusionMatrix confusion(std::span<const std::string> preds, std::span<const std::string> golds,
                          std::span<const std::string> labels);

// Recall-oriented n-gram overlap: clipped matches / reference n-gram count.
// Throws UsageError when the reference has no tokens; a reference shorter
// than n scores 0.
double rouge_n(const std::string& candidate, const std::string& reference, int n);

inline constexpr double kBleuEpsilon = 1e-9;

// Sentence BLEU: geometric mean of modified n-gram precisions 1..max_n times
// the brevity penalty. A zero precision is replaced by kBleuEpsilon. Throws
// UsageError when either side has no tokens.
double bleu(const std::string& candidate, const std::string& reference, int max_n);

struct GenerationScores {
  double rouge1 = 0.0, rouge2 = 0.0;
  double bleu1 = 0.0, bleu2 = 0.0, bleu3 = 0.0;
  std::size_t count = 0;
};

// Per-pair scores; an empty candidate scores 0 on every metric.
GenerationScores score_generation(const std::string& candidate, const std::string& reference);
// Arithmetic mean over pairs; all zeros for no pairs.
GenerationScores mean_generation_scores(std::span<const std::string> candidates,
                                        std::span<const std::string> references);

}  // namespace spot
