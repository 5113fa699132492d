#pragma once

// Slow, direct implementations used only to cross-check the library. They
// follow the textbook definitions with explicit loops and share no code with
// core/ beyond the tokenizer.

#include <cstddef>
#include <string>
#include <vector>

#include "spot/corpus.hpp"

namespace spot::oracle {

// Nominal alpha from the pairable-value definition: observed disagreement
// over within-item ordered pairs (weighted 1/(m_u - 1)), expected
// disagreement over every ordered pair of pairable values in the data.
double krippendorff_alpha(const AnnotationSet& annotations);

double rouge_n(const std::string& candidate, const std::string& reference, int n);
double bleu(const std::string& candidate, const std::string& reference, int max_n);

// Per-class F1 by counting, weighted by gold support.
double weighted_f1(const std::vector<int>& preds, const std::vector<int>& golds, int num_classes);

// Full scan, strict < so the first minimum wins.
std::size_t nearest(const std::vector<double>& z, const std::vector<std::vector<double>>& centroids);

}  // namespace spot::oracle
