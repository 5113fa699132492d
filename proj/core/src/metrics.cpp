#include "spot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "spot/error.hpp"
#include "spot/text.hpp"

namespace spot {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

using NGramCounts = std::map<std::vector<std::string>, std::size_t>;

NGramCounts ngrams(const std::vector<std::string>& tokens, int n) {
  NGramCounts counts;
  const auto un = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + un))];
  }
  return counts;
}

std::size_t clipped_matches(const NGramCounts& candidate, const NGramCounts& reference) {
  std::size_t m = 0;
  for (const auto& [gram, c] : candidate) {
    auto it = reference.find(gram);
    if (it != reference.end()) m += std::min(c, it->second);
  }
  return m;
}

std::size_t total(const NGramCounts& c) {
  std::size_t n = 0;
  for (const auto& [g, k] : c) n += k;
  return n;
}

}  // namespace

BinaryScores prf1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  BinaryScores s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.tn = tn;
  s.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp));
  s.recall = ratio(static_cast<double>(tp), static_cast<double>(tp + fn));
  s.f1 = f1_of(s.precision, s.recall);
  return s;
}

BinaryScores prf1(std::span<const bool> preds, std::span<const bool> golds) {
  if (preds.size() != golds.size()) throw UsageError("prf1: prediction and gold lengths differ");
  if (preds.empty()) throw UsageError("prf1: no items");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] && golds[i]) ++tp;
    else if (preds[i]) ++fp;
    else if (golds[i]) ++fn;
    else ++tn;
  }
  return prf1_from_counts(tp, fp, fn, tn);
}

MultiClassScores multiclass_scores(std::span<const std::optional<std::size_t>> preds,
                                   std::span<const std::size_t> golds,
                                   std::span<const std::string> labels) {
  if (preds.size() != golds.size()) throw UsageError("multiclass: prediction and gold lengths differ");
  if (preds.empty()) throw UsageError("multiclass: no items");
  const std::size_t k = labels.size();
  std::vector<std::size_t> tp(k, 0), pred_count(k, 0), support(k, 0);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] >= k || (preds[i] && *preds[i] >= k)) throw UsageError("multiclass: label out of range");
    ++support[golds[i]];
    if (preds[i]) {
      ++pred_count[*preds[i]];
      if (*preds[i] == golds[i]) ++tp[golds[i]];
    }
  }
  MultiClassScores out;
  double weighted = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    ClassScores cs;
    cs.label = labels[c];
    cs.precision = ratio(static_cast<double>(tp[c]), static_cast<double>(pred_count[c]));
    cs.recall = ratio(static_cast<double>(tp[c]), static_cast<double>(support[c]));
    cs.f1 = f1_of(cs.precision, cs.recall);
    cs.support = support[c];
    weighted += static_cast<double>(support[c]) * cs.f1;
    out.per_class.push_back(std::move(cs));
  }
  out.weighted_f1 = weighted / static_cast<double>(golds.size());
  return out;
}

double weighted_f1(std::span<const PersonaType> preds, std::span<const PersonaType> golds) {
  if (preds.size() != golds.size()) throw UsageError("weighted_f1: prediction and gold lengths differ");
  std::vector<std::optional<std::size_t>> p;
  std::vector<std::size_t> g;
  for (auto t : preds) p.emplace_back(index_of(t));
  for (auto t : golds) g.push_back(index_of(t));
  std::vector<std::string> labels;
  for (auto t : kAllPersonaTypes) labels.emplace_back(to_string(t));
  return multiclass_scores(p, g, labels).weighted_f1;
}

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

std::vector<std::size_t> ConfusionMatrix::row_sums() const {
  const std::size_t k = labels.size();
  std::vector<std::size_t> out(k, 0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i] += counts[i * k + j];
  return out;
}

ConfusionMatrix confusion(std::span<const std::string> preds, std::span<const std::string> golds,
                          std::span<const std::string> labels) {
  if (preds.size() != golds.size()) throw UsageError("confusion: prediction and gold lengths differ");
  ConfusionMatrix m;
  m.labels.assign(labels.begin(), labels.end());
  const std::size_t k = labels.size();
  m.counts.assign(k * k, 0);
  auto index = [&](const std::string& v) {
    auto it = std::find(labels.begin(), labels.end(), v);
    if (it == labels.end()) throw UsageError("confusion: unknown label '" + v + "'");
    return static_cast<std::size_t>(it - labels.begin());
  };
  for (std::size_t i = 0; i < preds.size(); ++i) ++m.counts[index(golds[i]) * k + index(preds[i])];
  return m;
}

double rouge_n(const std::string& candidate, const std::string& reference, int n) {
  if (n < 1) throw UsageError("rouge_n: n must be positive");
  const auto ref_tokens = tokenize(reference);
  if (ref_tokens.empty()) throw UsageError("rouge_n: empty reference");
  const auto ref = ngrams(ref_tokens, n);
  const auto ref_total = total(ref);
  if (ref_total == 0) return 0.0;
  const auto cand = ngrams(tokenize(candidate), n);
  return static_cast<double>(clipped_matches(cand, ref)) / static_cast<double>(ref_total);
}

double bleu(const std::string& candidate, const std::string& reference, int max_n) {
  if (max_n < 1) throw UsageError("bleu: max_n must be positive");
  const auto cand_tokens = tokenize(candidate);
  const auto ref_tokens = tokenize(reference);
  if (cand_tokens.empty()) throw UsageError("bleu: empty candidate");
  if (ref_tokens.empty()) throw UsageError("bleu: empty reference");
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto cand = ngrams(cand_tokens, n);
    const auto cand_total = total(cand);
    double p = cand_total == 0 ? 0.0
                               : static_cast<double>(clipped_matches(cand, ngrams(ref_tokens, n))) /
                                     static_cast<double>(cand_total);
    if (p == 0.0) p = kBleuEpsilon;
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand_tokens.size());
  const double r = static_cast<double>(ref_tokens.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

GenerationScores score_generation(const std::string& candidate, const std::string& reference) {
  GenerationScores s;
  s.count = 1;
  if (tokenize(candidate).empty()) return s;
  s.rouge1 = rouge_n(candidate, reference, 1);
  s.rouge2 = rouge_n(candidate, reference, 2);
  s.bleu1 = bleu(candidate, reference, 1);
  s.bleu2 = bleu(candidate, reference, 2);
  s.bleu3 = bleu(candidate, reference, 3);
  return s;
}

GenerationScores mean_generation_scores(std::span<const std::string> candidates,
                                        std::span<const std::string> references) {
  if (candidates.size() != references.size()) throw UsageError("generation: length mismatch");
  GenerationScores mean;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto s = score_generation(candidates[i], references[i]);
    mean.rouge1 += s.rouge1;
    mean.rouge2 += s.rouge2;
    mean.bleu1 += s.bleu1;
    mean.bleu2 += s.bleu2;
    mean.bleu3 += s.bleu3;
  }
  mean.count = candidates.size();
  if (mean.count > 0) {
    const auto n = static_cast<double>(mean.count);
    mean.rouge1 /= n;
    mean.rouge2 /= n;
    mean.bleu1 /= n;
    mean.bleu2 /= n;
    mean.bleu3 /= n;
  }
  return mean;
}

}  // namespace spot
