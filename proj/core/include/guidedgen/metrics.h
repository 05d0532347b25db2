// Copyright 2026 The guidedgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Generation and classifier metrics.

#ifndef GUIDEDGEN_METRICS_H_
#define GUIDEDGEN_METRICS_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "guidedgen/corpus.h"

namespace guidedgen {

// Jaccard similarity of the token sets; two empty sequences give 1.
double jaccard(std::span<const TokenId> a, std::span<const TokenId> b);

// mean_i (1 - max_{j != i} jaccard(s_i, s_j)). Needs at least 2 sentences.
double diversity(std::span<const TokenSequence> sentences);

// mean_i (1 - max_j jaccard(s_i, reference_j)). Needs a non-empty reference.
double novelty(std::span<const TokenSequence> sentences,
               std::span<const TokenSequence> reference);

// Corpus BLEU over unigrams and bigrams with one reference per hypothesis,
// unsmoothed, with the standard brevity penalty, on a 0-100 scale.
double bleu2(std::span<const TokenSequence> hypotheses,
             std::span<const TokenSequence> references);

struct ClassifierMetrics {
  double f1 = 0.0;  // macro over both classes
  double accuracy = 0.0;
  double auroc = 0.0;
};

// Positive prediction when score >= threshold. Labels are 0/1; both classes
// must be present.
ClassifierMetrics classifier_metrics(std::span<const double> scores,
                                     std::span<const int> labels,
                                     double threshold = 0.5);

// Mann-Whitney AUROC with tied scores counted as one half.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Bag-of-words attribute scorer: add-one smoothed per-token log-odds of the
// positive class plus the log prior odds, squashed by the logistic function.
// Works on surface tokens so it is independent of any model vocabulary.
class BowScorer {
 public:
  static BowScorer train(std::span<const AttributeText> data);

  // Probability of the positive class in [0, 1].
  double score(std::string_view text) const;
  double score_tokens(std::span<const std::string> tokens) const;

  double prior_logit() const noexcept { return prior_logit_; }
  double weight(const std::string& token) const;

  void write(std::ostream& out) const;
  static BowScorer read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static BowScorer load(const std::filesystem::path& path);

  std::uint64_t hash() const;

 private:
  double prior_logit_ = 0.0;
  std::map<std::string, double> weights_;
};

// METEOR and COLA are never computed and always serialize as null.
struct MetricsReport {
  std::optional<double> bleu2;
  std::optional<double> diversity;
  std::optional<double> novelty;
  std::optional<double> perplexity;
  std::map<std::string, double> attribute_scores;
  std::optional<ClassifierMetrics> classifier;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

// Plain-text table: one column per named report, one row per metric, the
// attribute rows following the generation-quality rows.
std::string format_table(
    std::span<const std::pair<std::string, MetricsReport>> columns);

}  // namespace guidedgen

#endif  // GUIDEDGEN_METRICS_H_
