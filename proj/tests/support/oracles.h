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

// Independent reference implementations used only by tests. Nothing here
// calls into the model, posterior or decoder code paths it checks: n-gram
// probabilities are recounted from the raw training sequences and every
// distribution is built from explicit linear-space products.

#ifndef GUIDEDGEN_TESTS_SUPPORT_ORACLES_H_
#define GUIDEDGEN_TESTS_SUPPORT_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "guidedgen/corpus.h"

namespace guidedgen::oracle {

// One training sequence as the trainer saw it: BOS + prefix + targets + EOS,
// with predictions counted from position `first_target` on.
struct RawSequence {
  std::vector<TokenId> full;
  std::size_t first_target = 1;
};

inline RawSequence raw(const std::vector<TokenId>& prefix,
                       const std::vector<TokenId>& targets) {
  RawSequence r;
  r.full.push_back(kBosId);
  r.full.insert(r.full.end(), prefix.begin(), prefix.end());
  r.full.insert(r.full.end(), targets.begin(), targets.end());
  r.full.push_back(kEosId);
  r.first_target = 1 + prefix.size();
  return r;
}

// Counts of (context) and (context, v) by scanning every training position.
struct ContextCount {
  double context = 0;
  std::vector<double> next;
};

inline ContextCount count_context(const std::vector<RawSequence>& data,
                                  const std::vector<TokenId>& context,
                                  std::size_t vocab) {
  ContextCount c;
  c.next.assign(vocab, 0.0);
  const std::size_t len = context.size();
  for (const auto& seq : data) {
    for (std::size_t pos = std::max(seq.first_target, len); pos < seq.full.size(); ++pos) {
      if (std::equal(context.begin(), context.end(), seq.full.begin() + static_cast<std::ptrdiff_t>(pos - len))) {
        c.context += 1;
        c.next[static_cast<std::size_t>(seq.full[pos])] += 1;
      }
    }
  }
  return c;
}

inline std::vector<TokenId> context_of(const std::vector<TokenId>& history,
                                       int order, int window) {
  std::vector<TokenId> full{kBosId};
  full.insert(full.end(), history.begin(), history.end());
  const std::size_t len =
      std::min<std::size_t>(static_cast<std::size_t>(std::min(order - 1, window)), full.size());
  return {full.end() - static_cast<std::ptrdiff_t>(len), full.end()};
}

// Linear-space add-k next-token distribution.
inline std::vector<double> add_k(const std::vector<RawSequence>& data,
                                 const std::vector<TokenId>& history, int order,
                                 int window, double k, std::size_t vocab) {
  const auto ctx = context_of(history, order, window);
  const auto c = count_context(data, ctx, vocab);
  std::vector<double> p(vocab);
  const double v = static_cast<double>(vocab);
  for (std::size_t i = 0; i < vocab; ++i) {
    p[i] = c.context == 0 ? 1.0 / v : (c.next[i] + k) / (c.context + k * v);
  }
  return p;
}

// Linear-space interpolated absolute discounting.
inline std::vector<double> discounted(const std::vector<RawSequence>& data,
                                      const std::vector<TokenId>& history,
                                      int order, int window, double d,
                                      std::size_t vocab) {
  const auto ctx = context_of(history, order, window);
  std::vector<double> p(vocab, 1.0 / static_cast<double>(vocab));
  for (std::size_t len = 0; len <= ctx.size(); ++len) {
    const std::vector<TokenId> sub(ctx.end() - static_cast<std::ptrdiff_t>(len), ctx.end());
    const auto c = count_context(data, sub, vocab);
    if (c.context == 0) continue;
    double types = 0;
    for (double n : c.next) types += n > 0;
    std::vector<double> q(vocab);
    for (std::size_t i = 0; i < vocab; ++i) {
      q[i] = std::max(c.next[i] - d, 0.0) / c.context + d * types / c.context * p[i];
    }
    p = q;
  }
  return p;
}

// Linear-space likelihood of a whole sequence: product of per-step terms.
template <typename NextFn>
double sequence_probability(const std::vector<TokenId>& seq, NextFn&& next) {
  double prob = 1.0;
  std::vector<TokenId> history;
  for (TokenId t : seq) {
    prob *= next(history)[static_cast<std::size_t>(t)];
    history.push_back(t);
  }
  return prob;
}

// P(c | x) = P(c) L_c^(a/t) / (P(c) L_c^(a/t) + P(c̄) L_c̄^(a/t)).
inline double bayes_posterior(double lik_desired, double lik_other,
                              double prior_desired, double alpha, double t) {
  const double a = prior_desired * std::pow(lik_desired, alpha / t);
  const double b = (1.0 - prior_desired) * std::pow(lik_other, alpha / t);
  return a / (a + b);
}

// Explicit product p_base(v) * prod_i post_i(v)^w_i, normalized.
inline std::vector<double> product_combine(
    const std::vector<double>& base_probs,
    const std::vector<std::vector<double>>& posteriors,
    const std::vector<double>& weights) {
  std::vector<double> out(base_probs);
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    for (std::size_t v = 0; v < out.size(); ++v) {
      out[v] *= std::pow(posteriors[i][v], weights[i]);
    }
  }
  double z = 0;
  for (double x : out) z += x;
  for (double& x : out) x /= z;
  return out;
}

// Jaccard on token sets by explicit set construction.
inline double jaccard(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
  const std::set<TokenId> sa(a.begin(), a.end());
  const std::set<TokenId> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::set<TokenId> uni = sa;
  uni.insert(sb.begin(), sb.end());
  double inter = 0;
  for (TokenId t : sa) inter += sb.count(t);
  return inter / static_cast<double>(uni.size());
}

inline double diversity(const std::vector<std::vector<TokenId>>& s) {
  double total = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double best = -1;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i != j) best = std::max(best, jaccard(s[i], s[j]));
    }
    total += 1 - best;
  }
  return total / static_cast<double>(s.size());
}

inline double novelty(const std::vector<std::vector<TokenId>>& s,
                      const std::vector<std::vector<TokenId>>& corpus) {
  double total = 0;
  for (const auto& x : s) {
    double best = -1;
    for (const auto& c : corpus) best = std::max(best, jaccard(x, c));
    total += 1 - best;
  }
  return total / static_cast<double>(s.size());
}

// AUROC by counting ordered positive/negative pairs.
inline double pair_count_auroc(const std::vector<double>& scores,
                               const std::vector<int>& labels) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[i] == 1 && labels[j] == 0) {
        pairs += 1;
        if (scores[i] > scores[j]) good += 1;
        if (scores[i] == scores[j]) good += 0.5;
      }
    }
  }
  return good / pairs;
}

}  // namespace guidedgen::oracle

#endif  // GUIDEDGEN_TESTS_SUPPORT_ORACLES_H_
