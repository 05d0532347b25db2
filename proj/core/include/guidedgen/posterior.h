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

// Bayes class posterior of a class-conditioned model. For a sequence
// x_1..x_t the posterior of the desired code c is
//
//   P(c | x) = P(c) P(x | c)^(alpha/t) / sum_{c'} P(c') P(x | c')^(alpha/t)
//
// evaluated in log space as a two-way softmax.

#ifndef GUIDEDGEN_POSTERIOR_H_
#define GUIDEDGEN_POSTERIOR_H_

#include <cstdint>
#include <span>
#include <vector>

#include "guidedgen/ngram_model.h"

namespace guidedgen {

struct PosteriorConfig {
  double alpha = 1.0;
  // P(c) of the desired (true) code.
  double prior_pos = 0.5;

  void validate() const;

  // Same configuration with the roles of the two codes exchanged.
  PosteriorConfig flipped() const { return {alpha, 1.0 - prior_pos}; }
};

// Fraction of positive labels; must be strictly between 0 and 1.
double estimate_prior(std::span<const Label> labels);

// Cumulative per-code log-likelihood of the tokens absorbed so far.
struct PosteriorState {
  double cum_logp_pos = 0.0;
  double cum_logp_neg = 0.0;
  std::int64_t t = 0;

  friend bool operator==(const PosteriorState&, const PosteriorState&) = default;
};

PosteriorState advance(const PosteriorState& state, double logp_pos,
                       double logp_neg);

// Advances by `token` using the discriminator's per-code conditional
// log-probabilities given `history` (the tokens absorbed so far).
PosteriorState advance(const PosteriorState& state, const NgramModel& model,
                       std::span<const TokenId> history, TokenId token);

// log P(c | x_1..x_t, v) for every candidate v, given the per-code next-token
// log-probabilities. All three spans have the vocabulary's length.
void class_log_posteriors(const PosteriorState& state,
                          std::span<const double> next_logp_pos,
                          std::span<const double> next_logp_neg,
                          const PosteriorConfig& config, std::span<double> out);

// Linear-space posteriors, each strictly inside (0, 1).
std::vector<double> class_posteriors(const PosteriorState& state,
                                     std::span<const double> next_logp_pos,
                                     std::span<const double> next_logp_neg,
                                     const PosteriorConfig& config);

// Log posterior of `code` for a complete sequence (t = its length). An empty
// sequence yields the prior.
double sequence_log_posterior(const NgramModel& model,
                              std::span<const TokenId> seq, ControlCode code,
                              const PosteriorConfig& config);

// The two-code log-softmax evaluated at the desired code, from the summed
// log-likelihoods of a length-t sequence.
double log_posterior_from_likelihoods(double loglik_pos, double loglik_neg,
                                      double t, const PosteriorConfig& config);

}  // namespace guidedgen

#endif  // GUIDEDGEN_POSTERIOR_H_
