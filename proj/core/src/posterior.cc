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

#include "guidedgen/posterior.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace guidedgen {
namespace {

// log(sigmoid(z)) without overflow.
double log_sigmoid(double z) {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

double log_prior_odds(const PosteriorConfig& config) {
  return std::log(config.prior_pos / (1.0 - config.prior_pos));
}

}  // namespace

void PosteriorConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    fail(ErrorCode::kInvalidArgument, "posterior alpha must be > 0");
  }
  if (!(prior_pos > 0.0 && prior_pos < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "posterior prior must lie in (0, 1)");
  }
}

double estimate_prior(std::span<const Label> labels) {
  const auto pos = std::count(labels.begin(), labels.end(), Label::kPositive);
  if (pos == 0 || static_cast<std::size_t>(pos) == labels.size()) {
    fail(ErrorCode::kInvalidArgument,
         "class prior needs both labels in the training split");
  }
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

PosteriorState advance(const PosteriorState& state, double logp_pos,
                       double logp_neg) {
  return {state.cum_logp_pos + logp_pos, state.cum_logp_neg + logp_neg,
          state.t + 1};
}

PosteriorState advance(const PosteriorState& state, const NgramModel& model,
                       std::span<const TokenId> history, TokenId token) {
  return advance(state, model.token_logprob(history, token, ControlCode::kTrue),
                 model.token_logprob(history, token, ControlCode::kFalse));
}

double log_posterior_from_likelihoods(double loglik_pos, double loglik_neg,
                                      double t, const PosteriorConfig& config) {
  const double prior_logit = log_prior_odds(config);
  if (t <= 0.0) return log_sigmoid(prior_logit);
  return log_sigmoid(prior_logit + config.alpha / t * (loglik_pos - loglik_neg));
}

void class_log_posteriors(const PosteriorState& state,
                          std::span<const double> next_logp_pos,
                          std::span<const double> next_logp_neg,
                          const PosteriorConfig& config, std::span<double> out) {
  if (next_logp_pos.size() != out.size() || next_logp_neg.size() != out.size()) {
    fail(ErrorCode::kInvalidArgument, "class_log_posteriors: size mismatch");
  }
  const double prior_logit = log_prior_odds(config);
  const double scale = config.alpha / static_cast<double>(state.t + 1);
  const double cum_diff = state.cum_logp_pos - state.cum_logp_neg;
  for (std::size_t v = 0; v < out.size(); ++v) {
    const double z =
        prior_logit + scale * (cum_diff + (next_logp_pos[v] - next_logp_neg[v]));
    out[v] = log_sigmoid(z);
  }
}

std::vector<double> class_posteriors(const PosteriorState& state,
                                     std::span<const double> next_logp_pos,
                                     std::span<const double> next_logp_neg,
                                     const PosteriorConfig& config) {
  std::vector<double> out(next_logp_pos.size());
  class_log_posteriors(state, next_logp_pos, next_logp_neg, config, out);
  constexpr double kLow = std::numeric_limits<double>::min();
  const double high = std::nextafter(1.0, 0.0);
  for (double& p : out) p = std::clamp(std::exp(p), kLow, high);
  return out;
}

double sequence_log_posterior(const NgramModel& model,
                              std::span<const TokenId> seq, ControlCode code,
                              const PosteriorConfig& config) {
  const double pos = model.sequence_logprob(seq, ControlCode::kTrue);
  const double neg = model.sequence_logprob(seq, ControlCode::kFalse);
  const double t = static_cast<double>(seq.size());
  if (code == ControlCode::kTrue) {
    return log_posterior_from_likelihoods(pos, neg, t, config);
  }
  return log_posterior_from_likelihoods(neg, pos, t, config.flipped());
}

}  // namespace guidedgen
