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

#include "guidedgen/loss.h"

#include <cmath>

namespace guidedgen {

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "loss lambda must lie in [0, 1]");
  }
}

Losses mix_losses(double generative, double discriminative,
                  const LossConfig& config) {
  config.validate();
  return {generative, discriminative,
          config.lambda * generative + (1.0 - config.lambda) * discriminative};
}

Losses losses(const NgramModel& model, std::span<const CodedSequence> data,
              const PosteriorConfig& posterior, const LossConfig& config) {
  if (data.empty()) fail(ErrorCode::kInvalidArgument, "losses: empty data");
  posterior.validate();
  double gen = 0.0;
  double disc = 0.0;
  for (const auto& item : data) {
    if (item.tokens.empty()) {
      fail(ErrorCode::kInvalidArgument, "losses: empty sequence");
    }
    const double pos = model.sequence_logprob(item.tokens.ids, ControlCode::kTrue);
    const double neg = model.sequence_logprob(item.tokens.ids, ControlCode::kFalse);
    const double t = static_cast<double>(item.tokens.size());
    const bool desired = item.code == ControlCode::kTrue;
    gen += -(desired ? pos : neg) / t;
    disc += desired
                ? -log_posterior_from_likelihoods(pos, neg, t, posterior)
                : -log_posterior_from_likelihoods(neg, pos, t, posterior.flipped());
  }
  const auto n = static_cast<double>(data.size());
  return mix_losses(gen / n, disc / n, config);
}

}  // namespace guidedgen
