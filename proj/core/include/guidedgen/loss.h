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

#ifndef GUIDEDGEN_LOSS_H_
#define GUIDEDGEN_LOSS_H_

#include <span>

#include "guidedgen/ngram_model.h"
#include "guidedgen/posterior.h"

namespace guidedgen {

struct LossConfig {
  // Weight of the generative term.
  double lambda = 0.8;

  void validate() const;
};

struct Losses {
  double generative = 0.0;      // L_g
  double discriminative = 0.0;  // L_d
  double combined = 0.0;        // L_gd
};

// lambda * generative + (1 - lambda) * discriminative.
Losses mix_losses(double generative, double discriminative,
                  const LossConfig& config);

// L_g: mean length-normalized negative log-likelihood under each record's
// own code. L_d: mean negative log posterior of that code at full length.
// Records must be non-empty sequences.
Losses losses(const NgramModel& model, std::span<const CodedSequence> data,
              const PosteriorConfig& posterior, const LossConfig& config);

}  // namespace guidedgen

#endif  // GUIDEDGEN_LOSS_H_
