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

// Guided decoding. Each step takes the base model's next-token distribution
// given (prompt, SEP, generated), shapes it (repetition penalty, then
// temperature), multiplies in every attribute's class posterior raised to
// its weight,
//
//   P_w(v) ∝ P_LM(v) * prod_i P_i(c_i | generated, v)^omega_i,
//
// bans tokens that would repeat an n-gram, truncates to top-k and then to
// the nucleus, and samples. The first `warmup_tokens` steps run without
// attribute control.

#ifndef GUIDEDGEN_DECODER_H_
#define GUIDEDGEN_DECODER_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "guidedgen/common.h"
#include "guidedgen/ngram_model.h"
#include "guidedgen/posterior.h"

namespace guidedgen {

enum class Direction { kTowardPositive, kTowardNegative };

std::string_view to_string(Direction direction);
Direction parse_direction(std::string_view text);

struct AttributeControl {
  std::string name;
  std::shared_ptr<const NgramModel> model;
  PosteriorConfig posterior;
  double omega = 1.0;
  Direction direction = Direction::kTowardPositive;
};

struct GenerationConfig {
  int max_new_tokens = 100;
  int warmup_tokens = 10;
  int no_repeat_ngram = 5;
  double repetition_penalty = 3.5;
  double temperature = 1.2;
  int top_k = 100;
  double nucleus_p = 0.92;
  int num_samples = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

// Weight presets for one, two and three controlled attributes.
inline constexpr double kSingleAttributeWeight = 1.0;
inline constexpr double kDoubleAttributeWeight = 0.5;
inline constexpr double kTripleStyleWeight = 0.3;    // politeness, detox
inline constexpr double kTripleEmotionWeight = 0.4;  // the emotion

struct WeightedPosterior {
  std::span<const double> posterior;  // linear, entries in (0, 1)
  double omega = 0.0;
};

// Normalized exp(base) * prod posterior^omega. Weights of zero are skipped.
std::vector<double> combine(std::span<const double> base_logprobs,
                            std::span<const WeightedPosterior> posteriors);

// The one-attribute form exp(base) * posterior^omega.
std::vector<double> combine_single(std::span<const double> base_logprobs,
                                   std::span<const double> posterior,
                                   double omega);

// Thrown by apply_filters when no token survives.
class DegenerateFilterError : public Error {
 public:
  DegenerateFilterError()
      : Error(ErrorCode::kFailedPrecondition, "degenerate filter state") {}
};

struct FilterReport {
  int banned = 0;
  std::size_t support_after_top_k = 0;
  std::size_t support_after_nucleus = 0;
};

// No-repeat-ngram ban over `history`, then top-k (ties by lower id), then
// nucleus, then renormalization. EOS is never banned. Returns the input
// unchanged when nothing is removed.
std::vector<double> apply_filters(std::span<const double> probs,
                                  std::span<const TokenId> history,
                                  const GenerationConfig& config,
                                  FilterReport* report = nullptr);

struct SupportEntry {
  TokenId token = 0;
  double prob = 0.0;

  friend bool operator==(const SupportEntry&, const SupportEntry&) = default;
};

// Inverse-CDF draw over `support` in listed order; `u` in [0, 1).
TokenId sample_from(std::span<const SupportEntry> support, double u);

struct AttributeStepRecord {
  std::string name;
  double omega = 0.0;
  double posterior = 0.0;  // of the chosen token
};

struct StepRecord {
  TokenId token = 0;
  bool warmup = false;
  double base_logprob = 0.0;  // shaped base log-probability of `token`
  TokenId base_argmax = 0;
  std::vector<AttributeStepRecord> attributes;  // empty during warmup
  double combined_prob = 0.0;  // before filtering
  double final_prob = 0.0;     // the probability it was sampled with
  FilterReport filters;
  bool filters_relaxed = false;  // degenerate state, retried with top-k only
  double draw = 0.0;
  std::vector<SupportEntry> distribution;  // sampled-from, ascending id
};

enum class Termination { kEos, kMaxLength };

std::string_view to_string(Termination termination);

struct CandidateTrace {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  TokenSequence tokens;  // includes the final EOS when terminated by it
  std::vector<StepRecord> steps;
  Termination terminated_by = Termination::kMaxLength;

  // Generated tokens without a trailing EOS.
  std::span<const TokenId> content() const;
};

// All per-step distributions, before filtering and sampling.
struct StepDistributions {
  bool warmup = false;
  std::vector<double> base_logprobs;  // masked, penalized, tempered
  // Per control: log P(v | generated, code) for the true and false code.
  std::vector<std::vector<double>> logp_true;
  std::vector<std::vector<double>> logp_false;
  // Per control posterior of its desired class; empty during warmup.
  std::vector<std::vector<double>> posteriors;
  std::vector<double> combined;
};

// One candidate being decoded. Single-owner; models are shared read-only.
class DecodingSession {
 public:
  DecodingSession(std::shared_ptr<const NgramModel> base,
                  std::vector<AttributeControl> controls,
                  GenerationConfig config, TokenSequence prompt, Rng rng);

  bool done() const noexcept { return terminated_.has_value(); }
  std::span<const TokenId> generated() const noexcept { return generated_; }

  StepDistributions propose() const;

  // Samples one token and appends its trace record. Requires !done().
  const StepRecord& step();

  // Appends `token` without sampling (for probing fixed histories).
  void absorb(TokenId token);

  CandidateTrace finish(std::size_t index) &&;

 private:
  void append(TokenId token, const StepDistributions& d);

  std::shared_ptr<const NgramModel> base_;
  std::vector<AttributeControl> controls_;
  GenerationConfig config_;
  TokenSequence prompt_;
  Rng rng_;
  std::vector<TokenId> generated_;
  std::vector<PosteriorState> states_;
  std::vector<StepRecord> steps_;
  std::optional<Termination> terminated_;
};

// Checks controls against the base model: unique names, omega >= 0,
// conditioned models over the same vocabulary.
void validate_controls(const NgramModel& base,
                       std::span<const AttributeControl> controls);

// Candidate `index` of a generation request; its random stream is derived
// from (config.seed, index).
CandidateTrace generate_candidate(std::shared_ptr<const NgramModel> base,
                                  const TokenSequence& prompt,
                                  std::span<const AttributeControl> controls,
                                  const GenerationConfig& config,
                                  std::size_t index);

// config.num_samples independent candidates.
std::vector<CandidateTrace> generate(std::shared_ptr<const NgramModel> base,
                                     const TokenSequence& prompt,
                                     std::span<const AttributeControl> controls,
                                     const GenerationConfig& config);

// Re-draws every step from its recorded distribution and draw.
std::vector<TokenId> replay(const CandidateTrace& trace);

}  // namespace guidedgen

#endif  // GUIDEDGEN_DECODER_H_
