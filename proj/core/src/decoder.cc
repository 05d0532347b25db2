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

#include "guidedgen/decoder.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace guidedgen {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void log_normalize(std::vector<double>& logp) {
  const double z = log_sum_exp(logp);
  for (double& v : logp) v -= z;
}

std::vector<double> softmax(std::vector<double> scores) {
  double hi = kNegInf;
  for (double s : scores) hi = std::max(hi, s);
  if (!std::isfinite(hi)) {
    fail(ErrorCode::kInvalidArgument, "combine: no finite score");
  }
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - hi);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return scores;
}

void check_posterior(std::span<const double> posterior, std::size_t size,
                     double omega) {
  if (posterior.size() != size) {
    fail(ErrorCode::kInvalidArgument, "combine: posterior size mismatch");
  }
  if (!(omega >= 0.0) || !std::isfinite(omega)) {
    fail(ErrorCode::kInvalidArgument, "combine: omega must be finite and >= 0");
  }
}

// Ordering used by truncation: probability descending, then id ascending.
bool ranks_before(const SupportEntry& a, const SupportEntry& b) {
  if (a.prob != b.prob) return a.prob > b.prob;
  return a.token < b.token;
}

}  // namespace

std::string_view to_string(Direction direction) {
  return direction == Direction::kTowardPositive ? "toward-positive"
                                                 : "toward-negative";
}

Direction parse_direction(std::string_view text) {
  if (text == "toward-positive") return Direction::kTowardPositive;
  if (text == "toward-negative") return Direction::kTowardNegative;
  fail(ErrorCode::kInvalidArgument, "unknown direction: " + std::string(text));
}

std::string_view to_string(Termination termination) {
  return termination == Termination::kEos ? "eos" : "max_length";
}

void GenerationConfig::validate() const {
  if (warmup_tokens < 0 || max_new_tokens < warmup_tokens) {
    fail(ErrorCode::kInvalidArgument,
         "generation: require max_new_tokens >= warmup_tokens >= 0");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCode::kInvalidArgument, "generation: temperature must be > 0");
  }
  if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) {
    fail(ErrorCode::kInvalidArgument, "generation: nucleus_p must lie in (0, 1]");
  }
  if (top_k < 1) fail(ErrorCode::kInvalidArgument, "generation: top_k must be >= 1");
  if (no_repeat_ngram < 0) {
    fail(ErrorCode::kInvalidArgument, "generation: no_repeat_ngram must be >= 0");
  }
  if (!(repetition_penalty > 0.0) || !std::isfinite(repetition_penalty)) {
    fail(ErrorCode::kInvalidArgument,
         "generation: repetition_penalty must be > 0");
  }
  if (num_samples < 1) {
    fail(ErrorCode::kInvalidArgument, "generation: num_samples must be >= 1");
  }
}

// --- combination ---------------------------------------------------------------

std::vector<double> combine(std::span<const double> base_logprobs,
                            std::span<const WeightedPosterior> posteriors) {
  std::vector<double> scores(base_logprobs.begin(), base_logprobs.end());
  for (const auto& wp : posteriors) {
    check_posterior(wp.posterior, scores.size(), wp.omega);
    if (wp.omega == 0.0) continue;
    for (std::size_t v = 0; v < scores.size(); ++v) {
      scores[v] += wp.omega * std::log(wp.posterior[v]);
    }
  }
  return softmax(std::move(scores));
}

std::vector<double> combine_single(std::span<const double> base_logprobs,
                                   std::span<const double> posterior,
                                   double omega) {
  std::vector<double> scores(base_logprobs.begin(), base_logprobs.end());
  check_posterior(posterior, scores.size(), omega);
  if (omega != 0.0) {
    for (std::size_t v = 0; v < scores.size(); ++v) {
      scores[v] += omega * std::log(posterior[v]);
    }
  }
  return softmax(std::move(scores));
}

// --- filters ---------------------------------------------------------------------

std::vector<double> apply_filters(std::span<const double> probs,
                                  std::span<const TokenId> history,
                                  const GenerationConfig& config,
                                  FilterReport* report) {
  const std::size_t vocab = probs.size();
  std::vector<bool> banned(vocab, false);
  int num_banned = 0;
  const auto n = static_cast<std::size_t>(config.no_repeat_ngram);
  if (n >= 1 && history.size() + 1 >= n) {
    const auto prefix = history.subspan(history.size() - (n - 1));
    for (std::size_t i = 0; i + n <= history.size(); ++i) {
      if (!std::equal(prefix.begin(), prefix.end(), history.begin() + static_cast<std::ptrdiff_t>(i))) {
        continue;
      }
      const TokenId next = history[i + n - 1];
      if (next == kEosId || next < 0 || static_cast<std::size_t>(next) >= vocab) {
        continue;
      }
      if (!banned[static_cast<std::size_t>(next)] && probs[static_cast<std::size_t>(next)] > 0.0) {
        ++num_banned;
      }
      banned[static_cast<std::size_t>(next)] = true;
    }
  }

  std::vector<SupportEntry> support;
  support.reserve(vocab);
  for (std::size_t v = 0; v < vocab; ++v) {
    if (probs[v] > 0.0 && !banned[v]) {
      support.push_back({static_cast<TokenId>(v), probs[v]});
    }
  }
  if (support.empty()) throw DegenerateFilterError();
  const std::size_t positive =
      static_cast<std::size_t>(std::count_if(probs.begin(), probs.end(),
                                             [](double p) { return p > 0.0; }));
  const bool any_banned = support.size() != positive;

  std::sort(support.begin(), support.end(), ranks_before);
  const auto k = static_cast<std::size_t>(config.top_k);
  if (support.size() > k) support.resize(k);
  const std::size_t after_top_k = support.size();

  double mass = 0.0;
  for (const auto& e : support) mass += e.prob;
  if (config.nucleus_p < 1.0) {
    const double target = config.nucleus_p * mass;
    double cum = 0.0;
    std::size_t keep = 0;
    while (keep < support.size()) {
      cum += support[keep].prob;
      ++keep;
      if (cum >= target) break;
    }
    support.resize(keep);
  }

  if (report != nullptr) {
    report->banned = num_banned;
    report->support_after_top_k = after_top_k;
    report->support_after_nucleus = support.size();
  }
  if (!any_banned && support.size() == positive) {
    return {probs.begin(), probs.end()};
  }
  double kept = 0.0;
  for (const auto& e : support) kept += e.prob;
  std::vector<double> out(vocab, 0.0);
  for (const auto& e : support) {
    out[static_cast<std::size_t>(e.token)] = e.prob / kept;
  }
  return out;
}

TokenId sample_from(std::span<const SupportEntry> support, double u) {
  if (support.empty()) fail(ErrorCode::kInvalidArgument, "sample_from: empty support");
  double total = 0.0;
  for (const auto& e : support) total += e.prob;
  const double target = u * total;
  double cum = 0.0;
  for (const auto& e : support) {
    cum += e.prob;
    if (target < cum) return e.token;
  }
  return support.back().token;
}

std::span<const TokenId> CandidateTrace::content() const {
  std::span<const TokenId> ids = tokens.ids;
  if (!ids.empty() && ids.back() == kEosId) ids = ids.first(ids.size() - 1);
  return ids;
}

// --- session ----------------------------------------------------------------------

void validate_controls(const NgramModel& base,
                       std::span<const AttributeControl> controls) {
  std::set<std::string> names;
  for (const auto& c : controls) {
    if (!names.insert(c.name).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate attribute control: " + c.name);
    }
    if (!(c.omega >= 0.0) || !std::isfinite(c.omega)) {
      fail(ErrorCode::kInvalidArgument, "weight for " + c.name + " must be >= 0");
    }
    if (!c.model) fail(ErrorCode::kInvalidArgument, "no model for " + c.name);
    if (c.model->conditioning() != Conditioning::kConditioned) {
      fail(ErrorCode::kInvalidArgument,
           "attribute model " + c.name + " is not class-conditioned");
    }
    if (c.model->vocab_hash() != base.vocab_hash() ||
        c.model->vocab_size() != base.vocab_size()) {
      fail(ErrorCode::kFailedPrecondition,
           "attribute model " + c.name + " uses a different vocabulary");
    }
    c.posterior.validate();
  }
}

DecodingSession::DecodingSession(std::shared_ptr<const NgramModel> base,
                                 std::vector<AttributeControl> controls,
                                 GenerationConfig config, TokenSequence prompt,
                                 Rng rng)
    : base_(std::move(base)),
      controls_(std::move(controls)),
      config_(config),
      prompt_(std::move(prompt)),
      rng_(rng),
      states_(controls_.size()) {
  if (!base_) fail(ErrorCode::kInvalidArgument, "no base model");
  if (base_->conditioning() != Conditioning::kUnconditioned) {
    fail(ErrorCode::kInvalidArgument, "base model must be unconditioned");
  }
  config_.validate();
  validate_controls(*base_, controls_);
  if (prompt_.empty()) fail(ErrorCode::kInvalidArgument, "prompt is empty");
  for (TokenId t : prompt_.ids) {
    if (t < 0 || static_cast<std::size_t>(t) >= base_->vocab_size()) {
      fail(ErrorCode::kInvalidArgument, "prompt token out of range");
    }
  }
  if (config_.max_new_tokens == 0) terminated_ = Termination::kMaxLength;
}

StepDistributions DecodingSession::propose() const {
  StepDistributions d;
  d.warmup = generated_.size() < static_cast<std::size_t>(config_.warmup_tokens);

  d.base_logprobs =
      base_->next_logprobs(dialogue_history(prompt_.ids, generated_), std::nullopt);
  for (TokenId special : {kPadId, kUnkId, kBosId, kSepId}) {
    d.base_logprobs[static_cast<std::size_t>(special)] = kNegInf;
  }
  log_normalize(d.base_logprobs);
  if (config_.repetition_penalty != 1.0 && !generated_.empty()) {
    const double penalty = std::log(config_.repetition_penalty);
    const std::set<TokenId> seen(generated_.begin(), generated_.end());
    for (TokenId t : seen) d.base_logprobs[static_cast<std::size_t>(t)] -= penalty;
    log_normalize(d.base_logprobs);
  }
  if (config_.temperature != 1.0) {
    for (double& v : d.base_logprobs) v /= config_.temperature;
    log_normalize(d.base_logprobs);
  }

  std::vector<WeightedPosterior> weighted;
  for (std::size_t i = 0; i < controls_.size(); ++i) {
    const auto& c = controls_[i];
    d.logp_true.push_back(c.model->next_logprobs(generated_, ControlCode::kTrue));
    d.logp_false.push_back(c.model->next_logprobs(generated_, ControlCode::kFalse));
    if (d.warmup) {
      d.posteriors.emplace_back();
      continue;
    }
    const PosteriorState& s = states_[i];
    if (c.direction == Direction::kTowardPositive) {
      d.posteriors.push_back(
          class_posteriors(s, d.logp_true.back(), d.logp_false.back(), c.posterior));
    } else {
      const PosteriorState swapped{s.cum_logp_neg, s.cum_logp_pos, s.t};
      d.posteriors.push_back(class_posteriors(swapped, d.logp_false.back(),
                                              d.logp_true.back(),
                                              c.posterior.flipped()));
    }
  }
  if (!d.warmup) {
    for (std::size_t i = 0; i < controls_.size(); ++i) {
      weighted.push_back({d.posteriors[i], controls_[i].omega});
    }
  }
  d.combined = combine(d.base_logprobs, weighted);
  return d;
}

void DecodingSession::append(TokenId token, const StepDistributions& d) {
  const auto v = static_cast<std::size_t>(token);
  for (std::size_t i = 0; i < controls_.size(); ++i) {
    states_[i] = advance(states_[i], d.logp_true[i][v], d.logp_false[i][v]);
  }
  generated_.push_back(token);
  if (token == kEosId) {
    terminated_ = Termination::kEos;
  } else if (generated_.size() >= static_cast<std::size_t>(config_.max_new_tokens)) {
    terminated_ = Termination::kMaxLength;
  }
}

const StepRecord& DecodingSession::step() {
  if (done()) fail(ErrorCode::kFailedPrecondition, "session already terminated");
  const StepDistributions d = propose();

  StepRecord rec;
  rec.warmup = d.warmup;
  std::vector<double> filtered;
  try {
    filtered = apply_filters(d.combined, generated_, config_, &rec.filters);
  } catch (const DegenerateFilterError&) {
    GenerationConfig relaxed = config_;
    relaxed.no_repeat_ngram = 0;
    relaxed.nucleus_p = 1.0;
    filtered = apply_filters(d.combined, generated_, relaxed, &rec.filters);
    rec.filters_relaxed = true;
  }
  for (std::size_t v = 0; v < filtered.size(); ++v) {
    if (filtered[v] > 0.0) {
      rec.distribution.push_back({static_cast<TokenId>(v), filtered[v]});
    }
  }
  rec.draw = rng_.uniform();
  rec.token = sample_from(rec.distribution, rec.draw);

  const auto chosen = static_cast<std::size_t>(rec.token);
  rec.base_logprob = d.base_logprobs[chosen];
  rec.base_argmax = static_cast<TokenId>(
      std::max_element(d.base_logprobs.begin(), d.base_logprobs.end()) -
      d.base_logprobs.begin());
  rec.combined_prob = d.combined[chosen];
  rec.final_prob = filtered[chosen];
  if (!d.warmup) {
    for (std::size_t i = 0; i < controls_.size(); ++i) {
      rec.attributes.push_back(
          {controls_[i].name, controls_[i].omega, d.posteriors[i][chosen]});
    }
  }
  append(rec.token, d);
  steps_.push_back(std::move(rec));
  return steps_.back();
}

void DecodingSession::absorb(TokenId token) {
  if (done()) fail(ErrorCode::kFailedPrecondition, "session already terminated");
  if (token < 0 || static_cast<std::size_t>(token) >= base_->vocab_size()) {
    fail(ErrorCode::kInvalidArgument, "absorb: token out of range");
  }
  StepDistributions d;
  const auto v = static_cast<std::size_t>(token);
  for (const auto& c : controls_) {
    d.logp_true.push_back({});
    d.logp_false.push_back({});
    d.logp_true.back().assign(base_->vocab_size(), 0.0);
    d.logp_false.back().assign(base_->vocab_size(), 0.0);
    d.logp_true.back()[v] = c.model->token_logprob(generated_, token, ControlCode::kTrue);
    d.logp_false.back()[v] = c.model->token_logprob(generated_, token, ControlCode::kFalse);
  }
  append(token, d);
}

CandidateTrace DecodingSession::finish(std::size_t index) && {
  CandidateTrace trace;
  trace.index = index;
  trace.seed = config_.seed;
  trace.tokens.ids = std::move(generated_);
  trace.tokens.role = SequenceRole::kResponse;
  trace.steps = std::move(steps_);
  trace.terminated_by = terminated_.value_or(Termination::kMaxLength);
  return trace;
}

CandidateTrace generate_candidate(std::shared_ptr<const NgramModel> base,
                                  const TokenSequence& prompt,
                                  std::span<const AttributeControl> controls,
                                  const GenerationConfig& config,
                                  std::size_t index) {
  DecodingSession session(std::move(base), {controls.begin(), controls.end()},
                          config, prompt, Rng(config.seed, index));
  while (!session.done()) session.step();
  return std::move(session).finish(index);
}

std::vector<CandidateTrace> generate(std::shared_ptr<const NgramModel> base,
                                     const TokenSequence& prompt,
                                     std::span<const AttributeControl> controls,
                                     const GenerationConfig& config) {
  if (!base) fail(ErrorCode::kInvalidArgument, "no base model");
  config.validate();
  validate_controls(*base, controls);
  std::vector<CandidateTrace> out;
  out.reserve(static_cast<std::size_t>(config.num_samples));
  for (int i = 0; i < config.num_samples; ++i) {
    out.push_back(generate_candidate(base, prompt, controls, config,
                                     static_cast<std::size_t>(i)));
  }
  return out;
}

std::vector<TokenId> replay(const CandidateTrace& trace) {
  std::vector<TokenId> out;
  out.reserve(trace.steps.size());
  for (const auto& s : trace.steps) out.push_back(sample_from(s.distribution, s.draw));
  return out;
}

}  // namespace guidedgen
