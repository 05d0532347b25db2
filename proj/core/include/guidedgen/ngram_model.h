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

// Count-based n-gram language models. A conditioned model keeps one count
// table per control code and is queried under a code; an unconditioned model
// (the base dialogue model) keeps a single table.
//
// Histories passed to queries never include BOS: the model prepends it. The
// distribution for the next token is estimated from the last
// min(order - 1, context_window) tokens of BOS + history.

#ifndef GUIDEDGEN_NGRAM_MODEL_H_
#define GUIDEDGEN_NGRAM_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "guidedgen/corpus.h"

namespace guidedgen {

// Desired (kTrue) and undesired (kFalse) class of a discriminator.
enum class ControlCode : std::uint8_t { kFalse = 0, kTrue = 1 };

constexpr ControlCode opposite(ControlCode code) noexcept {
  return code == ControlCode::kTrue ? ControlCode::kFalse : ControlCode::kTrue;
}

constexpr ControlCode code_for(Label label) noexcept {
  return label == Label::kPositive ? ControlCode::kTrue : ControlCode::kFalse;
}

// P(v | ctx) = (c(ctx, v) + k) / (c(ctx) + k |V|) at the longest context.
struct AddK {
  double k = 0.1;
  friend bool operator==(const AddK&, const AddK&) = default;
};

// Interpolated absolute discounting, recursing down to a uniform floor.
struct AbsoluteDiscount {
  double discount = 0.75;
  friend bool operator==(const AbsoluteDiscount&,
                         const AbsoluteDiscount&) = default;
};

using Smoothing = std::variant<AddK, AbsoluteDiscount>;

// "add-k:0.1" / "discount:0.75"; round-trips through parse_smoothing.
std::string to_string(const Smoothing& smoothing);
Smoothing parse_smoothing(const std::string& text);

struct NgramConfig {
  int order = 3;
  Smoothing smoothing = AddK{};
  int context_window = 128;

  void validate() const;
};

enum class Conditioning { kConditioned, kUnconditioned };

struct CodedSequence {
  TokenSequence tokens;
  ControlCode code = ControlCode::kTrue;
};

inline constexpr int kModelFormatVersion = 1;

class NgramModel {
 public:
  const NgramConfig& config() const noexcept { return config_; }
  int order() const noexcept { return config_.order; }
  Conditioning conditioning() const noexcept { return conditioning_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::uint64_t vocab_hash() const noexcept { return vocab_hash_; }

  // Full next-token log-distribution (log-sum-exp == 0). `code` must be set
  // exactly when the model is conditioned.
  std::vector<double> next_logprobs(std::span<const TokenId> history,
                                    std::optional<ControlCode> code) const;
  void next_logprobs(std::span<const TokenId> history,
                     std::optional<ControlCode> code,
                     std::span<double> out) const;

  double token_logprob(std::span<const TokenId> history, TokenId token,
                       std::optional<ControlCode> code) const;

  // Sum over positions of log P(seq[i] | prefix + seq[0..i)). Empty -> 0.
  double sequence_logprob(std::span<const TokenId> seq,
                          std::optional<ControlCode> code,
                          std::span<const TokenId> prefix = {}) const;

  void write(std::ostream& out) const;
  static NgramModel read(std::istream& in, const Vocabulary& vocab);
  void save(const std::filesystem::path& path) const;
  static NgramModel load(const std::filesystem::path& path,
                         const Vocabulary& vocab);

  // The serialized form; identical training inputs give identical bytes.
  std::string serialize() const;

 private:
  friend class NgramTrainer;

  struct ContextCounts {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> next;
  };
  // Keyed by the context tokens (length 0..order-1), oldest first.
  using Table = std::map<std::vector<TokenId>, ContextCounts, std::less<>>;

  NgramModel(NgramConfig config, Conditioning conditioning,
             std::size_t vocab_size, std::uint64_t vocab_hash);

  std::size_t table_index(std::optional<ControlCode> code) const;
  const Table& table(std::optional<ControlCode> code) const;
  std::size_t context_length(std::size_t history_size) const;
  void fill(const Table& table, std::span<const TokenId> context,
            std::span<double> out) const;

  NgramConfig config_;
  Conditioning conditioning_;
  std::size_t vocab_size_;
  std::uint64_t vocab_hash_;
  std::vector<Table> tables_;
};

// Builds count tables. Each training sequence is followed by EOS.
class NgramTrainer {
 public:
  NgramTrainer(const Vocabulary& vocab, NgramConfig config,
               Conditioning conditioning);

  // Counts predictions of `targets` (then EOS) given BOS + prefix + targets.
  void add(std::span<const TokenId> prefix, std::span<const TokenId> targets,
           std::optional<ControlCode> code);

  NgramModel finish() &&;

 private:
  NgramModel model_;
  std::vector<std::size_t> sequences_per_table_;
};

// Class-conditioned model over labeled sequences. Both codes must occur.
NgramModel train_cclm(const Vocabulary& vocab,
                      std::span<const CodedSequence> data,
                      const NgramConfig& config);

// Base dialogue model over (prompt, response) pairs: learns P(response |
// prompt) with history prompt + SEP + response.
NgramModel train_base_lm(const Vocabulary& vocab,
                         std::span<const PairRecord> pairs,
                         const NgramConfig& config);

// Base-model history for a prompt and the tokens generated so far.
std::vector<TokenId> dialogue_history(std::span<const TokenId> prompt,
                                      std::span<const TokenId> generated);

// exp(-total logprob / total tokens). Data must contain at least one token.
double perplexity(const NgramModel& model, std::span<const TokenSequence> data,
                  std::optional<ControlCode> code);

// Perplexity of the responses under the base model, conditioned on prompts.
double response_perplexity(const NgramModel& base,
                           std::span<const PairRecord> pairs);

}  // namespace guidedgen

#endif  // GUIDEDGEN_NGRAM_MODEL_H_
