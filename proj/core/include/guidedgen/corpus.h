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

// Tokenization, vocabularies, dataset loading and deterministic splitting.

#ifndef GUIDEDGEN_CORPUS_H_
#define GUIDEDGEN_CORPUS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "guidedgen/common.h"

namespace guidedgen {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kBosId = 2;
inline constexpr TokenId kEosId = 3;
inline constexpr TokenId kSepId = 4;
inline constexpr TokenId kNumReserved = 5;

inline constexpr int kVocabFormatVersion = 1;

// Dense id <-> surface mapping. Ids 0..4 are the reserved PAD, UNK, BOS, EOS
// and SEP tokens; every other token follows in the order it was added.
class Vocabulary {
 public:
  Vocabulary();

  // Reserved tokens followed by `tokens` in order. Duplicates and reserved
  // surfaces are rejected.
  static Vocabulary from_tokens(std::span<const std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }

  // Id of `surface`, or UNK when absent.
  TokenId id(std::string_view surface) const;
  std::optional<TokenId> find(std::string_view surface) const;
  const std::string& token(TokenId id) const;
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // Content fingerprint; models record it and refuse a mismatching vocab.
  std::uint64_t hash() const noexcept { return hash_; }

  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void add(std::string surface);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::uint64_t hash_ = 0;
};

bool is_reserved(TokenId id) noexcept;

enum class SequenceRole { kPrompt, kResponse, kFreeText };

struct TokenSequence {
  std::vector<TokenId> ids;
  SequenceRole role = SequenceRole::kFreeText;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Lowercases ASCII letters, splits on whitespace and emits every ASCII
// punctuation character as its own token. Non-ASCII bytes are kept inside
// words untouched.
std::vector<std::string> tokenize(std::string_view text);

// Same segmentation, mapped through `vocab` (out-of-vocabulary -> UNK).
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       SequenceRole role = SequenceRole::kFreeText);

// Joins tokens with single spaces, attaching closing punctuation to the
// preceding word. PAD, BOS, EOS and SEP are dropped.
std::string detokenize(std::span<const std::string> tokens);
std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

// Reserved tokens plus every token seen at least `min_count` times, ordered
// by descending count and then lexicographically.
Vocabulary build_vocab(std::span<const std::vector<std::string>> corpus,
                       int min_count);

// 1 for small corpora, 2 above 10k sequences.
int default_min_count(std::size_t num_sequences) noexcept;

// --- datasets -------------------------------------------------------------

struct PairText {
  std::string hate_speech;
  std::string counter_speech;
  std::string id;
};

struct PairRecord {
  TokenSequence hate;
  TokenSequence counter;
  std::string source_id;
};

enum class Label { kNegative = 0, kPositive = 1 };

std::string_view to_string(Label label);

struct AttributeText {
  std::string text;
  Label label = Label::kNegative;
};

struct AttributeRecord {
  TokenSequence text;
  Label label = Label::kNegative;
};

// Line-delimited JSON: {"hate_speech": ..., "counter_speech": ..., "id": ...}.
// Blank lines are skipped. Errors name the 1-based line number.
std::vector<PairText> parse_pairs(std::istream& in);
std::vector<PairText> load_pairs(const std::filesystem::path& path);

// Line-delimited JSON: {"text": ..., "label": "positive"|"negative"}.
std::vector<AttributeText> parse_attributes(std::istream& in);
std::vector<AttributeText> load_attributes(const std::filesystem::path& path);

PairRecord encode(const PairText& pair, const Vocabulary& vocab);
AttributeRecord encode(const AttributeText& record, const Vocabulary& vocab);

// --- splitting ------------------------------------------------------------

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
  bool stratified = false;

  void validate() const;
};

// Largest-remainder allocation of `count` items over the three fractions.
std::array<std::size_t, 3> split_sizes(std::size_t count,
                                       const SplitSpec& spec);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Deterministic shuffled partition of 0..count-1. When `spec.stratified`,
// `labels` must hold one label per item and each split keeps the global
// positive ratio to within one record.
SplitIndices split_indices(std::size_t count, const SplitSpec& spec,
                           std::span<const Label> labels = {});

template <typename Record>
struct Partition {
  std::vector<Record> train;
  std::vector<Record> validation;
  std::vector<Record> test;
};

template <typename Record>
Partition<Record> split(const std::vector<Record>& records,
                        const SplitSpec& spec) {
  std::vector<Label> labels;
  if constexpr (requires(const Record& r) { r.label; }) {
    labels.reserve(records.size());
    for (const auto& r : records) labels.push_back(r.label);
  }
  const SplitIndices idx = split_indices(records.size(), spec, labels);
  Partition<Record> out;
  auto gather = [&](const std::vector<std::size_t>& from,
                    std::vector<Record>& to) {
    to.reserve(from.size());
    for (std::size_t i : from) to.push_back(records[i]);
  };
  gather(idx.train, out.train);
  gather(idx.validation, out.validation);
  gather(idx.test, out.test);
  return out;
}

}  // namespace guidedgen

#endif  // GUIDEDGEN_CORPUS_H_
