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

#include "guidedgen/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace guidedgen {
namespace {

constexpr std::array<std::string_view, kNumReserved> kReservedSurfaces = {
    "<pad>", "<unk>", "<bos>", "<eos>", "<sep>"};

constexpr std::string_view kVocabMagic = "guidedgen-vocab";

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_punct(unsigned char c) {
  return c < 0x80 && std::ispunct(c) != 0;
}

bool attaches_left(std::string_view tok) {
  return tok.size() == 1 &&
         std::string_view(",.!?;:)]}%").find(tok[0]) != std::string_view::npos;
}

bool opens(std::string_view tok) {
  return tok.size() == 1 &&
         std::string_view("([{").find(tok[0]) != std::string_view::npos;
}

void shuffle(std::vector<std::size_t>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

// Largest-remainder split of `total` items in proportion to `weights`
// (exact integer arithmetic). Ties go to the lower index.
std::array<std::size_t, 3> apportion(std::size_t total,
                                     const std::array<std::size_t, 3>& weights,
                                     std::size_t weight_sum) {
  std::array<std::size_t, 3> out{};
  std::array<std::size_t, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const auto num = static_cast<unsigned __int128>(total) * weights[s];
    out[s] = static_cast<std::size_t>(num / weight_sum);
    rem[s] = static_cast<std::size_t>(num % weight_sum);
    assigned += out[s];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) {
    ++out[order[k % 3]];
  }
  return out;
}

const nlohmann::json& require_string(const nlohmann::json& obj,
                                     const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    fail(ErrorCode::kInvalidArgument,
         "line " + std::to_string(line) + ": missing " + field);
  }
  return *it;
}

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return is_space(c); })) {
      continue;
    }
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      fail(ErrorCode::kInvalidArgument,
           "line " + std::to_string(line_no) + ": malformed record");
    }
    fn(obj, line_no);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

}  // namespace

// --- Vocabulary ------------------------------------------------------------

Vocabulary::Vocabulary() {
  hash_ = kFnvOffsetBasis;
  for (auto s : kReservedSurfaces) add(std::string(s));
}

void Vocabulary::add(std::string surface) {
  if (surface.empty() || surface.find('\n') != std::string::npos) {
    fail(ErrorCode::kInvalidArgument, "invalid vocabulary token");
  }
  const auto id = static_cast<TokenId>(tokens_.size());
  if (!index_.emplace(surface, id).second) {
    fail(ErrorCode::kInvalidArgument, "duplicate vocabulary token: " + surface);
  }
  hash_ = fnv1a64(surface, hash_);
  hash_ = fnv1a64("\n", hash_);
  tokens_.push_back(std::move(surface));
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens) {
  Vocabulary v;
  for (const auto& t : tokens) v.add(t);
  return v;
}

TokenId Vocabulary::id(std::string_view surface) const {
  return find(surface).value_or(kUnkId);
}

std::optional<TokenId> Vocabulary::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (!contains(id)) {
    fail(ErrorCode::kInvalidArgument,
         "token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::write(std::ostream& out) const {
  out << kVocabMagic << ' ' << kVocabFormatVersion << '\n';
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) {
    fail(ErrorCode::kDataLoss, "vocabulary: missing header");
  }
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  hs >> magic >> version;
  if (magic != kVocabMagic) fail(ErrorCode::kDataLoss, "vocabulary: bad header");
  if (version != kVocabFormatVersion) {
    fail(ErrorCode::kDataLoss,
         "vocabulary: unsupported format version " + std::to_string(version));
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < static_cast<std::size_t>(kNumReserved)) {
    fail(ErrorCode::kDataLoss, "vocabulary: reserved tokens missing");
  }
  for (std::size_t i = 0; i < kReservedSurfaces.size(); ++i) {
    if (lines[i] != kReservedSurfaces[i]) {
      fail(ErrorCode::kDataLoss, "vocabulary: reserved token mismatch");
    }
  }
  return from_tokens(std::span(lines).subspan(kNumReserved));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write(out);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read(in);
}

bool is_reserved(TokenId id) noexcept { return id >= 0 && id < kNumReserved; }

// --- tokenization ------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : text) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else if (c < 0x80) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      word.push_back(static_cast<char>(c));
    }
  }
  flush();
  return out;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab,
                       SequenceRole role) {
  TokenSequence seq;
  seq.role = role;
  for (const auto& t : tokenize(text)) seq.ids.push_back(vocab.id(t));
  return seq;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  bool after_open = false;
  for (const auto& t : tokens) {
    if (!out.empty() && !attaches_left(t) && !after_open) out.push_back(' ');
    out += t;
    after_open = opens(t);
  }
  return out;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> surfaces;
  surfaces.reserve(ids.size());
  for (TokenId id : ids) {
    if (id == kPadId || id == kBosId || id == kEosId || id == kSepId) continue;
    surfaces.push_back(vocab.token(id));
  }
  return detokenize(surfaces);
}

Vocabulary build_vocab(std::span<const std::vector<std::string>> corpus,
                       int min_count) {
  if (min_count < 1) {
    fail(ErrorCode::kInvalidArgument, "build_vocab: min_count must be >= 1");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpus) {
    for (const auto& t : seq) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n < static_cast<std::size_t>(min_count)) continue;
    if (std::find(kReservedSurfaces.begin(), kReservedSurfaces.end(), tok) !=
        kReservedSurfaces.end()) {
      continue;
    }
    kept.emplace_back(tok, n);
  }
  // `counts` is already lexicographic, so a stable sort on count suffices.
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary::from_tokens(tokens);
}

int default_min_count(std::size_t num_sequences) noexcept {
  return num_sequences > 10000 ? 2 : 1;
}

// --- datasets ----------------------------------------------------------------

std::string_view to_string(Label label) {
  return label == Label::kPositive ? "positive" : "negative";
}

std::vector<PairText> parse_pairs(std::istream& in) {
  std::vector<PairText> out;
  for_each_record(in, [&](const nlohmann::json& obj, std::size_t line) {
    PairText p;
    p.hate_speech = require_string(obj, "hate_speech", line).get<std::string>();
    p.counter_speech =
        require_string(obj, "counter_speech", line).get<std::string>();
    if (auto it = obj.find("id"); it != obj.end() && !it->is_null()) {
      p.id = it->is_string() ? it->get<std::string>() : it->dump();
    } else {
      p.id = "line-" + std::to_string(line);
    }
    if (tokenize(p.hate_speech).empty()) {
      fail(ErrorCode::kInvalidArgument,
           "line " + std::to_string(line) + ": empty hate_speech");
    }
    if (tokenize(p.counter_speech).empty()) {
      fail(ErrorCode::kInvalidArgument,
           "line " + std::to_string(line) + ": empty counter_speech");
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<PairText> load_pairs(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_pairs(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<AttributeText> parse_attributes(std::istream& in) {
  std::vector<AttributeText> out;
  for_each_record(in, [&](const nlohmann::json& obj, std::size_t line) {
    AttributeText r;
    r.text = require_string(obj, "text", line).get<std::string>();
    const auto label = require_string(obj, "label", line).get<std::string>();
    if (label == "positive") {
      r.label = Label::kPositive;
    } else if (label == "negative") {
      r.label = Label::kNegative;
    } else {
      fail(ErrorCode::kInvalidArgument,
           "line " + std::to_string(line) + ": invalid label \"" + label + "\"");
    }
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<AttributeText> load_attributes(const std::filesystem::path& path) {
  auto in = open_input(path);
  try {
    return parse_attributes(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

PairRecord encode(const PairText& pair, const Vocabulary& vocab) {
  return PairRecord{tokenize(pair.hate_speech, vocab, SequenceRole::kPrompt),
                    tokenize(pair.counter_speech, vocab, SequenceRole::kResponse),
                    pair.id};
}

AttributeRecord encode(const AttributeText& record, const Vocabulary& vocab) {
  return AttributeRecord{tokenize(record.text, vocab), record.label};
}

// --- splitting -----------------------------------------------------------------

void SplitSpec::validate() const {
  for (double f : {train, validation, test}) {
    if (!(f > 0.0 && f < 1.0)) {
      fail(ErrorCode::kInvalidArgument, "split fractions must lie in (0, 1)");
    }
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidArgument, "split fractions must sum to 1");
  }
}

std::array<std::size_t, 3> split_sizes(std::size_t count,
                                       const SplitSpec& spec) {
  spec.validate();
  // Fractions are quantized to parts-per-billion so the allocation itself is
  // exact integer arithmetic.
  constexpr double kScale = 1e9;
  std::array<std::size_t, 3> weights{};
  const std::array<double, 3> fractions{spec.train, spec.validation, spec.test};
  std::size_t sum = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    weights[s] = static_cast<std::size_t>(std::llround(fractions[s] * kScale));
    sum += weights[s];
  }
  return apportion(count, weights, sum);
}

SplitIndices split_indices(std::size_t count, const SplitSpec& spec,
                           std::span<const Label> labels) {
  const auto sizes = split_sizes(count, spec);
  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.validation,
                                                 &out.test};

  if (!spec.stratified) {
    std::vector<std::size_t> perm(count);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(spec.seed, 0);
    shuffle(perm, rng);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      parts[s]->assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                       perm.begin() + static_cast<std::ptrdiff_t>(pos + sizes[s]));
      pos += sizes[s];
    }
    return out;
  }

  if (labels.size() != count) {
    fail(ErrorCode::kInvalidArgument,
         "stratified split requires one label per record");
  }
  std::vector<std::size_t> positives, negatives;
  for (std::size_t i = 0; i < count; ++i) {
    (labels[i] == Label::kPositive ? positives : negatives).push_back(i);
  }
  Rng pos_rng(spec.seed, 1);
  Rng neg_rng(spec.seed, 2);
  shuffle(positives, pos_rng);
  shuffle(negatives, neg_rng);

  const auto pos_sizes =
      count == 0 ? std::array<std::size_t, 3>{}
                 : apportion(positives.size(), sizes, count);
  std::size_t pi = 0, ni = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    auto& part = *parts[s];
    for (std::size_t k = 0; k < pos_sizes[s]; ++k) part.push_back(positives[pi++]);
    for (std::size_t k = pos_sizes[s]; k < sizes[s]; ++k) {
      part.push_back(negatives[ni++]);
    }
    Rng mix(spec.seed, 3 + s);
    shuffle(part, mix);
  }
  return out;
}

}  // namespace guidedgen
