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

#include "guidedgen/ngram_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace guidedgen {
namespace {

constexpr std::string_view kModelMagic = "guidedgen-ngram";

[[noreturn]] void corrupt(const std::string& what) {
  fail(ErrorCode::kDataLoss, "model file: " + what);
}

std::string expect_line(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) corrupt("missing " + std::string(key));
  if (line.rfind(key, 0) != 0 || line.size() <= key.size() ||
      line[key.size()] != ' ') {
    corrupt("expected " + std::string(key));
  }
  return line.substr(key.size() + 1);
}

}  // namespace

std::string to_string(const Smoothing& smoothing) {
  if (const auto* a = std::get_if<AddK>(&smoothing)) {
    return "add-k:" + format_double(a->k);
  }
  return "discount:" + format_double(std::get<AbsoluteDiscount>(smoothing).discount);
}

Smoothing parse_smoothing(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    fail(ErrorCode::kInvalidArgument, "smoothing: expected kind:value, got " + text);
  }
  const std::string kind = text.substr(0, colon);
  double value = 0.0;
  try {
    std::size_t used = 0;
    value = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    fail(ErrorCode::kInvalidArgument, "smoothing: bad value in " + text);
  }
  if (kind == "add-k") return AddK{value};
  if (kind == "discount") return AbsoluteDiscount{value};
  fail(ErrorCode::kInvalidArgument, "smoothing: unknown kind " + kind);
}

void NgramConfig::validate() const {
  if (order < 1) fail(ErrorCode::kInvalidArgument, "ngram order must be >= 1");
  if (context_window < 0) {
    fail(ErrorCode::kInvalidArgument, "context_window must be >= 0");
  }
  if (const auto* a = std::get_if<AddK>(&smoothing)) {
    if (!(a->k > 0.0) || !std::isfinite(a->k)) {
      fail(ErrorCode::kInvalidArgument, "add-k smoothing requires k > 0");
    }
  } else {
    const double d = std::get<AbsoluteDiscount>(smoothing).discount;
    if (!(d > 0.0 && d <= 1.0)) {
      fail(ErrorCode::kInvalidArgument, "discount must lie in (0, 1]");
    }
  }
}

NgramModel::NgramModel(NgramConfig config, Conditioning conditioning,
                       std::size_t vocab_size, std::uint64_t vocab_hash)
    : config_(std::move(config)),
      conditioning_(conditioning),
      vocab_size_(vocab_size),
      vocab_hash_(vocab_hash),
      tables_(conditioning == Conditioning::kConditioned ? 2 : 1) {
  config_.validate();
}

std::size_t NgramModel::table_index(std::optional<ControlCode> code) const {
  if (conditioning_ == Conditioning::kConditioned) {
    if (!code) {
      fail(ErrorCode::kInvalidArgument,
           "conditioned model queried without a control code");
    }
    return static_cast<std::size_t>(*code);
  }
  if (code) {
    fail(ErrorCode::kInvalidArgument,
         "unconditioned model queried with a control code");
  }
  return 0;
}

const NgramModel::Table& NgramModel::table(
    std::optional<ControlCode> code) const {
  return tables_[table_index(code)];
}

std::size_t NgramModel::context_length(std::size_t history_size) const {
  const auto max_ctx = static_cast<std::size_t>(
      std::min(config_.order - 1, config_.context_window));
  return std::min(max_ctx, history_size);
}

void NgramModel::fill(const Table& table, std::span<const TokenId> context,
                      std::span<double> out) const {
  const auto v = static_cast<double>(vocab_size_);
  if (const auto* add_k = std::get_if<AddK>(&config_.smoothing)) {
    const std::vector<TokenId> key(context.begin(), context.end());
    auto it = table.find(key);
    if (it == table.end() || it->second.total == 0) {
      std::fill(out.begin(), out.end(), -std::log(v));
      return;
    }
    const double k = add_k->k;
    const double log_denom =
        std::log(static_cast<double>(it->second.total) + k * v);
    std::fill(out.begin(), out.end(), std::log(k) - log_denom);
    for (const auto& [tok, c] : it->second.next) {
      out[static_cast<std::size_t>(tok)] =
          std::log(static_cast<double>(c) + k) - log_denom;
    }
    return;
  }

  const double d = std::get<AbsoluteDiscount>(config_.smoothing).discount;
  std::fill(out.begin(), out.end(), 1.0 / v);
  std::vector<TokenId> key;
  for (std::size_t len = 0; len <= context.size(); ++len) {
    key.assign(context.end() - static_cast<std::ptrdiff_t>(len), context.end());
    auto it = table.find(key);
    if (it == table.end() || it->second.total == 0) continue;
    const auto total = static_cast<double>(it->second.total);
    const double backoff =
        d * static_cast<double>(it->second.next.size()) / total;
    for (double& p : out) p *= backoff;
    for (const auto& [tok, c] : it->second.next) {
      out[static_cast<std::size_t>(tok)] +=
          std::max(static_cast<double>(c) - d, 0.0) / total;
    }
  }
  for (double& p : out) p = std::log(p);
}

std::vector<double> NgramModel::next_logprobs(
    std::span<const TokenId> history, std::optional<ControlCode> code) const {
  std::vector<double> out(vocab_size_);
  next_logprobs(history, code, out);
  return out;
}

void NgramModel::next_logprobs(std::span<const TokenId> history,
                               std::optional<ControlCode> code,
                               std::span<double> out) const {
  if (out.size() != vocab_size_) {
    fail(ErrorCode::kInvalidArgument, "next_logprobs: output size mismatch");
  }
  const Table& t = table(code);
  // Context is the tail of BOS + history.
  const std::size_t len = context_length(history.size() + 1);
  std::vector<TokenId> context;
  context.reserve(len);
  if (len > history.size()) context.push_back(kBosId);
  const std::size_t from_history = std::min(len, history.size());
  context.insert(context.end(), history.end() - static_cast<std::ptrdiff_t>(from_history),
                 history.end());
  fill(t, context, out);
}

double NgramModel::token_logprob(std::span<const TokenId> history,
                                 TokenId token,
                                 std::optional<ControlCode> code) const {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab_size_) {
    fail(ErrorCode::kInvalidArgument, "token id out of range");
  }
  // Dense fill is O(|V|) and keeps a single code path for both smoothers.
  return next_logprobs(history, code)[static_cast<std::size_t>(token)];
}

double NgramModel::sequence_logprob(std::span<const TokenId> seq,
                                    std::optional<ControlCode> code,
                                    std::span<const TokenId> prefix) const {
  std::vector<TokenId> history(prefix.begin(), prefix.end());
  history.reserve(prefix.size() + seq.size());
  std::vector<double> dist(vocab_size_);
  double total = 0.0;
  for (TokenId tok : seq) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= vocab_size_) {
      fail(ErrorCode::kInvalidArgument, "token id out of range");
    }
    next_logprobs(history, code, dist);
    total += dist[static_cast<std::size_t>(tok)];
    history.push_back(tok);
  }
  return total;
}

// --- serialization -----------------------------------------------------------

void NgramModel::write(std::ostream& out) const {
  out << kModelMagic << ' ' << kModelFormatVersion << '\n';
  out << "order " << config_.order << '\n';
  out << "smoothing " << to_string(config_.smoothing) << '\n';
  out << "context_window " << config_.context_window << '\n';
  out << "conditioning "
      << (conditioning_ == Conditioning::kConditioned ? "conditioned"
                                                      : "unconditioned")
      << '\n';
  out << "vocab_size " << vocab_size_ << '\n';
  out << "vocab_hash " << hex64(vocab_hash_) << '\n';
  out << "tables " << tables_.size() << '\n';
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    out << "table " << i << ' ' << tables_[i].size() << '\n';
    for (const auto& [ctx, counts] : tables_[i]) {
      out << ctx.size();
      for (TokenId t : ctx) out << ' ' << t;
      out << " | " << counts.total << " |";
      for (const auto& [tok, c] : counts.next) out << ' ' << tok << ':' << c;
      out << '\n';
    }
  }
}

std::string NgramModel::serialize() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

NgramModel NgramModel::read(std::istream& in, const Vocabulary& vocab) {
  std::string header;
  if (!std::getline(in, header)) corrupt("empty");
  {
    std::istringstream hs(header);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != kModelMagic) corrupt("bad header");
    if (version != kModelFormatVersion) {
      corrupt("unsupported format version " + std::to_string(version));
    }
  }
  NgramConfig config;
  try {
    config.order = std::stoi(expect_line(in, "order"));
    config.smoothing = parse_smoothing(expect_line(in, "smoothing"));
    config.context_window = std::stoi(expect_line(in, "context_window"));
  } catch (const std::logic_error&) {
    corrupt("bad config field");
  }
  const std::string cond = expect_line(in, "conditioning");
  Conditioning conditioning;
  if (cond == "conditioned") {
    conditioning = Conditioning::kConditioned;
  } else if (cond == "unconditioned") {
    conditioning = Conditioning::kUnconditioned;
  } else {
    corrupt("bad conditioning " + cond);
  }
  const std::size_t vocab_size = std::stoul(expect_line(in, "vocab_size"));
  const std::string hash = expect_line(in, "vocab_hash");
  if (hash != hex64(vocab.hash()) || vocab_size != vocab.size()) {
    fail(ErrorCode::kFailedPrecondition,
         "model vocabulary hash " + hash + " does not match vocabulary " +
             hex64(vocab.hash()));
  }
  NgramModel model(config, conditioning, vocab_size, vocab.hash());
  const std::size_t num_tables = std::stoul(expect_line(in, "tables"));
  if (num_tables != model.tables_.size()) corrupt("table count mismatch");

  auto check_id = [&](long long id) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      corrupt("token id out of range");
    }
    return static_cast<TokenId>(id);
  };
  for (std::size_t i = 0; i < num_tables; ++i) {
    std::istringstream th(expect_line(in, "table"));
    std::size_t index = 0, rows = 0;
    if (!(th >> index >> rows) || index != i) corrupt("bad table header");
    Table& table = model.tables_[i];
    std::string line;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) corrupt("truncated table");
      std::istringstream ls(line);
      std::size_t len = 0;
      if (!(ls >> len)) corrupt("bad context row");
      std::vector<TokenId> ctx;
      for (std::size_t j = 0; j < len; ++j) {
        long long id = 0;
        if (!(ls >> id)) corrupt("bad context row");
        ctx.push_back(check_id(id));
      }
      std::string bar;
      ContextCounts counts;
      if (!(ls >> bar >> counts.total >> bar)) corrupt("bad context row");
      std::string entry;
      while (ls >> entry) {
        const auto colon = entry.find(':');
        if (colon == std::string::npos) corrupt("bad count entry");
        try {
          counts.next[check_id(std::stoll(entry.substr(0, colon)))] =
              std::stoull(entry.substr(colon + 1));
        } catch (const std::logic_error&) {
          corrupt("bad count entry");
        }
      }
      table.emplace(std::move(ctx), std::move(counts));
    }
  }
  return model;
}

void NgramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  write(out);
}

NgramModel NgramModel::load(const std::filesystem::path& path,
                            const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return read(in, vocab);
}

// --- training ------------------------------------------------------------------

NgramTrainer::NgramTrainer(const Vocabulary& vocab, NgramConfig config,
                           Conditioning conditioning)
    : model_(std::move(config), conditioning, vocab.size(), vocab.hash()),
      sequences_per_table_(model_.tables_.size(), 0) {}

void NgramTrainer::add(std::span<const TokenId> prefix,
                       std::span<const TokenId> targets,
                       std::optional<ControlCode> code) {
  const std::size_t index = model_.table_index(code);
  auto& table = model_.tables_[index];
  std::vector<TokenId> full;
  full.reserve(prefix.size() + targets.size() + 2);
  full.push_back(kBosId);
  full.insert(full.end(), prefix.begin(), prefix.end());
  full.insert(full.end(), targets.begin(), targets.end());
  full.push_back(kEosId);
  for (TokenId t : full) {
    if (t < 0 || static_cast<std::size_t>(t) >= model_.vocab_size_) {
      fail(ErrorCode::kInvalidArgument, "training token id out of range");
    }
  }
  const std::size_t start = 1 + prefix.size();
  for (std::size_t pos = start; pos < full.size(); ++pos) {
    const std::size_t max_len = model_.context_length(pos);
    for (std::size_t len = 0; len <= max_len; ++len) {
      std::vector<TokenId> key(full.begin() + static_cast<std::ptrdiff_t>(pos - len),
                               full.begin() + static_cast<std::ptrdiff_t>(pos));
      auto& counts = table[std::move(key)];
      ++counts.total;
      ++counts.next[full[pos]];
    }
  }
  ++sequences_per_table_[index];
}

NgramModel NgramTrainer::finish() && {
  for (std::size_t i = 0; i < sequences_per_table_.size(); ++i) {
    if (sequences_per_table_[i] == 0) {
      if (model_.conditioning_ == Conditioning::kConditioned) {
        fail(ErrorCode::kInvalidArgument,
             std::string("no training sequences for control code ") +
                 (i == 1 ? "true" : "false"));
      }
      fail(ErrorCode::kInvalidArgument, "no training sequences");
    }
  }
  return std::move(model_);
}

NgramModel train_cclm(const Vocabulary& vocab,
                      std::span<const CodedSequence> data,
                      const NgramConfig& config) {
  NgramTrainer trainer(vocab, config, Conditioning::kConditioned);
  for (const auto& item : data) trainer.add({}, item.tokens.ids, item.code);
  return std::move(trainer).finish();
}

NgramModel train_base_lm(const Vocabulary& vocab,
                         std::span<const PairRecord> pairs,
                         const NgramConfig& config) {
  NgramTrainer trainer(vocab, config, Conditioning::kUnconditioned);
  for (const auto& p : pairs) {
    std::vector<TokenId> prefix = p.hate.ids;
    prefix.push_back(kSepId);
    trainer.add(prefix, p.counter.ids, std::nullopt);
  }
  return std::move(trainer).finish();
}

std::vector<TokenId> dialogue_history(std::span<const TokenId> prompt,
                                      std::span<const TokenId> generated) {
  std::vector<TokenId> h;
  h.reserve(prompt.size() + 1 + generated.size());
  h.insert(h.end(), prompt.begin(), prompt.end());
  h.push_back(kSepId);
  h.insert(h.end(), generated.begin(), generated.end());
  return h;
}

double perplexity(const NgramModel& model, std::span<const TokenSequence> data,
                  std::optional<ControlCode> code) {
  double logprob = 0.0;
  std::size_t tokens = 0;
  for (const auto& seq : data) {
    logprob += model.sequence_logprob(seq.ids, code);
    tokens += seq.size();
  }
  if (tokens == 0) fail(ErrorCode::kInvalidArgument, "perplexity: no tokens");
  return std::exp(-logprob / static_cast<double>(tokens));
}

double response_perplexity(const NgramModel& base,
                           std::span<const PairRecord> pairs) {
  double logprob = 0.0;
  std::size_t tokens = 0;
  for (const auto& p : pairs) {
    std::vector<TokenId> prefix = p.hate.ids;
    prefix.push_back(kSepId);
    logprob += base.sequence_logprob(p.counter.ids, std::nullopt, prefix);
    tokens += p.counter.size();
  }
  if (tokens == 0) fail(ErrorCode::kInvalidArgument, "perplexity: no tokens");
  return std::exp(-logprob / static_cast<double>(tokens));
}

}  // namespace guidedgen
