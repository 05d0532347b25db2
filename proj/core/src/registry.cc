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


#include "guidedgen/registry.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace guidedgen {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  if (!out) fail(ErrorCode::kIo, "write failed: " + path.string());
}

std::string content_hash(const std::string& content) {
  return hex64(fnv1a64(content));
}

template <typename T>
std::string to_text(const T& object) {
  std::ostringstream ss;
  object.write(ss);
  return ss.str();
}

// Reads `file` from `dir`, checking its recorded content hash.
std::string checked_read(const fs::path& dir, const json& entry,
                         const char* file_key, const char* hash_key) {
  const auto name = entry.at(file_key).get<std::string>();
  if (name.empty() || fs::path(name).has_parent_path()) {
    fail(ErrorCode::kDataLoss, "manifest: bad file name '" + name + "'");
  }
  std::string content = read_file(dir / name);
  if (content_hash(content) != entry.at(hash_key).get<std::string>()) {
    fail(ErrorCode::kDataLoss, "manifest: content hash mismatch for " + name);
  }
  return content;
}

// Names double as file stems.
void check_name(const std::string& name) {
  const bool ok = !name.empty() && name.size() <= 64 &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                           c == '_' || c == '-';
                  });
  if (!ok) {
    fail(ErrorCode::kInvalidArgument,
         "model name '" + name + "' must match [a-z0-9_-]{1,64}");
  }
}

json model_metadata(const NgramModel& m) {
  return {{"order", m.order()},
          {"smoothing", to_string(m.config().smoothing)},
          {"context_window", m.config().context_window}};
}

}  // namespace

double AttributeEntry::score(std::string_view text) const {
  const double s = scorer->score(text);
  return direction == Direction::kTowardPositive ? s : 1.0 - s;
}

AttributeControl AttributeEntry::control(double omega) const {
  return {name, model, posterior, omega, direction};
}

ModelRegistry::ModelRegistry(std::shared_ptr<const Vocabulary> vocab)
    : vocab_(std::move(vocab)) {}

const Vocabulary& ModelRegistry::vocab() const {
  if (!vocab_) fail(ErrorCode::kFailedPrecondition, "registry has no vocabulary");
  return *vocab_;
}

void ModelRegistry::add_base(BaseEntry entry) {
  check_name(entry.name);
  if (!entry.model || entry.model->conditioning() != Conditioning::kUnconditioned) {
    fail(ErrorCode::kInvalidArgument, "base model " + entry.name + " must be unconditioned");
  }
  if (entry.model->vocab_hash() != vocab().hash()) {
    fail(ErrorCode::kFailedPrecondition, "base model " + entry.name + " uses a different vocabulary");
  }
  if (find_base(entry.name) != nullptr) {
    fail(ErrorCode::kInvalidArgument, "duplicate base model " + entry.name);
  }
  bases_.push_back(std::move(entry));
}

void ModelRegistry::add_attribute(AttributeEntry entry) {
  check_name(entry.name);
  if (!entry.model || entry.model->conditioning() != Conditioning::kConditioned) {
    fail(ErrorCode::kInvalidArgument,
         "attribute model " + entry.name + " must be class-conditioned");
  }
  if (!entry.scorer) fail(ErrorCode::kInvalidArgument, "attribute " + entry.name + " has no scorer");
  if (entry.model->vocab_hash() != vocab().hash()) {
    fail(ErrorCode::kFailedPrecondition,
         "attribute model " + entry.name + " uses a different vocabulary");
  }
  entry.posterior.validate();
  if (find_attribute(entry.name) != nullptr) {
    fail(ErrorCode::kInvalidArgument, "duplicate attribute " + entry.name);
  }
  attributes_.push_back(std::move(entry));
}

const BaseEntry* ModelRegistry::find_base(std::string_view name) const {
  for (const auto& b : bases_) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

const AttributeEntry* ModelRegistry::find_attribute(std::string_view name) const {
  for (const auto& a : attributes_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

json ModelRegistry::manifest() const {
  json m = {{"schema", kManifestSchema}};
  m["vocab"] = vocab_ ? json{{"file", "vocab.txt"}, {"hash", content_hash(to_text(*vocab_))}}
                      : json(nullptr);
  m["bases"] = json::array();
  for (const auto& b : bases_) {
    json e = {{"name", b.name},
              {"file", b.name + ".ngram"},
              {"hash", content_hash(b.model->serialize())},
              {"corpus_id", b.corpus_id}};
    e.update(model_metadata(*b.model));
    m["bases"].push_back(std::move(e));
  }
  m["attributes"] = json::array();
  for (const auto& a : attributes_) {
    json e = {{"name", a.name},
              {"file", a.name + ".ngram"},
              {"hash", content_hash(a.model->serialize())},
              {"scorer", a.name + ".bow"},
              {"scorer_hash", content_hash(to_text(*a.scorer))},
              {"direction", to_string(a.direction)},
              {"alpha", a.posterior.alpha},
              {"prior", a.posterior.prior_pos},
              {"corpus_id", a.corpus_id}};
    e.update(model_metadata(*a.model));
    m["attributes"].push_back(std::move(e));
  }
  return m;
}

std::string ModelRegistry::fingerprint() const {
  return content_hash(manifest().dump());
}

void ModelRegistry::save(const fs::path& dir) const {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  if (vocab_) write_file(dir / "vocab.txt", to_text(*vocab_));
  for (const auto& b : bases_) write_file(dir / (b.name + ".ngram"), b.model->serialize());
  for (const auto& a : attributes_) {
    write_file(dir / (a.name + ".ngram"), a.model->serialize());
    write_file(dir / (a.name + ".bow"), to_text(*a.scorer));
  }
  write_file(dir / "manifest.json", manifest().dump(2) + "\n");
}

ModelRegistry ModelRegistry::load(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    fail(ErrorCode::kNotFound, "no manifest.json in " + dir.string());
  }
  try {
    const json m = json::parse(read_file(manifest_path));
    if (m.at("schema") != kManifestSchema) {
      fail(ErrorCode::kDataLoss, "manifest: unsupported schema");
    }
    if (m.at("vocab").is_null()) {
      if (!m.at("bases").empty() || !m.at("attributes").empty()) {
        fail(ErrorCode::kDataLoss, "manifest: models without a vocabulary");
      }
      return ModelRegistry();
    }
    std::istringstream vs(checked_read(dir, m.at("vocab"), "file", "hash"));
    auto vocab = std::make_shared<const Vocabulary>(Vocabulary::read(vs));
    ModelRegistry r(vocab);
    for (const auto& e : m.at("bases")) {
      std::istringstream ms(checked_read(dir, e, "file", "hash"));
      r.add_base({e.at("name").get<std::string>(),
                  std::make_shared<const NgramModel>(NgramModel::read(ms, *vocab)),
                  e.at("corpus_id").get<std::string>()});
    }
    for (const auto& e : m.at("attributes")) {
      std::istringstream ms(checked_read(dir, e, "file", "hash"));
      std::istringstream ss(checked_read(dir, e, "scorer", "scorer_hash"));
      AttributeEntry a;
      a.name = e.at("name").get<std::string>();
      a.model = std::make_shared<const NgramModel>(NgramModel::read(ms, *vocab));
      a.posterior = {e.at("alpha").get<double>(), e.at("prior").get<double>()};
      a.direction = parse_direction(e.at("direction").get<std::string>());
      a.scorer = std::make_shared<const BowScorer>(BowScorer::read(ss));
      a.corpus_id = e.at("corpus_id").get<std::string>();
      r.add_attribute(std::move(a));
    }
    return r;
  } catch (const json::exception& e) {
    fail(ErrorCode::kDataLoss, "manifest: " + std::string(e.what()));
  }
}

}  // namespace guidedgen
