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


// A directory of trained models: one vocabulary, base dialogue models and
// attribute models (each with its discriminator, posterior settings, steering
// direction and bag-of-words scorer), described by manifest.json.

#ifndef GUIDEDGEN_REGISTRY_H_
#define GUIDEDGEN_REGISTRY_H_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "guidedgen/corpus.h"
#include "guidedgen/decoder.h"
#include "guidedgen/metrics.h"
#include "guidedgen/ngram_model.h"
#include "guidedgen/posterior.h"

namespace guidedgen {

inline constexpr std::string_view kManifestSchema = "guidedgen-models/1";

struct BaseEntry {
  std::string name;
  std::shared_ptr<const NgramModel> model;
  std::string corpus_id;
};

struct AttributeEntry {
  std::string name;
  std::shared_ptr<const NgramModel> model;
  PosteriorConfig posterior;
  Direction direction = Direction::kTowardPositive;
  std::shared_ptr<const BowScorer> scorer;
  std::string corpus_id;

  // Scorer output oriented so that higher means more of the steered-toward
  // class: 1 - score for toward-negative attributes.
  double score(std::string_view text) const;

  AttributeControl control(double omega) const;
};

// Immutable once built; share through shared_ptr<const ModelRegistry>.
class ModelRegistry {
 public:
  ModelRegistry() = default;
  explicit ModelRegistry(std::shared_ptr<const Vocabulary> vocab);

  // Loads models_dir/manifest.json and every file it lists.
  static ModelRegistry load(const std::filesystem::path& models_dir);

  // Writes the vocabulary, every model and scorer, and the manifest.
  void save(const std::filesystem::path& models_dir) const;

  void add_base(BaseEntry entry);
  void add_attribute(AttributeEntry entry);

  bool empty() const noexcept { return bases_.empty() && attributes_.empty(); }
  const Vocabulary& vocab() const;
  const std::vector<BaseEntry>& bases() const noexcept { return bases_; }
  const std::vector<AttributeEntry>& attributes() const noexcept {
    return attributes_;
  }
  const BaseEntry* find_base(std::string_view name) const;
  const AttributeEntry* find_attribute(std::string_view name) const;

  // Hash of the manifest, which records a content hash of every file.
  std::string fingerprint() const;
  nlohmann::json manifest() const;

 private:
  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<BaseEntry> bases_;
  std::vector<AttributeEntry> attributes_;
};

}  // namespace guidedgen

#endif  // GUIDEDGEN_REGISTRY_H_
