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


// Batch experiment pipeline driven by one spec file: train the base and
// attribute models, generate candidates for the test prompts under named
// control sets, evaluate them, and run the leave-one-attribute-out ablation.
//
// Output layout under the experiment's output directory:
//   models/      vocabulary, models, scorers, manifest.json
//   candidates/  <set>-<hash>.jsonl, one record per candidate
//   reports/     train_report.json, eval.json, eval_table.txt, ablation.json

#ifndef GUIDEDGEN_EXPERIMENT_H_
#define GUIDEDGEN_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "guidedgen/corpus.h"
#include "guidedgen/decoder.h"
#include "guidedgen/loss.h"
#include "guidedgen/metrics.h"
#include "guidedgen/ngram_model.h"
#include "guidedgen/registry.h"
#include "guidedgen/synthetic.h"

namespace guidedgen {

inline constexpr std::string_view kExperimentSchema = "guidedgen-experiment/1";

struct ModelSpec {
  int order = 3;
  int context_window = 128;
  // Candidates for smoothing selection; the first wins ties.
  std::vector<Smoothing> smoothing_grid{AddK{0.1}};
};

struct AttributeSpec {
  std::string name;
  std::filesystem::path data;
  Direction direction = Direction::kTowardPositive;
  ModelSpec model;
  double alpha = 1.0;
  std::optional<double> prior;  // empirical training-split rate when unset
};

struct ControlSet {
  std::string name;
  std::vector<std::pair<std::string, double>> weights;
};

struct ExperimentSpec {
  std::filesystem::path pairs;
  SplitSpec split;
  std::optional<int> min_count;
  ModelSpec base;
  std::vector<AttributeSpec> attributes;
  LossConfig loss;
  std::vector<ControlSet> control_sets;
  GenerationConfig generation;
  std::size_t max_prompts = 0;  // 0 means every test prompt
  std::filesystem::path out;

  // Relative paths resolve against `base_dir`.
  static ExperimentSpec from_json(const nlohmann::ordered_json& j,
                                  const std::filesystem::path& base_dir);
  static ExperimentSpec load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;

  // Paths exist, names unique, control sets reference known attributes.
  void validate() const;

  // Throws kNotFound listing the available names.
  const ControlSet& control_set(std::string_view name) const;

  std::filesystem::path models_dir() const { return out / "models"; }
  std::filesystem::path candidates_dir() const { return out / "candidates"; }
  std::filesystem::path reports_dir() const { return out / "reports"; }
};

struct TrainSummary {
  std::filesystem::path models_dir;
  std::filesystem::path report;
  nlohmann::json report_json;
};

TrainSummary cmd_train(const ExperimentSpec& spec);

struct GenerateSummary {
  std::filesystem::path file;
  std::size_t prompts = 0;
  std::size_t candidates = 0;
};

// Uses spec.generation (its seed included) and the named control set.
GenerateSummary cmd_generate(const ExperimentSpec& spec,
                             std::string_view control_set);

// Generation for an explicit control set, written under `dir`.
GenerateSummary generate_candidates(const ExperimentSpec& spec,
                                    const ModelRegistry& registry,
                                    const ControlSet& set,
                                    const std::filesystem::path& dir);

struct EvalSummary {
  std::vector<std::pair<std::string, MetricsReport>> reports;  // by set
  std::string table;
};

// Evaluates candidate files, or every file in candidates/ when `files` is
// empty. Writes reports/eval.json and reports/eval_table.txt.
EvalSummary cmd_eval(const ExperimentSpec& spec,
                     std::vector<std::filesystem::path> files);

struct AblationRow {
  std::string subset;   // e.g. "joy+polite"
  std::string dropped;  // the attribute left out
  double dropped_score = 0.0;
  double full_score = 0.0;  // same attribute under the full set
  std::string scorer_hash;
};

struct AblationSummary {
  std::string full_set;
  std::vector<AblationRow> rows;
  std::string table;
};

// Leave-one-out over a three-attribute control set (the named one, or the
// first with three attributes): each pair runs at 0.5/0.5 and the dropped
// attribute is scored. Writes reports/ablation.json.
AblationSummary cmd_ablate(const ExperimentSpec& spec,
                           std::optional<std::string> control_set);

// Writes synthetic corpora under dir/data and a ready-to-run dir/spec.json.
std::filesystem::path write_demo_workspace(const std::filesystem::path& dir,
                                           const SyntheticOptions& options);

}  // namespace guidedgen

#endif  // GUIDEDGEN_EXPERIMENT_H_
