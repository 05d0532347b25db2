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

// Hot paths of guided decoding on the synthetic demo models.

#include <unistd.h>

#include <filesystem>
#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "guidedgen/decoder.h"
#include "guidedgen/experiment.h"
#include "guidedgen/registry.h"

namespace guidedgen {
namespace {

namespace fs = std::filesystem;

struct Models {
  std::shared_ptr<const ModelRegistry> registry;
  TokenSequence prompt;

  std::shared_ptr<const NgramModel> base() const {
    return registry->bases().front().model;
  }
  std::vector<AttributeControl> controls(std::size_t n) const {
    const std::vector<std::pair<const char*, double>> triple{
        {"joy", kTripleEmotionWeight}, {"polite", kTripleStyleWeight}, {"detox", kTripleStyleWeight}};
    std::vector<AttributeControl> out;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(registry->find_attribute(triple[i].first)->control(triple[i].second));
    }
    return out;
  }
};

const Models& models() {
  static const Models m = [] {
    const auto dir = fs::temp_directory_path() /
                     ("guidedgen-bench-" + std::to_string(::getpid()));
    const auto spec = ExperimentSpec::load(write_demo_workspace(dir, SyntheticOptions{}));
    cmd_train(spec);
    Models out;
    out.registry = std::make_shared<const ModelRegistry>(ModelRegistry::load(spec.models_dir()));
    out.prompt = tokenize("you are all stupid idiots and nobody wants you here",
                          out.registry->vocab(), SequenceRole::kPrompt);
    fs::remove_all(dir);
    return out;
  }();
  return m;
}

void BM_BaseNextLogprobs(benchmark::State& state) {
  const auto& m = models();
  const auto history = dialogue_history(m.prompt.ids, {});
  std::vector<double> out(m.base()->vocab_size());
  for (auto _ : state) {
    m.base()->next_logprobs(history, std::nullopt, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["vocab"] = static_cast<double>(out.size());
}
BENCHMARK(BM_BaseNextLogprobs);

void BM_Combine(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t vocab = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  std::vector<double> logits(vocab);
  for (auto& x : logits) x = -10.0 * rng.uniform();
  std::vector<std::vector<double>> posts(n, std::vector<double>(vocab));
  for (auto& p : posts) {
    for (auto& x : p) x = 0.01 + 0.98 * rng.uniform();
  }
  std::vector<WeightedPosterior> weighted;
  for (const auto& p : posts) weighted.push_back({p, 1.0 / static_cast<double>(n)});
  for (auto _ : state) {
    auto out = combine(logits, weighted);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Combine)->Args({1, 1000})->Args({3, 1000})->Args({3, 50000});

void BM_SessionStep(benchmark::State& state) {
  const auto& m = models();
  GenerationConfig cfg;
  cfg.warmup_tokens = 0;
  const auto controls = m.controls(static_cast<std::size_t>(state.range(0)));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    DecodingSession s(m.base(), controls, cfg, m.prompt, Rng(seed++));
    benchmark::DoNotOptimize(s.step().token);
  }
}
BENCHMARK(BM_SessionStep)->Arg(0)->Arg(1)->Arg(3);

void BM_GenerateCandidate(benchmark::State& state) {
  const auto& m = models();
  GenerationConfig cfg;
  const auto controls = m.controls(static_cast<std::size_t>(state.range(0)));
  std::size_t index = 0;
  std::int64_t tokens = 0;
  for (auto _ : state) {
    const auto trace = generate_candidate(m.base(), m.prompt, controls, cfg, index++);
    tokens += static_cast<std::int64_t>(trace.tokens.size());
  }
  state.counters["tokens/s"] = benchmark::Counter(static_cast<double>(tokens), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_GenerateCandidate)->Arg(0)->Arg(3);

}  // namespace
}  // namespace guidedgen

BENCHMARK_MAIN();
