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


// Deterministic synthetic corpora: hate/counter-speech pairs plus three
// attribute datasets (politeness, toxicity, joy) built from small word pools
// that overlap through a shared neutral pool. Used by the demo workspace and
// by tests that need a complete, reproducible experiment.

#ifndef GUIDEDGEN_SYNTHETIC_H_
#define GUIDEDGEN_SYNTHETIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "guidedgen/corpus.h"
#include "guidedgen/decoder.h"

namespace guidedgen {

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t pairs = 400;
  std::size_t attribute_records = 600;  // per attribute, half of each label
};

struct SyntheticAttribute {
  std::string name;       // control name, e.g. "polite"
  std::string dataset;    // file stem, e.g. "politeness"
  Direction direction = Direction::kTowardPositive;
  std::vector<AttributeText> records;
};

struct SyntheticCorpora {
  std::vector<PairText> pairs;
  std::vector<SyntheticAttribute> attributes;  // polite, detox, joy
};

SyntheticCorpora make_synthetic_corpora(const SyntheticOptions& options);

}  // namespace guidedgen

#endif  // GUIDEDGEN_SYNTHETIC_H_
