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


#include "guidedgen/synthetic.h"

#include <array>
#include <string_view>

namespace guidedgen {
namespace {

using Pool = std::vector<std::string_view>;

const Pool kNeutral{"we",    "you",   "they",  "people", "this",  "that",
                    "is",    "are",   "should", "can",   "talk",  "about",
                    "think", "our",   "community", "everyone", "here", "it",
                    "all",   "to",    "the",   "and",    "of",    "with",
                    "together", "world", "city", "work",  "family", "today"};
const Pool kPolite{"please", "thank", "thanks",   "kindly",  "appreciate",
                   "respect", "sorry", "grateful", "welcome", "consider"};
const Pool kRude{"whatever", "nonsense", "ridiculous", "pathetic", "shut",
                 "ugh",      "seriously", "clueless", "obviously", "stop"};
const Pool kToxic{"idiot", "stupid", "trash", "disgusting", "dumb",
                  "scum",  "garbage", "hate", "moron",     "filthy"};
const Pool kJoy{"happy", "glad",  "wonderful", "love",      "hope",
                "great", "smile", "delighted", "cheerful",  "bright"};
const Pool kSad{"sad", "angry", "afraid",  "terrible", "awful",
                "cry", "miserable", "fear", "gloomy",  "upset"};

struct Mix {
  const Pool* pool;
  double weight;
};

class Writer {
 public:
  explicit Writer(Rng& rng) : rng_(rng) {}

  std::string_view pick(const Pool& pool) {
    return pool[rng_.below(pool.size())];
  }

  std::string_view pick(const std::vector<Mix>& mix) {
    double u = rng_.uniform();
    for (const auto& m : mix) {
      if (u < m.weight) return pick(*m.pool);
      u -= m.weight;
    }
    return pick(*mix.back().pool);
  }

  // `words` tokens drawn from `mix`, with a period every few words and one
  // at the end.
  std::string sentence(const std::vector<Mix>& mix, std::size_t words,
                       std::size_t clause = 0) {
    std::string out;
    std::size_t since_period = 0;
    for (std::size_t i = 0; i < words; ++i) {
      if (!out.empty()) out += ' ';
      out += pick(mix);
      ++since_period;
      if (clause > 0 && since_period >= clause && i + 1 < words &&
          rng_.uniform() < 0.5) {
        out += " .";
        since_period = 0;
      }
    }
    out += " .";
    return out;
  }

  std::size_t between(std::size_t lo, std::size_t hi) {
    return lo + rng_.below(hi - lo + 1);
  }

 private:
  Rng& rng_;
};

std::vector<AttributeText> attribute_records(
    Writer& w, std::size_t count, const std::vector<Mix>& positive,
    const std::vector<Mix>& negative) {
  std::vector<AttributeText> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const bool pos = i % 2 == 0;
    out.push_back({w.sentence(pos ? positive : negative, w.between(5, 10)),
                   pos ? Label::kPositive : Label::kNegative});
  }
  return out;
}

}  // namespace

SyntheticCorpora make_synthetic_corpora(const SyntheticOptions& options) {
  SyntheticCorpora c;
  {
    Rng rng(options.seed, 0);
    Writer w(rng);
    const std::vector<Mix> prompt{{&kNeutral, 0.5}, {&kToxic, 0.3}, {&kRude, 0.2}};
    const std::vector<Mix> counter{{&kNeutral, 0.5}, {&kPolite, 0.1}, {&kRude, 0.1},
                                   {&kToxic, 0.1},   {&kJoy, 0.1},    {&kSad, 0.1}};
    for (std::size_t i = 0; i < options.pairs; ++i) {
      c.pairs.push_back({w.sentence(prompt, w.between(4, 9)),
                         w.sentence(counter, w.between(14, 30), 6),
                         "pair-" + std::to_string(i)});
    }
  }
  {
    Rng rng(options.seed, 1);
    Writer w(rng);
    c.attributes.push_back(
        {"polite", "politeness", Direction::kTowardPositive,
         attribute_records(w, options.attribute_records,
                           {{&kNeutral, 0.55}, {&kPolite, 0.35}, {&kJoy, 0.1}},
                           {{&kNeutral, 0.55}, {&kRude, 0.35}, {&kToxic, 0.1}})});
  }
  {
    Rng rng(options.seed, 2);
    Writer w(rng);
    // Positive is toxic; the control steers away from it.
    c.attributes.push_back(
        {"detox", "toxicity", Direction::kTowardNegative,
         attribute_records(w, options.attribute_records,
                           {{&kNeutral, 0.55}, {&kToxic, 0.35}, {&kRude, 0.1}},
                           {{&kNeutral, 0.7}, {&kPolite, 0.15}, {&kJoy, 0.15}})});
  }
  {
    Rng rng(options.seed, 3);
    Writer w(rng);
    c.attributes.push_back(
        {"joy", "joy", Direction::kTowardPositive,
         attribute_records(w, options.attribute_records,
                           {{&kNeutral, 0.6}, {&kJoy, 0.4}},
                           {{&kNeutral, 0.6}, {&kSad, 0.4}})});
  }
  return c;
}

}  // namespace guidedgen
