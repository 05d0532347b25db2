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


#include "guidedgen/decoder.h"

#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "oracles.h"

namespace guidedgen {
namespace {

using Strings = std::vector<std::string>;

double sum(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  return combine(logits, std::span<const WeightedPosterior>{});
}

// A three-word world (|V| = 8) with a base model and two attribute models.
struct TinyWorld {
  Vocabulary vocab = Vocabulary::from_tokens(Strings{"a", "b", "c"});
  std::shared_ptr<const NgramModel> base;
  std::shared_ptr<const NgramModel> attr_a;  // true code favors "a"
  std::shared_ptr<const NgramModel> attr_c;  // true code favors "c"

  TinyWorld() {
    Rng rng(42);
    auto draw = [&](int len) {
      std::vector<TokenId> ids;
      for (int i = 0; i < len; ++i) ids.push_back(kNumReserved + static_cast<TokenId>(rng.below(3)));
      return ids;
    };
    std::vector<PairRecord> pairs;
    for (int i = 0; i < 30; ++i) {
      pairs.push_back({TokenSequence{draw(2)}, TokenSequence{draw(3 + i % 5)}, std::to_string(i)});
    }
    NgramConfig cfg;
    cfg.order = 3;
    base = std::make_shared<NgramModel>(train_base_lm(vocab, pairs, cfg));
    attr_a = std::make_shared<NgramModel>(attribute(5, 7));
    attr_c = std::make_shared<NgramModel>(attribute(7, 5));
  }

  NgramModel attribute(TokenId favored, TokenId other) const {
    std::vector<CodedSequence> data;
    for (int i = 0; i < 6; ++i) {
      data.push_back({TokenSequence{{favored, 6, favored}}, ControlCode::kTrue});
      data.push_back({TokenSequence{{other, 6, other}}, ControlCode::kFalse});
    }
    NgramConfig cfg;
    cfg.order = 2;
    return train_cclm(vocab, data, cfg);
  }

  AttributeControl control(std::string name, std::shared_ptr<const NgramModel> m,
                           double omega, Direction d = Direction::kTowardPositive) const {
    return {std::move(name), std::move(m), PosteriorConfig{}, omega, d};
  }
};

GenerationConfig short_config(std::uint64_t seed = 1) {
  GenerationConfig c;
  c.max_new_tokens = 12;
  c.warmup_tokens = 2;
  c.seed = seed;
  return c;
}

TEST(CombineTest, WorkedExamples) {
  const std::vector<double> base{std::log(0.5), std::log(0.5)};
  const std::vector<double> post{0.9, 0.1};
  const std::vector<double> inv{0.1, 0.9};
  const auto one = combine_single(base, post, 1.0);
  EXPECT_NEAR(one[0], 0.9, 1e-15);
  EXPECT_NEAR(one[1], 0.1, 1e-15);
  const std::vector<WeightedPosterior> both{{post, 1.0}, {inv, 1.0}};
  const auto cancel = combine(base, both);
  EXPECT_NEAR(cancel[0], 0.5, 1e-15);
  EXPECT_NEAR(cancel[1], 0.5, 1e-15);
}

TEST(CombineTest, ZeroWeightIsExactNoOp) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> base(6), post(6);
    for (auto& x : base) x = -10 * rng.uniform();
    for (auto& x : post) x = 0.01 + 0.98 * rng.uniform();
    const std::vector<WeightedPosterior> zero{{post, 0.0}, {post, 0.0}};
    EXPECT_EQ(combine(base, zero), softmax(base));
    EXPECT_EQ(combine_single(base, post, 0.0), softmax(base));
  }
}

TEST(CombineTest, SingleIsBitIdenticalToMultiWithOneEntry) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t v = 2 + rng.below(30);
    std::vector<double> base(v), post(v);
    for (auto& x : base) x = -20 * rng.uniform();
    for (auto& x : post) x = 1e-6 + (1 - 2e-6) * rng.uniform();
    const double omega = 5 * rng.uniform();
    const std::vector<WeightedPosterior> one{{post, omega}};
    EXPECT_EQ(combine_single(base, post, omega), combine(base, one));
  }
}

TEST(CombineTest, MatchesLinearSpaceProduct) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t v = 2 + rng.below(8);
    std::vector<double> base_probs(v), base(v);
    for (auto& x : base_probs) x = 0.01 + rng.uniform();
    const double z = sum(base_probs);
    for (std::size_t i = 0; i < v; ++i) base[i] = std::log(base_probs[i] / z);
    std::vector<std::vector<double>> posts(3, std::vector<double>(v));
    std::vector<double> weights;
    for (auto& p : posts) {
      for (auto& x : p) x = 0.01 + 0.98 * rng.uniform();
      weights.push_back(2 * rng.uniform());
    }
    std::vector<double> linear_base(v);
    for (std::size_t i = 0; i < v; ++i) linear_base[i] = std::exp(base[i]);
    const auto want = oracle::product_combine(linear_base, posts, weights);
    std::vector<WeightedPosterior> wp;
    for (std::size_t i = 0; i < 3; ++i) wp.push_back({posts[i], weights[i]});
    const auto got = combine(base, wp);
    EXPECT_NEAR(sum(got), 1.0, 1e-12);
    for (std::size_t i = 0; i < v; ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
  }
}

TEST(CombineTest, RejectsBadInputs) {
  const std::vector<double> base{0.0, 0.0};
  const std::vector<double> short_post{0.5};
  EXPECT_THROW(combine_single(base, short_post, 1.0), Error);
  const std::vector<double> post{0.5, 0.5};
  EXPECT_THROW(combine_single(base, post, -1.0), Error);
}

TEST(FilterTest, NucleusHandCase) {
  GenerationConfig c;
  c.top_k = 4;
  c.nucleus_p = 0.9;
  const std::vector<double> probs{0.5, 0.3, 0.15, 0.05};
  FilterReport report;
  const auto out = apply_filters(probs, {}, c, &report);
  EXPECT_NEAR(out[0], 0.5 / 0.95, 1e-12);
  EXPECT_NEAR(out[1], 0.3 / 0.95, 1e-12);
  EXPECT_NEAR(out[2], 0.15 / 0.95, 1e-12);
  EXPECT_EQ(out[3], 0.0);
  EXPECT_NEAR(out[0], 0.526, 5e-4);
  EXPECT_NEAR(out[1], 0.316, 5e-4);
  EXPECT_NEAR(out[2], 0.158, 5e-4);
  EXPECT_EQ(report.support_after_top_k, 4u);
  EXPECT_EQ(report.support_after_nucleus, 3u);
}

TEST(FilterTest, IdentityConfiguration) {
  GenerationConfig c;
  c.top_k = 4;
  c.nucleus_p = 1.0;
  const std::vector<double> probs{0.1, 0.2, 0.3, 0.4};
  EXPECT_EQ(apply_filters(probs, {}, c), probs);
}

TEST(FilterTest, TopKBreaksTiesByLowerId) {
  GenerationConfig c;
  c.top_k = 2;
  c.nucleus_p = 1.0;
  const std::vector<double> probs{0.1, 0.3, 0.3, 0.3};
  const auto out = apply_filters(probs, {}, c);
  EXPECT_EQ(out, (std::vector<double>{0.0, 0.5, 0.5, 0.0}));
}

TEST(FilterTest, NoRepeatBansCompletingToken) {
  GenerationConfig c;
  c.nucleus_p = 1.0;
  std::vector<double> probs(12, 1.0 / 12);
  const std::vector<TokenId> history{5, 6, 7, 8, 9, 5, 6, 7, 8};
  FilterReport report;
  const auto out = apply_filters(probs, history, c, &report);
  EXPECT_EQ(out[9], 0.0);
  EXPECT_EQ(report.banned, 1);
  EXPECT_NEAR(sum(out), 1.0, 1e-12);
  for (std::size_t v = 0; v < out.size(); ++v) {
    if (v != 9) EXPECT_NEAR(out[v], 1.0 / 11, 1e-12);
  }
}

TEST(FilterTest, EosNeverBanned) {
  GenerationConfig c;
  c.no_repeat_ngram = 2;
  c.nucleus_p = 1.0;
  const std::vector<double> probs(6, 1.0 / 6);
  const std::vector<TokenId> history{5, kEosId, 5};
  const auto out = apply_filters(probs, history, c);
  EXPECT_GT(out[static_cast<std::size_t>(kEosId)], 0.0);
}

TEST(FilterTest, EverythingBannedIsDegenerate) {
  GenerationConfig c;
  c.no_repeat_ngram = 2;
  const std::vector<double> probs{0.0, 0.0, 0.0, 0.0, 0.0, 1.0};
  const std::vector<TokenId> history{5, 5};
  EXPECT_THROW(apply_filters(probs, history, c), DegenerateFilterError);
}

TEST(SampleTest, InverseCdfBoundaries) {
  const std::vector<SupportEntry> s{{2, 0.25}, {5, 0.5}, {9, 0.25}};
  EXPECT_EQ(sample_from(s, 0.0), 2);
  EXPECT_EQ(sample_from(s, 0.2499), 2);
  EXPECT_EQ(sample_from(s, 0.25), 5);
  EXPECT_EQ(sample_from(s, 0.7499), 5);
  EXPECT_EQ(sample_from(s, 0.75), 9);
  EXPECT_EQ(sample_from(s, std::nextafter(1.0, 0.0)), 9);
  EXPECT_THROW(sample_from({}, 0.5), Error);
}

TEST(GenerationConfigTest, Validation) {
  GenerationConfig c;
  EXPECT_NO_THROW(c.validate());
  c.warmup_tokens = 200;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.temperature = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.nucleus_p = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.top_k = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(SessionTest, WarmupStepsAreUncontrolled) {
  TinyWorld w;
  const std::vector<AttributeControl> controls{w.control("a", w.attr_a, 4.0)};
  DecodingSession s(w.base, controls, short_config(), TokenSequence{{5, 6}}, Rng(1));
  for (int i = 0; i < 2; ++i) {
    const auto d = s.propose();
    EXPECT_TRUE(d.warmup);
    EXPECT_EQ(d.combined, softmax(d.base_logprobs));
    s.absorb(6);
  }
  const auto d = s.propose();
  EXPECT_FALSE(d.warmup);
  EXPECT_NE(d.combined, softmax(d.base_logprobs));
}

TEST(SessionTest, SpecialTokensNeverProposed) {
  TinyWorld w;
  DecodingSession s(w.base, {}, short_config(), TokenSequence{{5}}, Rng(1));
  const auto d = s.propose();
  for (TokenId t : {kPadId, kUnkId, kBosId, kSepId}) {
    EXPECT_EQ(d.combined[static_cast<std::size_t>(t)], 0.0);
  }
  EXPECT_NEAR(sum(d.combined), 1.0, 1e-12);
}

TEST(SessionTest, RepetitionPenaltyDividesSeenTokens) {
  TinyWorld w;
  GenerationConfig plain = short_config();
  plain.repetition_penalty = 1.0;
  plain.temperature = 1.0;
  GenerationConfig penalized = plain;
  penalized.repetition_penalty = 3.5;
  DecodingSession a(w.base, {}, plain, TokenSequence{{5}}, Rng(1));
  DecodingSession b(w.base, {}, penalized, TokenSequence{{5}}, Rng(1));
  a.absorb(6);
  b.absorb(6);
  const auto pa = a.propose().combined;
  const auto pb = b.propose().combined;
  // Renormalizing after dividing p(6) by 3.5.
  const double z = 1.0 - pa[6] + pa[6] / 3.5;
  EXPECT_NEAR(pb[6], pa[6] / 3.5 / z, 1e-12);
  EXPECT_NEAR(pb[5], pa[5] / z, 1e-12);
}

TEST(SessionTest, ZeroWeightsGiveFilteredBase) {
  TinyWorld w;
  const std::vector<AttributeControl> controls{w.control("a", w.attr_a, 0.0),
                                               w.control("c", w.attr_c, 0.0)};
  const auto with = generate_candidate(w.base, TokenSequence{{5, 7}}, controls, short_config(3), 0);
  const auto without = generate_candidate(w.base, TokenSequence{{5, 7}}, {}, short_config(3), 0);
  ASSERT_EQ(with.tokens.ids, without.tokens.ids);
  for (std::size_t i = 0; i < with.steps.size(); ++i) {
    ASSERT_EQ(with.steps[i].distribution.size(), without.steps[i].distribution.size());
    for (std::size_t j = 0; j < with.steps[i].distribution.size(); ++j) {
      EXPECT_NEAR(with.steps[i].distribution[j].prob, without.steps[i].distribution[j].prob, 1e-9);
    }
  }
}

TEST(SessionTest, TraceRecordsOnePosteriorPerControlAfterWarmup) {
  TinyWorld w;
  const std::vector<AttributeControl> controls{
      w.control("joy", w.attr_a, kTripleEmotionWeight),
      w.control("polite", w.attr_c, kTripleStyleWeight),
      w.control("detox", w.attr_c, kTripleStyleWeight, Direction::kTowardNegative)};
  GenerationConfig c = short_config(9);
  const auto trace = generate_candidate(w.base, TokenSequence{{6}}, controls, c, 0);
  EXPECT_EQ(trace.steps.size(), trace.tokens.size());
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& step = trace.steps[i];
    EXPECT_EQ(step.warmup, i < 2u);
    if (step.warmup) {
      EXPECT_TRUE(step.attributes.empty());
      continue;
    }
    ASSERT_EQ(step.attributes.size(), 3u);
    double exponent = 0;
    for (const auto& a : step.attributes) {
      exponent += a.omega;
      EXPECT_GT(a.posterior, 0.0);
      EXPECT_LT(a.posterior, 1.0);
    }
    EXPECT_NEAR(exponent, 1.0, 1e-15);
    double total = 0;
    for (const auto& e : step.distribution) total += e.prob;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(SessionTest, TowardNegativeIsTheComplementaryPosterior) {
  TinyWorld w;
  const std::vector<AttributeControl> pos{w.control("x", w.attr_a, 1.0)};
  const std::vector<AttributeControl> neg{w.control("x", w.attr_a, 1.0, Direction::kTowardNegative)};
  GenerationConfig c = short_config();
  c.warmup_tokens = 0;
  DecodingSession sp(w.base, pos, c, TokenSequence{{5}}, Rng(1));
  DecodingSession sn(w.base, neg, c, TokenSequence{{5}}, Rng(1));
  for (TokenId t : {5, 6, 7}) {
    const auto dp = sp.propose();
    const auto dn = sn.propose();
    for (std::size_t v = 0; v < dp.posteriors[0].size(); ++v) {
      EXPECT_NEAR(dp.posteriors[0][v] + dn.posteriors[0][v], 1.0, 1e-12);
    }
    sp.absorb(t);
    sn.absorb(t);
  }
}

TEST(SessionTest, ControlShiftsMassTowardFavoredToken) {
  TinyWorld w;
  GenerationConfig c = short_config();
  c.warmup_tokens = 0;
  double previous = -1;
  for (double omega : {0.0, 1.0, 4.0}) {
    const std::vector<AttributeControl> controls{w.control("a", w.attr_a, omega)};
    DecodingSession s(w.base, controls, c, TokenSequence{{6}}, Rng(1));
    const double pa = s.propose().combined[5];
    EXPECT_GT(pa, previous);
    previous = pa;
  }
}

TEST(SessionTest, TerminatesOnEosOrMaxLength) {
  TinyWorld w;
  GenerationConfig c = short_config();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = seed;
    const auto t = generate_candidate(w.base, TokenSequence{{5}}, {}, c, 0);
    if (t.terminated_by == Termination::kEos) {
      EXPECT_EQ(t.tokens.ids.back(), kEosId);
      EXPECT_EQ(t.content().size() + 1, t.tokens.size());
    } else {
      EXPECT_EQ(t.tokens.size(), 12u);
      EXPECT_EQ(t.content().size(), 12u);
    }
    EXPECT_LE(t.tokens.size(), 12u);
  }
  DecodingSession s(w.base, {}, c, TokenSequence{{5}}, Rng(1));
  s.absorb(kEosId);
  EXPECT_TRUE(s.done());
  EXPECT_THROW(s.step(), Error);
  EXPECT_EQ(std::move(s).finish(0).terminated_by, Termination::kEos);
}

TEST(GenerateTest, DeterministicAndReplayable) {
  TinyWorld w;
  const std::vector<AttributeControl> controls{w.control("a", w.attr_a, 1.0)};
  GenerationConfig c = short_config(77);
  const auto first = generate(w.base, TokenSequence{{5, 6}}, controls, c);
  const auto second = generate(w.base, TokenSequence{{5, 6}}, controls, c);
  ASSERT_EQ(first.size(), 5u);
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(first[i].tokens.ids, second[i].tokens.ids);
    EXPECT_EQ(first[i].index, i);
    EXPECT_EQ(replay(first[i]), first[i].tokens.ids);
    const auto single = generate_candidate(w.base, TokenSequence{{5, 6}}, controls, c, i);
    EXPECT_EQ(single.tokens.ids, first[i].tokens.ids);
  }
}

TEST(GenerateTest, NoRepeatedFiveGrams) {
  TinyWorld w;
  GenerationConfig c;
  c.max_new_tokens = 40;
  c.warmup_tokens = 3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = seed;
    for (const auto& t : generate(w.base, TokenSequence{{7}}, {}, c)) {
      std::set<std::vector<TokenId>> grams;
      const auto& ids = t.tokens.ids;
      for (std::size_t i = 0; i + 5 <= ids.size(); ++i) {
        EXPECT_TRUE(grams.insert({ids.begin() + static_cast<std::ptrdiff_t>(i),
                                  ids.begin() + static_cast<std::ptrdiff_t>(i + 5)})
                        .second);
      }
    }
  }
}

TEST(GenerateTest, VocabularyMismatchRejectedBeforeSampling) {
  TinyWorld w;
  const Vocabulary other = Vocabulary::from_tokens(Strings{"x", "y", "z"});
  std::vector<CodedSequence> data{{TokenSequence{{5}}, ControlCode::kTrue},
                                  {TokenSequence{{6}}, ControlCode::kFalse}};
  auto foreign = std::make_shared<NgramModel>(train_cclm(other, data, NgramConfig{}));
  const std::vector<AttributeControl> controls{w.control("x", foreign, 1.0)};
  try {
    generate(w.base, TokenSequence{{5}}, controls, short_config());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFailedPrecondition);
  }
  const std::vector<AttributeControl> dup{w.control("a", w.attr_a, 1.0), w.control("a", w.attr_c, 1.0)};
  EXPECT_THROW(generate(w.base, TokenSequence{{5}}, dup, short_config()), Error);
  EXPECT_THROW(generate(w.base, TokenSequence{}, {}, short_config()), Error);
}

TEST(DirectionTest, TextRoundTrip) {
  for (Direction d : {Direction::kTowardPositive, Direction::kTowardNegative}) {
    EXPECT_EQ(parse_direction(to_string(d)), d);
  }
  EXPECT_THROW(parse_direction("sideways"), Error);
}

}  // namespace
}  // namespace guidedgen
