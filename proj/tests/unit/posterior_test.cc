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


#include "guidedgen/posterior.h"

#include <cmath>

#include <gtest/gtest.h>

#include "guidedgen/loss.h"
#include "oracles.h"

namespace guidedgen {
namespace {

using Strings = std::vector<std::string>;

PosteriorConfig uniform_prior(double alpha = 1.0) { return {alpha, 0.5}; }

double posterior(double lik_pos, double lik_neg, double t, const PosteriorConfig& cfg) {
  return std::exp(log_posterior_from_likelihoods(std::log(lik_pos), std::log(lik_neg), t, cfg));
}

// Small conditioned model over a 3-word alphabet (|V| = 8).
struct Fixture {
  Vocabulary vocab = Vocabulary::from_tokens(Strings{"p", "q", "r"});
  std::vector<CodedSequence> data;
  std::vector<oracle::RawSequence> raw_true, raw_false;
  NgramModel model;

  Fixture(int order, double k) : model(train(order, k)) {}

  NgramModel train(int order, double k) {
    Rng rng(static_cast<std::uint64_t>(order));
    for (int s = 0; s < 24; ++s) {
      std::vector<TokenId> ids;
      const auto len = 1 + rng.below(5);
      const bool positive = s % 2 == 0;
      for (std::uint64_t i = 0; i < len; ++i) {
        // Positive sequences lean toward "p", negative ones toward "r".
        const auto pick = rng.below(4);
        const TokenId lean = positive ? 0 : 2;
        const TokenId word = pick < 2 ? lean : (pick == 2 ? 1 : 2 - lean);
        ids.push_back(kNumReserved + word);
      }
      data.push_back({TokenSequence{ids}, positive ? ControlCode::kTrue : ControlCode::kFalse});
      (positive ? raw_true : raw_false).push_back(oracle::raw({}, ids));
    }
    NgramConfig c;
    c.order = order;
    c.smoothing = AddK{k};
    return train_cclm(vocab, data, c);
  }
};

TEST(PosteriorTest, WorkedLikelihoodRatios) {
  EXPECT_NEAR(posterior(0.8, 0.2, 1, uniform_prior()), 0.8, 1e-15);
  EXPECT_NEAR(posterior(0.2, 0.1, 1, uniform_prior()), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(posterior(0.3, 0.3, 4, uniform_prior()), 0.5, 1e-15);
  EXPECT_NEAR(posterior(0.3, 0.3, 4, {1.0, 0.7}), 0.7, 1e-15);
}

TEST(PosteriorTest, EmptyPrefixYieldsPrior) {
  EXPECT_NEAR(std::exp(log_posterior_from_likelihoods(-5, -1, 0, {1.0, 0.3})), 0.3, 1e-15);
  Fixture f(2, 0.1);
  EXPECT_NEAR(std::exp(sequence_log_posterior(f.model, {}, ControlCode::kFalse, {1.0, 0.3})),
              0.7, 1e-15);
}

TEST(PosteriorTest, TwoClassClosure) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = -30 * rng.uniform(), b = -30 * rng.uniform();
    const double t = 1 + static_cast<double>(rng.below(20));
    const PosteriorConfig cfg{0.25 + 3 * rng.uniform(), 0.05 + 0.9 * rng.uniform()};
    const double pc = std::exp(log_posterior_from_likelihoods(a, b, t, cfg));
    const double pn = std::exp(log_posterior_from_likelihoods(b, a, t, cfg.flipped()));
    EXPECT_NEAR(pc + pn, 1.0, 1e-12);
  }
}

TEST(PosteriorTest, InvariantToCommonLikelihoodScale) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = -20 * rng.uniform(), b = -20 * rng.uniform(), shift = -50 * rng.uniform();
    const double t = 1 + static_cast<double>(rng.below(10));
    EXPECT_NEAR(log_posterior_from_likelihoods(a, b, t, uniform_prior()),
                log_posterior_from_likelihoods(a + shift, b + shift, t, uniform_prior()), 1e-9);
  }
}

TEST(PosteriorTest, SharperWithLargerAlpha) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    double a = -10 * rng.uniform(), b = -10 * rng.uniform();
    if (a < b) std::swap(a, b);
    double previous = 0.0;
    for (double alpha : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const double p = std::exp(log_posterior_from_likelihoods(a, b, 3, uniform_prior(alpha)));
      EXPECT_GE(p, previous);
      EXPECT_GE(p, 0.5);
      previous = p;
    }
  }
}

TEST(PosteriorTest, ExtremeLikelihoodsStayInsideOpenInterval) {
  const std::vector<double> pos{0.0, -1e6, -800.0};
  const std::vector<double> neg{-1e6, 0.0, 0.0};
  const auto p = class_posteriors({}, pos, neg, uniform_prior(50));
  for (double x : p) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
}

TEST(PosteriorTest, AdvanceAccumulatesModelLogprobs) {
  Fixture f(3, 0.1);
  PosteriorState s;
  std::vector<TokenId> history;
  for (TokenId tok : {5, 7, 6}) {
    s = advance(s, f.model, history, tok);
    history.push_back(tok);
  }
  EXPECT_EQ(s.t, 3);
  EXPECT_NEAR(s.cum_logp_pos, f.model.sequence_logprob(history, ControlCode::kTrue), 1e-12);
  EXPECT_NEAR(s.cum_logp_neg, f.model.sequence_logprob(history, ControlCode::kFalse), 1e-12);
}

TEST(PosteriorTest, MatchesBruteForceBayesOnEveryShortContext) {
  for (int order : {2, 3}) {
    Fixture f(order, 0.5);
    const std::size_t v = f.vocab.size();
    for (const PosteriorConfig cfg : {PosteriorConfig{1.0, 0.5}, PosteriorConfig{2.0, 0.35}}) {
      // All histories over the full vocabulary up to length 3.
      std::vector<std::vector<TokenId>> histories{{}};
      for (std::size_t begin = 0, len = 0; len < 3; ++len) {
        const std::size_t end = histories.size();
        for (std::size_t h = begin; h < end; ++h) {
          for (TokenId t = 0; t < static_cast<TokenId>(v); ++t) {
            auto next = histories[h];
            next.push_back(t);
            histories.push_back(next);
          }
        }
        begin = end;
      }
      for (const auto& history : histories) {
        PosteriorState s;
        std::vector<TokenId> seen;
        for (TokenId t : history) {
          s = advance(s, f.model, seen, t);
          seen.push_back(t);
        }
        const auto got = class_posteriors(s, f.model.next_logprobs(history, ControlCode::kTrue),
                                          f.model.next_logprobs(history, ControlCode::kFalse), cfg);
        for (std::size_t cand = 0; cand < v; ++cand) {
          auto full = history;
          full.push_back(static_cast<TokenId>(cand));
          const double lt = oracle::sequence_probability(full, [&](const std::vector<TokenId>& h) {
            return oracle::add_k(f.raw_true, h, order, 128, 0.5, v);
          });
          const double lf = oracle::sequence_probability(full, [&](const std::vector<TokenId>& h) {
            return oracle::add_k(f.raw_false, h, order, 128, 0.5, v);
          });
          const double want = oracle::bayes_posterior(lt, lf, cfg.prior_pos, cfg.alpha,
                                                      static_cast<double>(full.size()));
          EXPECT_NEAR(got[cand], want, 1e-12);
        }
      }
    }
  }
}

TEST(EstimatePriorTest, FractionOfPositives) {
  const std::vector<Label> labels{Label::kPositive, Label::kNegative, Label::kNegative,
                                  Label::kPositive, Label::kNegative};
  EXPECT_DOUBLE_EQ(estimate_prior(labels), 0.4);
  const std::vector<Label> one_class{Label::kPositive, Label::kPositive};
  EXPECT_THROW(estimate_prior(one_class), Error);
}

TEST(PosteriorConfigTest, Validation) {
  EXPECT_THROW((PosteriorConfig{0.0, 0.5}.validate()), Error);
  EXPECT_THROW((PosteriorConfig{1.0, 1.0}.validate()), Error);
  EXPECT_THROW((PosteriorConfig{1.0, 0.0}.validate()), Error);
  EXPECT_NO_THROW((PosteriorConfig{1.0, 0.5}.validate()));
}

TEST(LossTest, MixingBoundariesAndWorkedValue) {
  EXPECT_NEAR(mix_losses(2.0, 0.5, {0.8}).combined, 1.7, 1e-15);
  EXPECT_EQ(mix_losses(2.0, 0.5, {1.0}).combined, 2.0);
  EXPECT_EQ(mix_losses(2.0, 0.5, {0.0}).combined, 0.5);
  EXPECT_THROW(mix_losses(2.0, 0.5, {1.5}), Error);
  EXPECT_THROW(mix_losses(2.0, 0.5, {-0.1}), Error);
}

TEST(LossTest, MatchesOracleAndIsLinearInLambda) {
  Fixture f(2, 0.3);
  const std::size_t v = f.vocab.size();
  const PosteriorConfig pc{1.0, 0.5};
  double gen = 0, disc = 0;
  for (const auto& item : f.data) {
    const auto& ids = item.tokens.ids;
    const double lt = oracle::sequence_probability(ids, [&](const std::vector<TokenId>& h) {
      return oracle::add_k(f.raw_true, h, 2, 128, 0.3, v);
    });
    const double lf = oracle::sequence_probability(ids, [&](const std::vector<TokenId>& h) {
      return oracle::add_k(f.raw_false, h, 2, 128, 0.3, v);
    });
    const bool pos = item.code == ControlCode::kTrue;
    const double t = static_cast<double>(ids.size());
    gen += -std::log(pos ? lt : lf) / t;
    disc += -std::log(pos ? oracle::bayes_posterior(lt, lf, 0.5, 1.0, t)
                          : oracle::bayes_posterior(lf, lt, 0.5, 1.0, t));
  }
  gen /= static_cast<double>(f.data.size());
  disc /= static_cast<double>(f.data.size());
  for (double lambda : {0.0, 0.25, 0.8, 1.0}) {
    const Losses l = losses(f.model, f.data, pc, {lambda});
    EXPECT_NEAR(l.generative, gen, 1e-12);
    EXPECT_NEAR(l.discriminative, disc, 1e-12);
    EXPECT_NEAR(l.combined, lambda * l.generative + (1 - lambda) * l.discriminative, 1e-12);
    EXPECT_GE(l.generative, 0.0);
    EXPECT_GE(l.discriminative, 0.0);
  }
}

TEST(LossTest, RejectsEmptyInputs) {
  Fixture f(2, 0.3);
  EXPECT_THROW(losses(f.model, {}, {}, {}), Error);
  const std::vector<CodedSequence> empty_seq{{TokenSequence{}, ControlCode::kTrue}};
  EXPECT_THROW(losses(f.model, empty_seq, {}, {}), Error);
}

}  // namespace
}  // namespace guidedgen
