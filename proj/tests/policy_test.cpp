#include <gtest/gtest.h>

#include <cmath>

#include "seedgrpo/policy.hpp"
#include "test_util.hpp"

namespace seedgrpo {
namespace {

using testing::random_policy;
using testing::random_tokens;

TEST(PolicyParams, ShapeAndStateFunction) {
  PolicyParams p(10, 2);
  EXPECT_EQ(p.num_states(), 100u * 144u);
  EXPECT_EQ(p.logits().size(), p.num_states() * kVocabSize);
  const Prompt q = make_prompt(0, 13, 4, 10);
  const Prompt q2 = make_prompt(1, 4, 13, 10);
  EXPECT_NE(p.state_index(q, {}), p.state_index(q2, {}));  // residues (3,4) vs (4,3)
  const Prompt q3 = make_prompt(2, 23, 14, 10);
  EXPECT_EQ(p.state_index(q, {}), p.state_index(q3, {}));
  const std::vector<Token> a{1, 2, 3}, b{9, 2, 3};
  EXPECT_EQ(p.state_index(q, a), p.state_index(q, b));  // only the last two tokens matter
  EXPECT_THROW(PolicyParams(1, 2), ConfigError);
  EXPECT_THROW(PolicyParams(10, 5), ConfigError);
}

TEST(PolicyParams, ConditionalsAreDistributions) {
  const PolicyParams p = random_policy(3, 1, 11, 5.0);
  for (std::size_t s = 0; s < p.num_states(); ++s) {
    const auto pr = softmax(p.row(s));
    double sum = 0.0;
    for (double x : pr) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SampleRollout, DominantLogitsGiveThree) {
  PolicyParams p(10, 2);
  const Prompt q = make_prompt(0, 1, 2, 10);
  p.row(p.state_index(q, {}))[3] = 50.0;
  p.row(p.state_index(q, std::vector<Token>{3}))[kEos] = 50.0;
  CounterRng rng(99);
  const Rollout r = sample_rollout(p, q, rng, 4);
  EXPECT_EQ(r.tokens, (std::vector<Token>{3, kEos}));
  EXPECT_EQ(r.answer, "3");
  // Each step keeps mass 1/(1 + 11 e^-50); the total log-prob is ~ -2 * 11 e^-50.
  EXPECT_NEAR(r.total_logp, -2.0 * 11.0 * std::exp(-50.0), 1e-25);
}

TEST(SampleRollout, UniformFirstTokenLogProb) {
  const PolicyParams p(10, 2);
  const Prompt q = make_prompt(0, 1, 2, 10);
  CounterRng rng(5);
  const Rollout r = sample_rollout(p, q, rng, 3);
  EXPECT_NEAR(r.per_token_logp.front(), -std::log(12.0), 1e-15);
  EXPECT_NEAR(r.per_token_logp.front(), -2.4849, 1e-4);
}

TEST(SampleRollout, DeterministicAndRescorable) {
  const PolicyParams p = random_policy(5, 2, 3);
  const Prompt q = make_prompt(0, 7, 9, 5);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    CounterRng r1(seed), r2(seed);
    const Rollout a = sample_rollout(p, q, r1, 6);
    const Rollout b = sample_rollout(p, q, r2, 6);
    EXPECT_EQ(a, b);
    ASSERT_GE(a.length(), 1u);
    ASSERT_LE(a.length(), 6u);
    double sum = 0.0;
    for (double x : a.per_token_logp) sum += x;
    EXPECT_NEAR(a.total_logp, sum, 1e-10);
    EXPECT_NEAR(sequence_logprob(p, q, a.tokens), a.total_logp, 1e-10);
    EXPECT_EQ(a.answer, canonicalize_answer(a.tokens));
    if (a.tokens.back() != kEos) EXPECT_EQ(a.length(), 6u);
  }
  EXPECT_THROW({ CounterRng r(1); sample_rollout(p, q, r, 0); }, ConfigError);
}

TEST(SampleRollout, EmpiricalFrequenciesMatchSoftmax) {
  PolicyParams p(2, 0);
  const Prompt q = make_prompt(0, 0, 0, 2);
  auto row = p.row(p.state_index(q, {}));
  for (int v = 0; v < kVocabSize; ++v) row[v] = 0.3 * v - 1.0;
  const auto probs = softmax(p.row(p.state_index(q, {})));
  std::vector<double> counts(kVocabSize, 0.0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(derive_key({77, static_cast<std::uint64_t>(i)}));
    counts[sample_rollout(p, q, rng, 1).tokens[0]] += 1.0;
  }
  for (int v = 0; v < kVocabSize; ++v) {
    const double sd = std::sqrt(probs[v] * (1 - probs[v]) / n);
    EXPECT_NEAR(counts[v] / n, probs[v], 5 * sd) << v;
  }
}

TEST(SequenceLogprob, Uniform) {
  const PolicyParams p(10, 2);
  const Prompt q = make_prompt(0, 1, 2, 10);
  EXPECT_NEAR(sequence_logprob(p, q, std::vector<Token>{1, 4, kEos}), -3.0 * std::log(12.0), 1e-12);
}

TEST(SequenceLogprob, HandBuiltTwoStatePolicy) {
  // Row for the empty context: logit 1 on d1; row after d1: logit 2 on EOS.
  // Expected value evaluated independently with 30-digit arithmetic.
  PolicyParams p(2, 1);
  const Prompt q = make_prompt(0, 0, 1, 2);
  p.row(p.state_index(q, {}))[1] = 1.0;
  p.row(p.state_index(q, std::vector<Token>{1}))[kEos] = 2.0;
  EXPECT_NEAR(sequence_logprob(p, q, std::vector<Token>{1, kEos}), -2.5304850937265500841, 1e-13);
}

TEST(SequenceLogprob, RejectsBadTokens) {
  const PolicyParams p(10, 2);
  const Prompt q = make_prompt(0, 1, 2, 10);
  EXPECT_THROW(sequence_logprob(p, q, std::vector<Token>{}), InputError);
  EXPECT_THROW(sequence_logprob(p, q, std::vector<Token>{1, 12}), InputError);
  EXPECT_THROW(sequence_logprob(p, q, std::vector<Token>{-1}), InputError);
  EXPECT_THROW(logprob_grad(p, q, std::vector<Token>{40}), InputError);
}

TEST(LogprobGrad, UniformSingleStep) {
  const PolicyParams p(10, 2);
  const Prompt q = make_prompt(0, 1, 2, 10);
  const SparseGrad g = logprob_grad(p, q, std::vector<Token>{5});
  ASSERT_EQ(g.rows().size(), 1u);
  const auto& row = g.rows().begin()->second;
  for (int v = 0; v < kVocabSize; ++v) EXPECT_NEAR(row[v], (v == 5 ? 1.0 : 0.0) - 1.0 / 12.0, 1e-15);
}

TEST(LogprobGrad, RowsSumToZero) {
  const PolicyParams p = random_policy(3, 1, 4, 2.0);
  CounterRng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Prompt q = make_prompt(0, static_cast<std::int64_t>(rng.below(3)), static_cast<std::int64_t>(rng.below(3)), 3);
    const SparseGrad g = logprob_grad(p, q, random_tokens(rng, 1 + rng.below(6)));
    for (const auto& [s, row] : g.rows()) {
      double sum = 0.0;
      for (double x : row) sum += x;
      EXPECT_NEAR(sum, 0.0, 1e-12);
    }
  }
}

// Central differences of sequence_logprob, h = 1e-5, over every logit of
// every row the sequence visits.
TEST(LogprobGrad, MatchesFiniteDifferences) {
  const double h = 1e-5;
  CounterRng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const int modulus = 2 + static_cast<int>(rng.below(4));
    const int k = static_cast<int>(rng.below(3));
    PolicyParams p = random_policy(modulus, k, rng.next_u64(), 1.5);
    const Prompt q = make_prompt(0, static_cast<std::int64_t>(rng.below(9)), static_cast<std::int64_t>(rng.below(9)), modulus);
    const auto tokens = random_tokens(rng, 1 + rng.below(6));
    const SparseGrad g = logprob_grad(p, q, tokens);
    double diff2 = 0.0, norm2 = 0.0;
    for (const auto& [s, row] : g.rows()) {
      for (int v = 0; v < kVocabSize; ++v) {
        double& x = p.row(s)[v];
        const double saved = x;
        x = saved + h;
        const double up = sequence_logprob(p, q, tokens);
        x = saved - h;
        const double down = sequence_logprob(p, q, tokens);
        x = saved;
        const double fd = (up - down) / (2 * h);
        diff2 += (fd - row[v]) * (fd - row[v]);
        norm2 += row[v] * row[v];
      }
    }
    worst = std::max(worst, std::sqrt(diff2 / norm2));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(GreedyDecode, SpellsFortyTwo) {
  PolicyParams p(100, 2);
  const Prompt q = make_prompt(0, 40, 2, 100);
  p.row(p.state_index(q, {}))[4] = 3.0;
  p.row(p.state_index(q, std::vector<Token>{4}))[2] = 3.0;
  p.row(p.state_index(q, std::vector<Token>{4, 2}))[kEos] = 3.0;
  const auto out = greedy_decode(p, q, 8);
  EXPECT_EQ(out, (std::vector<Token>{4, 2, kEos}));
  EXPECT_EQ(canonicalize_answer(out), "42");
  EXPECT_EQ(greedy_decode(p, q, 8), out);
}

TEST(GreedyDecode, UniformTieBreaksToLowestId) {
  const PolicyParams p(10, 2);
  const Prompt q = make_prompt(0, 1, 2, 10);
  EXPECT_EQ(greedy_decode(p, q, 5), (std::vector<Token>(5, 0)));
  EXPECT_THROW(greedy_decode(p, q, 0), ConfigError);
}

TEST(Snapshot, IsADeepCopy) {
  PolicyParams live = random_policy(3, 1, 5);
  const PolicySnapshot snap = snapshot(live);
  const auto before = snap->logits();
  for (double& x : live.logits()) x += 1.0;
  EXPECT_EQ(snap->logits(), before);
}

TEST(Snapshot, RescoresIdentically) {
  const PolicyParams live = random_policy(4, 2, 6);
  const PolicySnapshot snap = snapshot(live);
  CounterRng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Prompt q = make_prompt(i, static_cast<std::int64_t>(rng.below(8)), static_cast<std::int64_t>(rng.below(8)), 4);
    const auto t = random_tokens(rng, 1 + rng.below(5));
    const double a = sequence_logprob(live, q, t);
    const double b = sequence_logprob(*snap, q, t);
    EXPECT_EQ(a, b);
    EXPECT_EQ(std::exp(a - b), 1.0);
  }
}

TEST(PolicyParams, ShiftInvariance) {
  const PolicyParams base = random_policy(3, 2, 9);
  PolicyParams shifted = base;
  CounterRng rng(10);
  for (std::size_t s = 0; s < shifted.num_states(); ++s) {
    const double c = 10.0 * (rng.uniform() - 0.5);
    for (double& x : shifted.row(s)) x += c;
  }
  for (int i = 0; i < 100; ++i) {
    const Prompt q = make_prompt(i, static_cast<std::int64_t>(rng.below(6)), static_cast<std::int64_t>(rng.below(6)), 3);
    const auto t = random_tokens(rng, 1 + rng.below(5));
    EXPECT_NEAR(sequence_logprob(base, q, t), sequence_logprob(shifted, q, t), 1e-12);
    EXPECT_EQ(greedy_decode(base, q, 5), greedy_decode(shifted, q, 5));
    const auto g1 = logprob_grad(base, q, t);
    const auto g2 = logprob_grad(shifted, q, t);
    for (const auto& [s, row] : g1.rows())
      for (int v = 0; v < kVocabSize; ++v) EXPECT_NEAR(row[v], g2.at(s, v), 1e-12);
  }
}

TEST(OraclePolicy, GreedyPathIsCorrect) {
  const PolicyParams p = oracle_policy(100, 2);
  for (int a = 0; a < 100; a += 7)
    for (int b = 0; b < 100; b += 3) {
      const Prompt q = make_prompt(0, a, b, 100);
      EXPECT_EQ(verify(q, canonicalize_answer(greedy_decode(p, q, 4))), 1);
    }
  EXPECT_THROW(oracle_policy(12, 1), ConfigError);  // "11" revisits context (1)
}

}  // namespace
}  // namespace seedgrpo
