#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "seedgrpo/eval.hpp"
#include "test_util.hpp"

namespace seedgrpo {
namespace {

// Emits one uniformly chosen digit, then EOS.
PolicyParams single_digit_policy(int modulus, std::span<const Prompt> prompts) {
  PolicyParams p(modulus, 1);
  for (const auto& q : prompts) {
    auto first = p.row(p.state_index(q, {}));
    std::fill(first.begin(), first.end(), -60.0);
    for (Token d = 0; d < 10; ++d) first[d] = 0.0;
    for (Token d = 0; d < 10; ++d) {
      const Token prefix[] = {d};
      auto next = p.row(p.state_index(q, prefix));
      std::fill(next.begin(), next.end(), -60.0);
      next[kEos] = 0.0;
    }
  }
  return p;
}

TEST(PassAt1, OracleUniformAndAdversarial) {
  const auto ds = generate_dataset({10, 0, 9, 200, 2});
  EXPECT_EQ(pass_at_1(oracle_policy(10, 2), ds, 4), 1.0);

  // Uniform logits decode greedily to "0000", which reads as 0.
  std::size_t zeros = 0;
  for (const auto& q : ds) zeros += q.truth_answer == "0";
  EXPECT_EQ(pass_at_1(PolicyParams(10, 2), ds, 4), static_cast<double>(zeros) / 200.0);

  PolicyParams silent(10, 0);
  for (std::size_t st = 0; st < silent.num_states(); ++st) silent.row(st)[kEos] = 5.0;
  EXPECT_EQ(pass_at_1(silent, ds, 4), 0.0);
  EXPECT_THROW(pass_at_1(silent, std::span<const Prompt>{}, 4), InputError);
}

TEST(PassAt1, LongerModulus) {
  const auto ds = generate_dataset({100, 0, 99, 150, 3});
  EXPECT_EQ(pass_at_1(oracle_policy(100, 2), ds, 4), 1.0);
}

TEST(AvgAtK, OracleAndSingleDigit) {
  const auto ds = generate_dataset({10, 0, 9, 200, 2});
  EXPECT_EQ(avg_at_k(oracle_policy(10, 2), ds, 8, 0, 4), 1.0);

  const PolicyParams p = single_digit_policy(10, ds);
  const double v = avg_at_k(p, ds, 8, 0, 4);
  const double sigma = std::sqrt(0.1 * 0.9 / (200.0 * 8.0));
  EXPECT_NEAR(v, 0.1, 3 * sigma);
  EXPECT_EQ(v, avg_at_k(p, ds, 8, 0, 4));
  EXPECT_THROW(avg_at_k(p, ds, 0, 0, 4), ConfigError);
}

TEST(EntropyProfile, OracleCollapses) {
  const auto ds = generate_dataset({10, 0, 9, 50, 2});
  for (const auto& r : entropy_profile(oracle_policy(10, 2), ds, 8, MassMode::count, 0, 4)) {
    EXPECT_EQ(r.k, 1u);
    EXPECT_EQ(r.se, 0.0);
    EXPECT_EQ(r.se_max, std::log(8.0));
  }
}

TEST(EntropyProfile, UniformPolicyExpectedClusterCount) {
  // Exact expectation for G = 8 under uniform logits over 12 tokens with
  // max_len 4, by enumeration of all outcome classes.
  constexpr double kExpectedK = 7.76521102256612;
  const auto ds = generate_dataset({10, 0, 9, 1000, 2});
  const auto prof = entropy_profile(PolicyParams(10, 2), ds, 8, MassMode::count, 0, 4);
  double sum = 0.0, sq = 0.0;
  for (const auto& r : prof) {
    sum += static_cast<double>(r.k);
    sq += static_cast<double>(r.k * r.k);
  }
  const double n = static_cast<double>(prof.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, kExpectedK, 4.0 * sd / std::sqrt(n) + 1e-3);
  EXPECT_THROW(entropy_profile(PolicyParams(10, 2), ds, 1, MassMode::count, 0, 4), ConfigError);
}

TEST(Evaluate, RecordsMatchMetrics) {
  const auto ds = generate_dataset({10, 0, 9, 40, 2});
  EvalOptions opt;
  opt.avg_k = 4;
  const auto rep = evaluate(oracle_policy(10, 2), ds, opt);
  EXPECT_EQ(rep.pass_at_1, 1.0);
  ASSERT_TRUE(rep.avg_at_k.has_value());
  EXPECT_EQ(*rep.avg_at_k, 1.0);
  ASSERT_EQ(rep.records.size(), 40u);
  for (const auto& r : rep.records) {
    EXPECT_TRUE(r.correct);
    EXPECT_EQ(r.k, 1u);
  }
  opt.avg_k = 0;
  EXPECT_FALSE(evaluate(PolicyParams(10, 2), ds, opt).avg_at_k.has_value());
}

struct SweepFixture : ::testing::Test {
  std::vector<Prompt> train_set = generate_dataset({10, 0, 9, 100, 1});
  std::vector<Prompt> eval_set = generate_dataset({10, 0, 9, 50, 2});
  TrainConfig base = [] {
    TrainConfig c;
    c.batch_size = 8;
    c.steps = 20;
    return c;
  }();
};

TEST_F(SweepFixture, SingleCellMatchesStandaloneRun) {
  SweepGrid grid{{0.02}, {WeightKind::focal}, {8}, {3}};
  const auto rows = ablation_sweep(base, 2, grid, train_set, eval_set);
  ASSERT_EQ(rows.size(), 1u);
  TrainConfig c = base;
  c.modulation.kind = WeightKind::focal;
  c.seed = 3;
  const auto s = summarize(train(c, 2, train_set), eval_set, c.max_len);
  EXPECT_EQ(rows[0].status, "ok");
  EXPECT_EQ(rows[0].pass_at_1, s.pass_at_1);
  EXPECT_EQ(rows[0].mean_se, s.mean_se);
  EXPECT_EQ(rows[0].mean_factor, s.mean_factor);
}

TEST_F(SweepFixture, FullGridAndBaselineRows) {
  const auto rows = ablation_sweep(base, 2, SweepGrid{}, train_set, eval_set, 2);
  ASSERT_EQ(rows.size(), 18u);
  TrainConfig grpo = base;
  grpo.algorithm = Algorithm::grpo;
  for (const auto& r : rows) {
    EXPECT_EQ(r.status, "ok");
    if (r.config.modulation.alpha != 0.0) continue;
    grpo.group_size = r.config.group_size;
    const auto s = summarize(train(grpo, 2, train_set), eval_set, grpo.max_len);
    EXPECT_EQ(r.pass_at_1, s.pass_at_1);
    EXPECT_EQ(r.mean_se, s.mean_se);
    EXPECT_EQ(r.mean_factor, 1.0);
  }

  std::ostringstream os;
  write_sweep_csv(os, rows, [](const TrainConfig&) { return std::string("h"); });
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, kSweepCsvHeader);
  std::size_t n = 0;
  while (std::getline(is, line)) ++n;
  EXPECT_EQ(n, 18u);
}

TEST_F(SweepFixture, FailingCellIsRecorded) {
  SweepGrid grid{{0.0}, {WeightKind::linear}, {1, 4}, {0}};
  const auto rows = ablation_sweep(base, 2, grid, train_set, eval_set);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NE(rows[0].status.find("error"), std::string::npos);
  EXPECT_TRUE(std::isnan(rows[0].pass_at_1));
  EXPECT_EQ(rows[1].status, "ok");
}

TEST(SweepGrid, RejectsEmptyAxes) {
  SweepGrid g;
  g.kinds.clear();
  EXPECT_THROW(g.validate(), ConfigError);
  EXPECT_EQ(SweepGrid{}.size(), 18u);
}

TEST(Csv, Escaping) {
  EXPECT_EQ(csv_escape("ok"), "ok");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"x\""), "\"say \"\"x\"\"\"");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(format_double(0.5), "0.5");
}

}  // namespace
}  // namespace seedgrpo
