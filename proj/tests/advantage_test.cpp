#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "seedgrpo/advantage.hpp"
#include "seedgrpo/rng.hpp"

namespace seedgrpo {
namespace {

constexpr WeightKind kAllKinds[] = {WeightKind::linear, WeightKind::exponential, WeightKind::focal};

TEST(GroupAdvantages, Cases) {
  EXPECT_EQ(group_advantages(std::vector<double>{0, 0, 0, 0}), (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(group_advantages(std::vector<double>{1, 1, 1}), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(group_advantages(std::vector<double>{1, 1, 0, 0}), (std::vector<double>{0.5, 0.5, -0.5, -0.5}));
  EXPECT_THROW(group_advantages(std::vector<double>{}), InputError);
}

TEST(GroupAdvantages, NoStdNormalization) {
  // With std scaling, (1,0,0,0) would give sqrt(3) for the winner; without it 0.75.
  const auto a = group_advantages(std::vector<double>{1, 0, 0, 0});
  EXPECT_EQ(a[0], 0.75);
  EXPECT_EQ(a[1], -0.25);
}

TEST(GroupAdvantages, ZeroSumProperty) {
  CounterRng rng(1);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<double> r(2 + rng.below(63));
    for (double& x : r) x = static_cast<double>(rng.below(2));
    const auto a = group_advantages(r);
    EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 0.0, 1e-12);
  }
}

TEST(WeightFunction, Values) {
  for (WeightKind k : kAllKinds) EXPECT_EQ(weight_function(k, 2.0, 0.0), 1.0);
  EXPECT_NEAR(weight_function(WeightKind::linear, 2.0, 0.02), 0.98, 1e-15);
  EXPECT_NEAR(weight_function(WeightKind::focal, 2.0, 0.5), 0.25, 1e-15);
  EXPECT_NEAR(weight_function(WeightKind::exponential, 2.0, 1.0), std::exp(-1.0), 1e-15);
  EXPECT_EQ(weight_function(WeightKind::linear, 2.0, 1.0), 0.0);
  EXPECT_EQ(weight_function(WeightKind::focal, 2.0, 1.0), 0.0);
  EXPECT_EQ(weight_function(WeightKind::linear, 2.0, 3.0), 0.0);  // clamped, no sign flip
  EXPECT_THROW(weight_function(WeightKind::linear, 2.0, -0.1), InputError);
  EXPECT_THROW(weight_function(static_cast<WeightKind>(42), 2.0, 0.1), ConfigError);
}

TEST(WeightFunction, MonotoneAndBounded) {
  for (WeightKind k : kAllKinds)
    for (double gamma : {0.5, 1.0, 2.0, 3.0}) {
      double prev = 1.0;
      for (int i = 0; i <= 2000; ++i) {
        const double u = i / 1000.0;
        const double f = weight_function(k, gamma, u);
        EXPECT_LE(f, prev);
        if (u <= 1.0) {
          EXPECT_GE(f, 0.0);
          EXPECT_LE(f, 1.0);
        }
        prev = f;
      }
    }
}

TEST(WeightKind, Parse) {
  EXPECT_EQ(parse_weight_kind("linear"), WeightKind::linear);
  EXPECT_EQ(parse_weight_kind("exp"), WeightKind::exponential);
  EXPECT_EQ(parse_weight_kind("exponential"), WeightKind::exponential);
  EXPECT_EQ(parse_weight_kind("focal"), WeightKind::focal);
  EXPECT_THROW(parse_weight_kind("cosine"), ConfigError);
}

TEST(Modulate, AlphaZeroIsIdentity) {
  const std::vector<double> a{0.375, -0.125, -0.125, -0.125};
  for (WeightKind k : kAllKinds) {
    const auto m = modulate(a, 1.3, std::log(4.0), {0.0, k, 2.0});
    EXPECT_EQ(m.factor, 1.0);
    EXPECT_EQ(m.modulated, a);
  }
}

TEST(Modulate, HandEvaluation) {
  const std::vector<double> a{0.5, -0.5};
  const double se_max = std::log(2.0);
  const auto m = modulate(a, se_max, se_max, {0.02, WeightKind::linear, 2.0});
  EXPECT_NEAR(m.modulated[0], 0.49, 1e-15);
  EXPECT_NEAR(m.modulated[1], -0.49, 1e-15);
}

TEST(Modulate, ZeroEntropyKeepsAdvantages) {
  const std::vector<double> a{0.5, -0.5};
  for (WeightKind k : kAllKinds) EXPECT_EQ(modulate(a, 0.0, std::log(2.0), {0.7, k, 2.0}).modulated, a);
}

TEST(Modulate, Errors) {
  const std::vector<double> a{0.5, -0.5};
  EXPECT_THROW(modulate(a, 0.1, 0.0, {}), ConfigError);
  EXPECT_THROW(modulate(a, -0.1, 1.0, {}), InputError);
  EXPECT_THROW((ModulationConfig{-1.0, WeightKind::linear, 2.0}).validate(), ConfigError);
  EXPECT_THROW((ModulationConfig{0.1, WeightKind::focal, 0.0}).validate(), ConfigError);
}

TEST(Modulate, ZeroSumSignAndRankingPreserved) {
  CounterRng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> r(2 + rng.below(15));
    for (double& x : r) x = static_cast<double>(rng.below(2));
    const auto a = group_advantages(r);
    const double se_max = std::log(static_cast<double>(r.size()));
    const ModulationConfig cfg{rng.uniform(), kAllKinds[rng.below(3)], 0.5 + 3 * rng.uniform()};
    const auto m = modulate(a, se_max * rng.uniform(), se_max, cfg);
    EXPECT_GE(m.factor, 0.0);
    EXPECT_LE(m.factor, 1.0);
    EXPECT_NEAR(std::accumulate(m.modulated.begin(), m.modulated.end(), 0.0), 0.0, 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(m.modulated[i], a[i] * m.factor);
      if (m.factor > 0) {
        EXPECT_EQ(std::signbit(m.modulated[i]) && m.modulated[i] != 0, std::signbit(a[i]) && a[i] != 0);
        for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[i] < a[j], m.modulated[i] < m.modulated[j]);
      }
    }
  }
}

}  // namespace
}  // namespace seedgrpo
