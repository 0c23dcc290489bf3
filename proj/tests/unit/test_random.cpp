#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "sfdde/parallel.hpp"
#include "sfdde/random.hpp"
#include "sfdde/stats.hpp"

using sfdde::Philox4x32;
using sfdde::RandomStream;
using sfdde::StreamPurpose;

// Known-answer vectors published with the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::encrypt({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x6627e8d5u);
  EXPECT_EQ(out[1], 0xe169c58du);
  EXPECT_EQ(out[2], 0xbc57ac4cu);
  EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
  const auto out = Philox4x32::encrypt({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                       {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out[0], 0x408f276du);
  EXPECT_EQ(out[1], 0x41c83b0eu);
  EXPECT_EQ(out[2], 0xa20bc7c6u);
  EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::encrypt({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                       {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out[0], 0xd16cfe09u);
  EXPECT_EQ(out[1], 0x94fdccebu);
  EXPECT_EQ(out[2], 0x5001e420u);
  EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(RandomStream, ReproducibleAndDistinct) {
  RandomStream a(7, 3, StreamPurpose::Brownian);
  RandomStream b(7, 3, StreamPurpose::Brownian);
  RandomStream c(7, 4, StreamPurpose::Brownian);
  RandomStream d(7, 3, StreamPurpose::Substitute);
  int equal_c = 0, equal_d = 0;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    equal_c += (x == c.normal());
    equal_d += (x == d.normal());
  }
  EXPECT_EQ(equal_c, 0);
  EXPECT_EQ(equal_d, 0);
}

TEST(RandomStream, UniformInOpenInterval) {
  RandomStream s(1, 0, StreamPurpose::Probe);
  std::vector<double> u(20000);
  for (auto& x : u) {
    x = s.uniform();
    ASSERT_GT(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
  const auto [d, p] = sfdde::stats::kolmogorov_smirnov(std::span<const double>(u), [](double x) { return x; });
  EXPECT_GT(p, 1e-3) << "KS statistic " << d;
}

TEST(RandomStream, NormalMoments) {
  RandomStream s(11, 0, StreamPurpose::Probe);
  std::vector<double> z(200000);
  for (auto& x : z) x = s.normal();
  const auto m = sfdde::stats::summarize(z);
  EXPECT_NEAR(m.mean, 0.0, 4.0 / std::sqrt(200000.0));
  EXPECT_NEAR(m.sample_variance, 1.0, 0.02);
  const auto [d, p] = sfdde::stats::kolmogorov_smirnov(
      std::span<const double>(z), [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
  EXPECT_GT(p, 1e-3) << d;
}

TEST(RandomStream, ExponentialMean) {
  RandomStream s(5, 9, StreamPurpose::Probe);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += s.exponential();
  EXPECT_NEAR(sum / n, 1.0, 5.0 / std::sqrt(n));
}

TEST(ParallelFor, ThreadCountInvariant) {
  auto run = [](int threads) {
    std::vector<double> slots(64);
    sfdde::parallel_for(slots.size(), threads, [&](std::size_t i) {
      RandomStream s(42, i, StreamPurpose::Brownian);
      double acc = 0.0;
      for (int k = 0; k < 100; ++k) acc += s.normal();
      slots[i] = acc;
    });
    double total = 0.0;
    for (double v : slots) total += v;
    return total;
  };
  const double one = run(1);
  EXPECT_EQ(one, run(2));
  EXPECT_EQ(one, run(7));
}

TEST(ParallelFor, PropagatesException) {
  EXPECT_THROW(sfdde::parallel_for(10, 3, [](std::size_t i) {
    if (i == 5) throw std::runtime_error("boom");
  }),
               std::runtime_error);
}
