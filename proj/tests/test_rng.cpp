#include "bgadj/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bgadj/stats.hpp"

using namespace bgadj;

TEST(RngStream, DeterministicPerKey) {
  RngStream a(42, 1, 2, 3);
  RngStream b(42, 1, 2, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());

  RngStream c(42, 1, 2, 4);
  RngStream d(42, 1, 2, 3);
  int differs = 0;
  for (int i = 0; i < 100; ++i) differs += c.next_u64() != d.next_u64();
  EXPECT_GT(differs, 95);
}

TEST(RngStream, UniformRange) {
  RngStream g(5);
  double mn = 1.0, mx = 0.0, sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
  }
  EXPECT_GT(mn, 0.0);
  EXPECT_LE(mx, 1.0);
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(RngStream, NormalsPassKs) {
  RngStream g(9);
  std::vector<double> z(100000);
  for (double& v : z) v = g.normal();
  EXPECT_GT(ks_test(z).p_value, 0.001);
  double mean = 0.0, var = 0.0;
  for (double v : z) mean += v;
  mean /= z.size();
  for (double v : z) var += (v - mean) * (v - mean);
  var /= z.size();
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(RngStream, NormalPairMatchesCachedPath) {
  RngStream a(31, 7);
  RngStream b(31, 7);
  double x, y;
  a.normal_pair(x, y);
  EXPECT_DOUBLE_EQ(b.normal(), x);
  EXPECT_DOUBLE_EQ(b.normal(), y);
}
