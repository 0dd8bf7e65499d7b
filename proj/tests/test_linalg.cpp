#include "bgadj/linalg.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "bgadj/rng.hpp"

using namespace bgadj;

namespace {

Mat random_spd(RngStream& g, std::size_t p) {
  Mat a(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) a(i, j) = g.normal();
  Mat m = a.transposed() * a;
  const double ridge = 0.05 + 0.5 * std::abs(g.normal());
  for (std::size_t i = 0; i < p; ++i) m(i, i) += ridge;
  return m;
}

double rel_frobenius(const Mat& a, const Mat& b) {
  const double denom = std::max(b.frobenius_norm(), 1e-300);
  return (a - b).frobenius_norm() / denom;
}

}  // namespace

TEST(SpdSqrt, IdentityAndDiagonal) {
  const SpdMatrix id = SpdMatrix::identity(2);
  EXPECT_LT(rel_frobenius(spd_sqrt(id).mat(), Mat::identity(2)), 1e-14);

  const SpdMatrix d = SpdMatrix::diagonal({4.0, 9.0});
  const Mat root = spd_sqrt(d).mat();
  EXPECT_NEAR(root(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(root(1, 1), 3.0, 1e-12);
  EXPECT_NEAR(root(0, 1), 0.0, 1e-12);
}

// Closed form for the root of [[1, rho], [rho, 1]] with rho = 0.5:
// eigenvectors (1,1)/sqrt(2) and (1,-1)/sqrt(2) give diagonal entries
// (sqrt(1.5)+sqrt(0.5))/2 and off-diagonal (sqrt(1.5)-sqrt(0.5))/2.
TEST(SpdSqrt, EquiCorrelationClosedForm) {
  const SpdMatrix m(Mat(2, 2, {1.0, 0.5, 0.5, 1.0}));
  const Mat root = spd_sqrt(m).mat();
  const double diag = 0.5 * (std::sqrt(1.5) + std::sqrt(0.5));
  const double off = 0.5 * (std::sqrt(1.5) - std::sqrt(0.5));
  EXPECT_NEAR(root(0, 0), diag, 1e-12);
  EXPECT_NEAR(root(1, 1), diag, 1e-12);
  EXPECT_NEAR(root(0, 1), off, 1e-12);
  EXPECT_NEAR(off, 0.2588, 5e-5);
  EXPECT_NEAR(diag, 0.9659, 5e-5);
  // confirm by squaring
  EXPECT_LT(rel_frobenius(root * root, m.mat()), 1e-12);
}

TEST(SpdInvSqrt, Examples) {
  EXPECT_LT(rel_frobenius(spd_inv_sqrt(SpdMatrix::identity(2)).mat(), Mat::identity(2)),
            1e-14);
  const SpdMatrix d = SpdMatrix::diagonal({4.0});
  EXPECT_NEAR(spd_inv_sqrt(d).mat()(0, 0), 0.5, 1e-14);
}

TEST(SpdInvSqrt, MatchesInverseOfSqrt) {
  RngStream g(11);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t p = 1 + (rep % 4);
    const SpdMatrix m(random_spd(g, p));
    const Mat a = spd_inv_sqrt(m).mat();
    const Mat b = spd_sqrt(m).mat().inverse();
    EXPECT_LT(rel_frobenius(a, b), 1e-9);
  }
}

TEST(SpdMatrix, RootPropertyOverRandomMatrices) {
  RngStream g(7);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t p = 1 + (rep % 4);
    const SpdMatrix m(random_spd(g, p));
    const Mat root = spd_sqrt(m).mat();
    EXPECT_LT(rel_frobenius(root * root, m.mat()), 1e-9);
    const Mat prod = spd_inv_sqrt(m).mat() * root;
    EXPECT_LT(rel_frobenius(prod, Mat::identity(p)), 1e-9);
  }
}

TEST(SpdMatrix, RejectsNonSpd) {
  Mat asym(2, 2, {1.0, 0.2, 0.0, 1.0});
  EXPECT_THROW(SpdMatrix{asym}, std::invalid_argument);

  Mat indefinite(2, 2, {1.0, 2.0, 2.0, 1.0});
  EXPECT_THROW(SpdMatrix{indefinite}, SingularityError);

  // eigenvalue below the 1e-12 relative acceptance threshold
  Mat nearly(2, 2, {1.0, 1.0, 1.0, 1.0 + 1e-14});
  EXPECT_THROW(SpdMatrix{nearly}, SingularityError);
}

TEST(SpdMatrix, LogDetAndQuadForm) {
  const SpdMatrix d = SpdMatrix::diagonal({2.0, 8.0});
  EXPECT_NEAR(d.log_det(), std::log(16.0), 1e-12);
  EXPECT_NEAR(d.inv_quad_form({2.0, 4.0}), 4.0 / 2.0 + 16.0 / 8.0, 1e-12);
}

TEST(Mat, InverseAndDet) {
  Mat m(2, 2, {2.0, 1.0, 1.0, 3.0});
  const Mat inv = m.inverse();
  EXPECT_LT(rel_frobenius(m * inv, Mat::identity(2)), 1e-13);
  EXPECT_NEAR(m.det(), 5.0, 1e-12);

  Mat sing(2, 2, {1.0, 2.0, 2.0, 4.0});
  EXPECT_THROW(sing.inverse(), SingularityError);
  EXPECT_NEAR(sing.det(), 0.0, 1e-12);
}

TEST(Mat, SpectralNorm) {
  // rank-1 u v^T has spectral norm ||u|| ||v||
  Mat m(2, 3);
  const Vec u{3.0, 4.0};
  const Vec v{1.0, 2.0, 2.0};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) m(i, j) = u[i] * v[j];
  EXPECT_NEAR(spectral_norm(m), 5.0 * 3.0, 1e-9);
}
