#include "bgadj/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "bgadj/stats.hpp"

using namespace bgadj;

TEST(UnivariateSetting, DefaultParameterValues) {
  EXPECT_NEAR(univariate_b1(0.4), 0.5, 1e-14);
  EXPECT_NEAR(univariate_b1(0.0), norm_cdf(-4.0), 1e-14);
  EXPECT_NEAR(univariate_b1(0.0), 3.167e-5, 2e-8);

  auto [templates, model] = univariate_setting();
  EXPECT_EQ(templates->grid().size(), 1000u);
  EXPECT_EQ(model.weights[0], 0.2);
  EXPECT_EQ(model.weights[1], 0.8);
  EXPECT_EQ(model.components[0].mean[0], 0.1);
  EXPECT_EQ(model.components[1].mean[0], 0.2);
  EXPECT_NEAR(model.components[0].cov(0, 0), 0.01, 1e-15);
  // grid endpoints carry the template function values
  EXPECT_NEAR((*templates)(0, 0), norm_cdf(-4.0), 1e-12);
  EXPECT_NEAR((*templates)(999, 0), norm_cdf(6.0), 1e-12);
}

TEST(SynthTemplates, RowsNormalizedAndCsfCore) {
  auto t = synth_templates(96, 80, TemplateStyle::concentric);
  EXPECT_EQ(t->components(), 3u);
  for (std::size_t i = 0; i < t->grid().size(); ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      ASSERT_GE((*t)(i, k), 0.0);
      sum += (*t)(i, k);
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
  // center pixel is CSF-analog dominated
  const std::size_t center = t->grid().index(48, 40);
  EXPECT_GE((*t)(center, 2), 0.9);
}

TEST(SynthTemplates, RampReproducesUnivariateSetting) {
  auto ramp = synth_templates(1000, 1, TemplateStyle::ramp);
  auto [uni, model] = univariate_setting();
  ASSERT_EQ(ramp->components(), 2u);
  for (std::size_t i = 0; i < 1000; ++i)
    ASSERT_NEAR((*ramp)(i, 0), (*uni)(i, 0), 1e-14);
}

TEST(LesionMask, LatticeCountForRadiusTen) {
  LesionSpec l;
  l.cx = 100.0;
  l.cy = 100.0;
  l.radius = 10.0;
  const auto mask = lesion_mask(VoxelGrid{200, 200}, l);
  std::size_t count = 0;
  for (auto m : mask) count += m;
  // brute-force lattice enumeration oracle
  std::size_t oracle = 0;
  for (int dx = -10; dx <= 10; ++dx)
    for (int dy = -10; dy <= 10; ++dy)
      if (dx * dx + dy * dy <= 100) ++oracle;
  EXPECT_EQ(oracle, 317u);
  EXPECT_EQ(count, oracle);
}

TEST(LesionMask, OutsideGridRejected) {
  LesionSpec l;
  l.cx = 5.0;
  l.cy = 5.0;
  l.radius = 10.0;
  EXPECT_THROW(lesion_mask(VoxelGrid{64, 64}, l), std::invalid_argument);
}

TEST(InjectLesion, ZeroSdAndEmptyMask) {
  VoxelGrid grid{8, 8};
  std::vector<double> obs(grid.size() * 2, 1.0);
  std::vector<std::uint8_t> mask(grid.size(), 0);
  mask[10] = 1;
  std::vector<double> copy = obs;
  inject_lesion(copy, grid, 2, mask, 15.0, 0.0, 3);
  EXPECT_DOUBLE_EQ(copy[10 * 2], 15.0);
  EXPECT_DOUBLE_EQ(copy[10 * 2 + 1], 15.0);
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (i != 10) {
      ASSERT_DOUBLE_EQ(copy[i * 2], 1.0);
      ASSERT_DOUBLE_EQ(copy[i * 2 + 1], 1.0);
    }

  std::vector<std::uint8_t> empty(grid.size(), 0);
  std::vector<double> untouched = obs;
  inject_lesion(untouched, grid, 2, empty, 15.0, 1.0, 3);
  EXPECT_EQ(untouched, obs);
}

TEST(ScenarioSpec, InvariantsEnforced) {
  auto a = default_scenario('A', 64, 64, 1);
  a.lesion = default_lesion(64, 64);
  EXPECT_THROW(a.validate(), std::invalid_argument);
  auto b = default_scenario('B', 64, 64, 1);
  b.lesion.reset();
  EXPECT_THROW(b.validate(), std::invalid_argument);
}

TEST(Generate, DeterministicAcrossRunsAndWorkerCounts) {
  auto spec = default_scenario('B', 96, 96, 42);
  const SampleResult a = generate(spec);
  const SampleResult b = generate(spec);
  ASSERT_EQ(a.obs, b.obs);
  ASSERT_EQ(a.labels, b.labels);
  ASSERT_EQ(a.mask, b.mask);
  const SampleResult one = sample_field(spec.model, VoxelGrid{96, 96}, 42, 1);
  const SampleResult four = sample_field(spec.model, VoxelGrid{96, 96}, 42, 4);
  ASSERT_EQ(one.obs, four.obs);
}

TEST(Generate, ClassFrequenciesMatchMixingProbabilities) {
  // ~10^6 pixels: empirical class counts within 3 binomial SEs of the
  // summed mixing probabilities
  auto templates = synth_templates(1024, 1024, TemplateStyle::concentric);
  MixtureModel model = make_spatial_model(phantom_components(), phantom_gamma(), templates);
  const SampleResult data = sample_field(model, templates->grid(), 7);
  const auto pi = spatial_weights(model.weights, *templates);
  const std::size_t n = templates->grid().size();
  Vec expected(3, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 3; ++k) expected[k] += pi[i * 3 + k];
  Vec observed(3, 0.0);
  for (int lab : data.labels) observed[lab] += 1.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double se = std::sqrt(expected[k] * (1.0 - expected[k] / n));
    EXPECT_NEAR(observed[k], expected[k], 3.0 * se) << "class " << k;
  }
}

TEST(Generate, PerClassMomentsConvergeAtRootNRate) {
  auto spec = default_scenario('A', 320, 256, 9);
  const SampleResult data = generate(spec);
  const std::size_t n = VoxelGrid{320, 256}.size();
  for (std::size_t k = 0; k < 3; ++k) {
    Vec mean(2, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (data.labels[i] != static_cast<int>(k)) continue;
      mean[0] += data.obs[i * 2];
      mean[1] += data.obs[i * 2 + 1];
      ++count;
    }
    ASSERT_GT(count, 100u);
    mean[0] /= count;
    mean[1] /= count;
    for (std::size_t c = 0; c < 2; ++c) {
      const double sd = std::sqrt(spec.model.components[k].cov(c, c));
      EXPECT_NEAR(mean[c], spec.model.components[k].mean[c],
                  5.0 * sd / std::sqrt(static_cast<double>(count)))
          << "class " << k << " channel " << c;
    }
  }
}

TEST(Generate, LesionPixelsExceedBackgroundEnvelope) {
  // with lesion mean 15 vs background means <= 10.77, lesion pixels are
  // essentially the only ones whose both scans exceed the 99.99%
  // envelope of their own pixel's background mixture
  auto spec = default_scenario('B', 320, 256, 11);
  const SampleResult data = generate(spec);
  const auto pi = spatial_weights(spec.model.weights, *spec.model.templates);
  const double z9999 = norm_quantile(0.9999);
  const std::size_t n = VoxelGrid{320, 256}.size();
  std::size_t lesion_hits = 0, lesion_total = 0, background_false = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec env(2, -1e300);
    for (std::size_t k = 0; k < 3; ++k) {
      if (pi[i * 3 + k] < 1e-3) continue;
      for (std::size_t c = 0; c < 2; ++c) {
        const auto& comp = spec.model.components[k];
        env[c] = std::max(env[c], comp.mean[c] + z9999 * std::sqrt(comp.cov(c, c)));
      }
    }
    const bool exceeds = data.obs[i * 2] > env[0] && data.obs[i * 2 + 1] > env[1];
    if (data.mask[i]) {
      ++lesion_total;
      lesion_hits += exceeds;
    } else {
      background_false += exceeds;
    }
  }
  EXPECT_EQ(lesion_total, 317u);
  EXPECT_GE(lesion_hits, 300u);       // probability ~1 per pixel
  EXPECT_LE(background_false, 60u);   // ~1e-4 scale false-positive rate
}

TEST(Generate, ScenarioBRawDifferenceNearZeroInLesion) {
  auto spec = default_scenario('B', 320, 256, 13);
  const SampleResult data = generate(spec);
  double diff = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.mask.size(); ++i) {
    if (!data.mask[i]) continue;
    diff += data.obs[i * 2 + 1] - data.obs[i * 2];
    ++count;
  }
  diff /= count;
  // both scans share the N(15, 1) lesion law, so the mean difference
  // vanishes (SE = sqrt(2/317) ~ 0.08)
  EXPECT_NEAR(diff, 0.0, 0.3);
}
