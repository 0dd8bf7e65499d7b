#pragma once

// Synthetic data generation for the simulation protocols: the
// univariate logistic-ramp setting, bivariate PET-like phantoms with
// three tissue classes on concentric templates, and lesion injection.

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bgadj/linalg.hpp"
#include "bgadj/mixture.hpp"
#include "bgadj/parallel.hpp"
#include "bgadj/rng.hpp"
#include "bgadj/stats.hpp"

namespace bgadj {

/// Circular lesion: intensity N(mean, sd^2) drawn independently per
/// pixel and per scan, applied to both scans.
struct LesionSpec {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 10.0;
  double intensity_mean = 15.0;
  double intensity_sd = 1.0;

  void validate() const {
    if (!(radius > 0.0)) throw std::invalid_argument("LesionSpec: radius must be > 0");
    if (!(intensity_sd >= 0.0)) throw std::invalid_argument("LesionSpec: sd must be >= 0");
  }
};

enum class TemplateStyle { concentric, ramp };

/// b_1 of the univariate setting: Phi(10 t - 4).
inline double univariate_b1(double t) { return norm_cdf(10.0 * t - 4.0); }

/// The univariate simulation setting: templates b_1(t) = Phi(10t - 4)
/// on an equally spaced grid over [0, 1] with n = 1000, gamma =
/// (0.2, 0.8), means (0.1, 0.2) and standard deviations (0.1, 0.1).
inline std::pair<std::shared_ptr<const TemplateStack>, MixtureModel> univariate_setting(
    std::size_t n = 1000) {
  VoxelGrid grid{static_cast<int>(n), 1};
  std::vector<double> b(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    b[i * 2] = univariate_b1(t);
    b[i * 2 + 1] = 1.0 - b[i * 2];
  }
  auto templates = std::make_shared<const TemplateStack>(grid, 2, std::move(b));
  std::vector<GaussianComponent> comps;
  comps.emplace_back(Vec{0.1}, SpdMatrix::diagonal(Vec{0.01}));
  comps.emplace_back(Vec{0.2}, SpdMatrix::diagonal(Vec{0.01}));
  MixtureModel model = make_spatial_model(std::move(comps), Vec{0.2, 0.8}, templates);
  return {templates, model};
}

namespace detail {

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

/// Synthetic tissue-probability templates. `concentric` (K = 3) builds
/// a CSF-analog core, a GM-analog band and a WM-analog exterior via
/// logistic radial transitions (class order GM, WM, CSF to match the
/// phantom parameters); `ramp` (K = 2) reproduces the univariate
/// logistic ramp along the vectorized index.
inline std::shared_ptr<const TemplateStack> synth_templates(int nx, int ny,
                                                            TemplateStyle style) {
  VoxelGrid grid{nx, ny};
  const std::size_t n = grid.size();
  if (n == 0) throw std::invalid_argument("synth_templates: empty grid");
  if (style == TemplateStyle::ramp) {
    std::vector<double> b(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      b[i * 2] = univariate_b1(t);
      b[i * 2 + 1] = 1.0 - b[i * 2];
    }
    return std::make_shared<const TemplateStack>(grid, 2, std::move(b));
  }
  const double m = std::min(nx, ny);
  const double r1 = 0.26 * m;   // CSF core -> GM band transition
  const double r2 = 0.50 * m;   // GM band -> WM exterior transition
  const double w = 0.02 * m;
  const double cx = 0.5 * (nx - 1);
  const double cy = 0.5 * (ny - 1);
  std::vector<double> b(n * 3);
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      const double csf = detail::logistic((r1 - d) / w);
      const double wm = detail::logistic((d - r2) / w);
      const double gm = detail::logistic((d - r1) / w) * detail::logistic((r2 - d) / w);
      const std::size_t i = grid.index(x, y);
      const double sum = gm + wm + csf;
      b[i * 3 + 0] = gm / sum;
      b[i * 3 + 1] = wm / sum;
      b[i * 3 + 2] = csf / sum;
    }
  }
  return std::make_shared<const TemplateStack>(grid, 3, std::move(b));
}

/// Phantom component parameters (GM, WM, CSF; SUV units, two scans).
inline std::vector<GaussianComponent> phantom_components() {
  std::vector<GaussianComponent> comps;
  comps.emplace_back(Vec{4.91, 6.68},
                     SpdMatrix(Mat(2, 2, {1.23, 1.63, 1.63, 2.21})));
  comps.emplace_back(Vec{8.04, 10.77},
                     SpdMatrix(Mat(2, 2, {1.28, 1.34, 1.34, 1.61})));
  comps.emplace_back(Vec{2.76, 3.71},
                     SpdMatrix(Mat(2, 2, {0.24, 0.31, 0.31, 0.44})));
  return comps;
}

inline Vec phantom_gamma() { return {0.94, 0.01, 0.05}; }

/// Lesion default: centered on a pixel in the GM-dominant band.
inline LesionSpec default_lesion(int nx, int ny) {
  LesionSpec l;
  const double m = std::min(nx, ny);
  l.cx = std::round(0.5 * (nx - 1) + 0.35 * m);
  l.cy = std::round(0.5 * (ny - 1));
  return l;
}

struct ScenarioSpec {
  char scenario = 'A';  // 'A' (no lesion) or 'B' (lesion)
  int nx = 320;
  int ny = 256;
  MixtureModel model;
  std::optional<LesionSpec> lesion;
  std::uint64_t seed = 1;

  void validate() const {
    if (scenario != 'A' && scenario != 'B')
      throw std::invalid_argument("ScenarioSpec: scenario must be A or B");
    if (scenario == 'B' && !lesion)
      throw std::invalid_argument("ScenarioSpec: scenario B requires a lesion");
    if (scenario == 'A' && lesion)
      throw std::invalid_argument("ScenarioSpec: scenario A forbids a lesion");
    if (lesion) lesion->validate();
    model.validate();
    if (model.kind == WeightKind::spatial &&
        !(model.templates->grid() == VoxelGrid{nx, ny}))
      throw std::invalid_argument("ScenarioSpec: template grid mismatch");
  }
};

inline ScenarioSpec default_scenario(char scenario, int nx = 320, int ny = 256,
                                     std::uint64_t seed = 1) {
  ScenarioSpec s;
  s.scenario = scenario;
  s.nx = nx;
  s.ny = ny;
  s.seed = seed;
  auto templates = synth_templates(nx, ny, TemplateStyle::concentric);
  s.model = make_spatial_model(phantom_components(), phantom_gamma(), templates);
  if (scenario == 'B') s.lesion = default_lesion(nx, ny);
  return s;
}

/// Pixels with (x - cx)^2 + (y - cy)^2 <= radius^2. The disc must lie
/// inside the grid.
inline std::vector<std::uint8_t> lesion_mask(const VoxelGrid& grid, const LesionSpec& l) {
  l.validate();
  if (l.cx - l.radius < -0.5 || l.cx + l.radius > grid.nx - 0.5 ||
      l.cy - l.radius < -0.5 || l.cy + l.radius > grid.ny - 0.5)
    throw std::invalid_argument("lesion_mask: lesion extends outside the grid");
  std::vector<std::uint8_t> mask(grid.size(), 0);
  const double r2 = l.radius * l.radius;
  for (int y = 0; y < grid.ny; ++y)
    for (int x = 0; x < grid.nx; ++x) {
      const double dx = x - l.cx;
      const double dy = y - l.cy;
      if (dx * dx + dy * dy <= r2) mask[grid.index(x, y)] = 1;
    }
  return mask;
}

/// Overwrites masked pixels with independent N(mean, sd^2) draws per
/// pixel and per channel; unmasked pixels are untouched. Pixel-keyed
/// streams make the output independent of the worker count.
inline void inject_lesion(std::vector<double>& obs, const VoxelGrid& grid, std::size_t p,
                          const std::vector<std::uint8_t>& mask, double mean, double sd,
                          std::uint64_t seed) {
  const std::size_t n = grid.size();
  if (mask.size() != n || obs.size() != n * p)
    throw std::invalid_argument("inject_lesion: size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    RngStream g(seed, 0x6c6573u, i);
    for (std::size_t c = 0; c < p; ++c) obs[i * p + c] = mean + sd * g.normal();
  }
}

struct SampleResult {
  std::vector<double> obs;          // n x p
  std::vector<int> labels;          // true class per voxel
  std::vector<std::uint8_t> mask;   // lesion mask (empty for scenario A)
  MixtureModel model;               // generating model (ground truth)
};

/// Draws one field realization from the (global or spatial) mixture:
/// class from pi_i, then y_i ~ N(mu_c, Sigma_c), with per-pixel keyed
/// streams.
inline SampleResult sample_field(const MixtureModel& model, const VoxelGrid& grid,
                                 std::uint64_t seed, int threads = 0) {
  model.validate();
  const std::size_t n = grid.size();
  const std::size_t p = model.p();
  const std::size_t K = model.K();
  if (model.kind == WeightKind::spatial && !(model.templates->grid() == grid))
    throw std::invalid_argument("sample_field: template grid mismatch");
  const PreparedModel pm = PreparedModel::from(model);

  SampleResult out;
  out.obs.resize(n * p);
  out.labels.resize(n);
  out.model = model;
  parallel_chunks(n, 8192, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    double z[detail::kMaxDim], y[detail::kMaxDim], pi[detail::kMaxDim];
    for (std::size_t i = lo; i < hi; ++i) {
      if (model.kind == WeightKind::global) {
        for (std::size_t k = 0; k < K; ++k) pi[k] = model.weights[k];
      } else {
        const double* b = model.templates->row(i);
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) denom += model.weights[k] * b[k];
        for (std::size_t k = 0; k < K; ++k) pi[k] = model.weights[k] * b[k] / denom;
      }
      RngStream g(seed, 0x67656eu, i);
      const double u = g.uniform();
      std::size_t cls = 0;
      double acc = pi[0];
      while (cls + 1 < K && u > acc) acc += pi[++cls];
      out.labels[i] = static_cast<int>(cls);
      g.normals(z, p);
      detail::matvec(pm.comps[cls].sqrt_cov.data(), z, y, p);
      for (std::size_t c = 0; c < p; ++c) out.obs[i * p + c] = y[c] + pm.comps[cls].mean[c];
    }
  });
  return out;
}

/// Full scenario generation: field draw plus (scenario B) the lesion
/// overwrite. Returns the complete ground truth for evaluation.
inline SampleResult generate(const ScenarioSpec& spec) {
  spec.validate();
  const VoxelGrid grid{spec.nx, spec.ny};
  SampleResult out = sample_field(spec.model, grid, spec.seed);
  if (spec.scenario == 'B') {
    out.mask = lesion_mask(grid, *spec.lesion);
    inject_lesion(out.obs, grid, spec.model.p(), out.mask, spec.lesion->intensity_mean,
                  spec.lesion->intensity_sd, spec.seed);
  }
  return out;
}

}  // namespace bgadj
