#pragma once

// Monte Carlo evaluation of the relative size R(alpha) of voxelwise
// tests based on standardized scores, the Case 1 / Case 2 heatmap
// grids, the sign-symmetry check, and the limit-regime convergence
// tables.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bgadj/canonical.hpp"
#include "bgadj/linalg.hpp"
#include "bgadj/mixture.hpp"
#include "bgadj/parallel.hpp"
#include "bgadj/rng.hpp"
#include "bgadj/stats.hpp"

namespace bgadj {

enum class Side { two, left, right };

inline const char* to_string(Side s) {
  switch (s) {
    case Side::two: return "two";
    case Side::left: return "left";
    default: return "right";
  }
}

struct TailSpec {
  double alpha = 0.001;
  Side side = Side::two;
  Vec contrast;  // unit-norm contrast a
  std::uint64_t reps = 100000;
  std::uint64_t seed = 1;
  int threads = 0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 0.5))
      throw std::invalid_argument("TailSpec: alpha must lie in (0, 0.5)");
    if (reps == 0) throw std::invalid_argument("TailSpec: reps must be positive");
    if (contrast.empty()) throw std::invalid_argument("TailSpec: contrast required");
  }
};

struct SizeEstimate {
  double R = 0.0;
  double se = 0.0;
  std::uint64_t rejections = 0;
  std::uint64_t reps = 0;
  bool wide_ci = false;  // reps * alpha < 100
};

namespace detail {

struct TailCounts {
  std::uint64_t two = 0, left = 0, right = 0;
};

// Draws (s, Z) from the latent representation, forms Y, standardizes by
// the chosen transform, applies the contrast, and counts rejections on
// all three sides in one pass.
inline TailCounts tail_counts(const MixtureModel& model, Method method,
                              Assignment assignment, const TailSpec& spec,
                              std::uint64_t cell_key) {
  model.validate();
  if (model.kind != WeightKind::global)
    throw std::invalid_argument("relative_size: global weights required");
  const PreparedModel pm = PreparedModel::from(model);
  const std::size_t p = pm.p;
  const std::size_t K = pm.K;
  if (spec.contrast.size() != p)
    throw std::invalid_argument("relative_size: contrast dimension mismatch");
  Vec a = spec.contrast;
  double norm = 0.0;
  for (double v : a) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw std::invalid_argument("relative_size: zero contrast");
  for (double& v : a) v /= norm;

  Vec log_pi(K), cum_pi(K);
  double acc = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    log_pi[k] = std::log(model.weights[k]);
    acc += model.weights[k];
    cum_pi[k] = acc;
  }
  const double thr_two = std::abs(norm_quantile(0.5 * spec.alpha));
  const double q_left = norm_quantile(spec.alpha);
  const double q_right = norm_quantile(1.0 - spec.alpha);

  const std::size_t chunk = 1 << 16;
  const std::size_t nchunks = chunk_count(spec.reps, chunk);
  std::vector<TailCounts> partial(nchunks);

  parallel_chunks(spec.reps, chunk, spec.threads,
                  [&](std::size_t ci, std::size_t lo, std::size_t hi) {
    TailCounts c;
    double z[kMaxDim], y[kMaxDim], t[kMaxDim], w[kMaxDim];
    for (std::size_t r = lo; r < hi; ++r) {
      RngStream g(spec.seed, cell_key, r);
      const double u = g.uniform();
      std::size_t cls = 0;
      while (cls + 1 < K && u > cum_pi[cls]) ++cls;
      g.normals(z, p);
      const PreparedComponent& pc = pm.comps[cls];
      matvec(pc.sqrt_cov.data(), z, y, p);
      for (std::size_t i = 0; i < p; ++i) y[i] += pc.mean[i];
      responsibilities_row(pm, log_pi.data(), y, w);
      if (assignment == Assignment::hard) hard_assign_row(w, K);
      transform_point(pm, method, y, w, t);
      const double v = dot(a.data(), t, p);
      if (std::abs(v) >= thr_two) ++c.two;
      if (v <= q_left) ++c.left;
      if (v >= q_right) ++c.right;
    }
    partial[ci] = c;
  });

  TailCounts total;
  for (const TailCounts& c : partial) {
    total.two += c.two;
    total.left += c.left;
    total.right += c.right;
  }
  return total;
}

inline SizeEstimate to_estimate(std::uint64_t count, const TailSpec& spec) {
  SizeEstimate e;
  e.rejections = count;
  e.reps = spec.reps;
  const double phat = static_cast<double>(count) / static_cast<double>(spec.reps);
  e.R = phat / spec.alpha;
  e.se = std::sqrt(std::max(phat * (1.0 - phat), 0.0) / static_cast<double>(spec.reps)) /
         spec.alpha;
  e.wide_ci = static_cast<double>(spec.reps) * spec.alpha < 100.0;
  return e;
}

}  // namespace detail

/// True rejection probability of the level-alpha test divided by alpha.
/// Two-sided rejects when |a^T T| >= |Phi^{-1}(alpha/2)|; one-sided
/// tails use Phi^{-1}(alpha) and Phi^{-1}(1-alpha).
inline SizeEstimate relative_size(const MixtureModel& model, Method method,
                                  Assignment assignment, const TailSpec& spec,
                                  std::uint64_t cell_key = 0) {
  spec.validate();
  const detail::TailCounts c = detail::tail_counts(model, method, assignment, spec, cell_key);
  switch (spec.side) {
    case Side::two: return detail::to_estimate(c.two, spec);
    case Side::left: return detail::to_estimate(c.left, spec);
    default: return detail::to_estimate(c.right, spec);
  }
}

/// All three sides from one simulation pass (shared draws).
struct ThreeSidedSize {
  SizeEstimate two, left, right;
};

inline ThreeSidedSize relative_size_all_sides(const MixtureModel& model, Method method,
                                              Assignment assignment, const TailSpec& spec,
                                              std::uint64_t cell_key = 0) {
  spec.validate();
  const detail::TailCounts c = detail::tail_counts(model, method, assignment, spec, cell_key);
  return {detail::to_estimate(c.two, spec), detail::to_estimate(c.left, spec),
          detail::to_estimate(c.right, spec)};
}

// ---------------------------------------------------------------------------
// Case 1 / Case 2 parameter families and heatmap grids.

struct CaseGrid {
  int case_id = 1;      // 1 or 2
  double rho = 0.0;     // correlation in Sigma_1
  double kappa2 = 1.0;  // scale of Sigma_1
  Vec kappa1_grid;
  Vec pi1_grid;

  void validate() const {
    if (case_id != 1 && case_id != 2)
      throw std::invalid_argument("CaseGrid: case_id must be 1 or 2");
    if (!(rho > -1.0 && rho < 1.0))
      throw std::invalid_argument("CaseGrid: rho must lie in (-1, 1)");
    if (!(kappa2 > 0.0)) throw std::invalid_argument("CaseGrid: kappa2 must be > 0");
    if (kappa1_grid.empty() || pi1_grid.empty())
      throw std::invalid_argument("CaseGrid: grids must be nonempty");
    for (double k : kappa1_grid)
      if (!(k >= 0.0)) throw std::invalid_argument("CaseGrid: kappa1 >= 0 suffices");
    for (double q : pi1_grid)
      if (!(q > 0.0 && q < 1.0))
        throw std::invalid_argument("CaseGrid: pi1 must lie in (0, 1)");
  }
};

inline Vec linspace(double lo, double hi, std::size_t n) {
  Vec v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return v;
}

/// Default 25 x 25 grid over kappa_1 in [0, 8] and pi_1 in [0.02, 0.98].
inline CaseGrid default_case_grid(int case_id, double rho, double kappa2) {
  CaseGrid g;
  g.case_id = case_id;
  g.rho = rho;
  g.kappa2 = kappa2;
  g.kappa1_grid = linspace(0.0, 8.0, 25);
  g.pi1_grid = linspace(0.02, 0.98, 25);
  return g;
}

/// Full two-class model for one heatmap cell: mu_2 = 0, Sigma_2 = I.
inline MixtureModel case_model(int case_id, double rho, double kappa2, double kappa1,
                               double pi1) {
  const double s5 = std::sqrt(5.0);
  Vec mu1 = case_id == 1 ? Vec{kappa1, kappa1}
                         : Vec{kappa1 * 2.0 / s5, kappa1 / s5};
  Mat s1m(2, 2, {kappa2, kappa2 * rho, kappa2 * rho, kappa2});
  std::vector<GaussianComponent> comps;
  comps.emplace_back(std::move(mu1), SpdMatrix(std::move(s1m)));
  comps.emplace_back(Vec{0.0, 0.0}, SpdMatrix::identity(2));
  return make_global_model(std::move(comps), Vec{pi1, 1.0 - pi1});
}

struct HeatmapCell {
  double kappa1 = 0.0;
  double pi1 = 0.0;
  SizeEstimate estimate;
};

struct HeatmapResult {
  CaseGrid grid;
  std::vector<HeatmapCell> cells;  // kappa1-major order
};

/// One relative_size evaluation per (kappa1, pi1) cell; streams are
/// keyed by (seed, cell index, replicate), so the result is
/// deterministic and independent of traversal or worker count.
inline HeatmapResult heatmap(const CaseGrid& grid, Method method, Assignment assignment,
                             const TailSpec& spec) {
  grid.validate();
  spec.validate();
  HeatmapResult out;
  out.grid = grid;
  out.cells.reserve(grid.kappa1_grid.size() * grid.pi1_grid.size());
  std::uint64_t cell = 0;
  for (double k1 : grid.kappa1_grid) {
    for (double q : grid.pi1_grid) {
      const MixtureModel model = case_model(grid.case_id, grid.rho, grid.kappa2, k1, q);
      HeatmapCell c;
      c.kappa1 = k1;
      c.pi1 = q;
      c.estimate = relative_size(model, method, assignment, spec, cell);
      out.cells.push_back(c);
      ++cell;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sign symmetry of R(alpha) in Delta_1.

struct SymmetryResult {
  SizeEstimate plus;
  SizeEstimate minus;
  bool pass = false;
};

/// Compares the two-sided R(alpha) at Delta_1 and -Delta_1 (the mean
/// difference is flipped, covariances and weights kept). Passes when
/// the estimates agree within 4 combined standard errors.
inline SymmetryResult symmetry_check(const MixtureModel& model, const TailSpec& spec) {
  if (model.K() != 2) throw std::invalid_argument("symmetry_check: K = 2 required");
  TailSpec two = spec;
  two.side = Side::two;
  MixtureModel flipped = model;
  Vec mu1 = model.components[0].mean;
  const Vec& mu2 = model.components[1].mean;
  for (std::size_t i = 0; i < mu1.size(); ++i) mu1[i] = 2.0 * mu2[i] - mu1[i];
  flipped.components[0] = GaussianComponent(std::move(mu1), model.components[0].cov);

  // Shared stream keys couple the draws, so Delta_1 = 0 gives bit-equal
  // estimates and the 4-SE comparison is conservative otherwise.
  SymmetryResult r;
  r.plus = relative_size(model, Method::t1, Assignment::soft, two, 0);
  r.minus = relative_size(flipped, Method::t1, Assignment::soft, two, 0);
  const double tol = 4.0 * std::sqrt(r.plus.se * r.plus.se + r.minus.se * r.minus.se);
  r.pass = std::abs(r.plus.R - r.minus.R) <= tol;
  return r;
}

// ---------------------------------------------------------------------------
// Limit-regime convergence tables.

struct LimitRow {
  double ks_soft = 0.0;
  double ks_hard = 0.0;
};

/// For each theta in the sequence, simulates a^T T^(1) under both
/// assignments (shared latent draws) and reports the KS distance to the
/// standard normal. Along a Theorem-style limit sequence the table
/// should decrease toward the Monte Carlo noise floor.
inline std::vector<LimitRow> limit_convergence(const std::vector<CanonicalParams>& thetas,
                                               const Vec& a, std::uint64_t reps,
                                               std::uint64_t seed, int threads = 0) {
  std::vector<LimitRow> rows;
  rows.reserve(thetas.size());
  for (std::size_t ti = 0; ti < thetas.size(); ++ti) {
    const CanonicalParams& theta = thetas[ti];
    if (a.size() != theta.p())
      throw std::invalid_argument("limit_convergence: contrast dimension mismatch");
    const CanonicalSampler sampler(theta);
    const double pi1 = sampler.pi1();
    const std::size_t p = theta.p();
    std::vector<double> soft(reps), hard(reps);
    parallel_chunks(reps, 1 << 16, threads,
                    [&](std::size_t, std::size_t lo, std::size_t hi) {
      double z[detail::kMaxDim], t[detail::kMaxDim];
      for (std::size_t r = lo; r < hi; ++r) {
        RngStream g(seed, ti, r);
        const bool s1 = g.uniform() <= pi1;
        g.normals(z, p);
        sampler.t1_from_latent(z, s1, Assignment::soft, t);
        soft[r] = detail::dot(a.data(), t, p);
        sampler.t1_from_latent(z, s1, Assignment::hard, t);
        hard[r] = detail::dot(a.data(), t, p);
      }
    });
    std::sort(soft.begin(), soft.end());
    std::sort(hard.begin(), hard.end());
    rows.push_back({ks_statistic_sorted(soft), ks_statistic_sorted(hard)});
  }
  return rows;
}

}  // namespace bgadj
