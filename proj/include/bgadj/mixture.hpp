#pragma once

// Mixture-model data types, responsibilities, hard/soft assignment, and
// the three standardization transforms (pointwise and fieldwise).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgadj/errors.hpp"
#include "bgadj/linalg.hpp"
#include "bgadj/parallel.hpp"
#include "bgadj/stats.hpp"

namespace bgadj {

struct GaussianComponent {
  Vec mean;
  SpdMatrix cov;

  GaussianComponent(Vec m, SpdMatrix c) : mean(std::move(m)), cov(std::move(c)) {
    if (mean.size() != cov.dim())
      throw std::invalid_argument("GaussianComponent: mean/cov dimension mismatch");
    for (double v : mean)
      if (!std::isfinite(v))
        throw std::invalid_argument("GaussianComponent: non-finite mean");
  }
};

/// 2-D voxel grid; locations are vectorized as i = y * nx + x.
struct VoxelGrid {
  int nx = 0;
  int ny = 0;

  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * nx + x; }
  bool operator==(const VoxelGrid&) const = default;
};

/// Per-voxel prior probability maps b_{ik}; rows renormalized to sum 1.
class TemplateStack {
 public:
  TemplateStack(VoxelGrid grid, std::size_t K, std::vector<double> values)
      : grid_(grid), K_(K), values_(std::move(values)) {
    if (K_ == 0 || grid_.size() == 0 || values_.size() != grid_.size() * K_)
      throw std::invalid_argument("TemplateStack: size mismatch");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < K_; ++k) {
        const double v = values_[i * K_ + k];
        if (!(v >= 0.0) || !std::isfinite(v))
          throw std::invalid_argument("TemplateStack: entries must be finite and >= 0");
        sum += v;
      }
      if (sum <= 0.0)
        throw DegenerateError("TemplateStack: row " + std::to_string(i) + " sums to zero");
      for (std::size_t k = 0; k < K_; ++k) values_[i * K_ + k] /= sum;
    }
  }

  const VoxelGrid& grid() const { return grid_; }
  std::size_t components() const { return K_; }
  double operator()(std::size_t i, std::size_t k) const { return values_[i * K_ + k]; }
  const double* row(std::size_t i) const { return &values_[i * K_]; }
  const std::vector<double>& values() const { return values_; }

 private:
  VoxelGrid grid_;
  std::size_t K_;
  std::vector<double> values_;
};

enum class WeightKind { global, spatial };

/// K Gaussian components plus either global weights pi_k or template
/// weights gamma_k with a template stack.
struct MixtureModel {
  std::vector<GaussianComponent> components;
  WeightKind kind = WeightKind::global;
  Vec weights;  // pi (global) or gamma (spatial); positive, sums to 1
  std::shared_ptr<const TemplateStack> templates;  // spatial only

  std::size_t K() const { return components.size(); }
  std::size_t p() const { return components.empty() ? 0 : components[0].mean.size(); }

  void validate() const {
    if (components.empty()) throw std::invalid_argument("MixtureModel: K >= 1 required");
    const std::size_t dim = components[0].mean.size();
    for (const auto& c : components)
      if (c.mean.size() != dim)
        throw std::invalid_argument("MixtureModel: components share one dimension");
    if (weights.size() != components.size())
      throw std::invalid_argument("MixtureModel: one weight per component");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w > 0.0)) throw std::invalid_argument("MixtureModel: weights must be > 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("MixtureModel: weights must sum to 1");
    if (kind == WeightKind::spatial) {
      if (!templates) throw std::invalid_argument("MixtureModel: spatial weights need templates");
      if (templates->components() != components.size())
        throw std::invalid_argument("MixtureModel: template/component count mismatch");
    }
  }
};

inline MixtureModel make_global_model(std::vector<GaussianComponent> comps, Vec pi) {
  MixtureModel m{std::move(comps), WeightKind::global, std::move(pi), nullptr};
  m.validate();
  return m;
}

inline MixtureModel make_spatial_model(std::vector<GaussianComponent> comps, Vec gamma,
                                       std::shared_ptr<const TemplateStack> templates) {
  MixtureModel m{std::move(comps), WeightKind::spatial, std::move(gamma),
                 std::move(templates)};
  m.validate();
  return m;
}

/// Membership weights w_{ik}; each row sums to 1.
struct Responsibilities {
  std::size_t rows = 0;
  std::size_t K = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t k) const { return values[i * K + k]; }
  const double* row(std::size_t i) const { return &values[i * K]; }
};

enum class Method { t1, t2, t3 };
enum class Assignment { soft, hard };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::t1: return "t1";
    case Method::t2: return "t2";
    default: return "t3";
  }
}
inline const char* to_string(Assignment a) {
  return a == Assignment::soft ? "soft" : "hard";
}

/// Per-voxel standardized scores with method/assignment provenance.
struct ScoreField {
  VoxelGrid grid;
  std::size_t p = 0;
  std::vector<double> scores;  // n x p, row-major
  Method method = Method::t1;
  Assignment assignment = Assignment::soft;

  const double* row(std::size_t i) const { return &scores[i * p]; }
};

// ---------------------------------------------------------------------------
// Prepared (factorized) model for pointwise kernels.

struct PreparedComponent {
  Vec mean;
  std::vector<double> sqrt_cov;  // p*p, principal square root
  std::vector<double> inv_sqrt;  // p*p
  std::vector<double> cov;       // p*p
  double half_log_det = 0.0;
};

struct PreparedModel {
  std::size_t p = 0;
  std::size_t K = 0;
  std::vector<PreparedComponent> comps;

  static PreparedModel from(const MixtureModel& model) {
    model.validate();
    PreparedModel pm;
    pm.p = model.p();
    pm.K = model.K();
    if (pm.p > detail::kMaxDim)
      throw std::invalid_argument("PreparedModel: dimension above supported maximum");
    pm.comps.reserve(pm.K);
    for (const auto& c : model.components) {
      PreparedComponent pc;
      pc.mean = c.mean;
      const Mat s = c.cov.sqrt().mat();
      const Mat is = c.cov.inv_sqrt().mat();
      pc.sqrt_cov.assign(s.data(), s.data() + pm.p * pm.p);
      pc.inv_sqrt.assign(is.data(), is.data() + pm.p * pm.p);
      pc.cov.assign(c.cov.mat().data(), c.cov.mat().data() + pm.p * pm.p);
      pc.half_log_det = 0.5 * c.cov.log_det();
      pm.comps.push_back(std::move(pc));
    }
    return pm;
  }
};

namespace detail {

// ||inv_sqrt (y - mean)||^2, the squared Mahalanobis radius.
inline double mahalanobis_sq(const PreparedComponent& c, const double* y, std::size_t p) {
  double diff[kMaxDim];
  for (std::size_t i = 0; i < p; ++i) diff[i] = y[i] - c.mean[i];
  double q = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double v = dot(&c.inv_sqrt[i * p], diff, p);
    q += v * v;
  }
  return q;
}

// Log densities up to the common -p/2 log(2 pi) constant.
inline void log_densities_row(const PreparedModel& pm, const double* y, double* out) {
  for (std::size_t k = 0; k < pm.K; ++k)
    out[k] = -pm.comps[k].half_log_det - 0.5 * mahalanobis_sq(pm.comps[k], y, pm.p);
}

// w_k from log pi_k + log phi_k via log-sum-exp; returns the voxel
// log-likelihood contribution (including the normal constant).
inline double responsibilities_row(const PreparedModel& pm, const double* log_pi,
                                   const double* y, double* w) {
  double logits[kMaxDim];
  log_densities_row(pm, y, logits);
  double mx = -1e308;
  for (std::size_t k = 0; k < pm.K; ++k) {
    logits[k] += log_pi[k];
    mx = std::max(mx, logits[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < pm.K; ++k) {
    w[k] = std::exp(logits[k] - mx);
    sum += w[k];
  }
  for (std::size_t k = 0; k < pm.K; ++k) w[k] /= sum;
  const double log2pi = 1.8378770664093454836;
  return mx + std::log(sum) - 0.5 * static_cast<double>(pm.p) * log2pi;
}

inline void hard_assign_row(double* s, std::size_t K) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < K; ++k)
    if (s[k] > s[best]) best = k;  // ties keep the lowest index
  for (std::size_t k = 0; k < K; ++k) s[k] = (k == best) ? 1.0 : 0.0;
}

inline void transform_point(const PreparedModel& pm, Method method, const double* y,
                            const double* stilde, double* out) {
  const std::size_t p = pm.p;
  double mean[kMaxDim] = {0};
  for (std::size_t k = 0; k < pm.K; ++k)
    for (std::size_t i = 0; i < p; ++i) mean[i] += stilde[k] * pm.comps[k].mean[i];
  double centered[kMaxDim];
  for (std::size_t i = 0; i < p; ++i) centered[i] = y[i] - mean[i];

  double a[kMaxDim * kMaxDim] = {0};
  if (method == Method::t1) {
    for (std::size_t k = 0; k < pm.K; ++k) {
      const double s = stilde[k];
      if (s == 0.0) continue;
      const double* m = pm.comps[k].inv_sqrt.data();
      for (std::size_t i = 0; i < p * p; ++i) a[i] += s * m[i];
    }
  } else {
    double c[kMaxDim * kMaxDim] = {0};
    for (std::size_t k = 0; k < pm.K; ++k) {
      const double s = stilde[k];
      if (s == 0.0) continue;
      const double* m = pm.comps[k].cov.data();
      for (std::size_t i = 0; i < p * p; ++i) c[i] += s * m[i];
      if (method == Method::t3) {
        double d[kMaxDim];
        for (std::size_t i = 0; i < p; ++i) d[i] = pm.comps[k].mean[i] - mean[i];
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < p; ++j) c[i * p + j] += s * d[i] * d[j];
      }
    }
    if (!spd_inv_sqrt_buf(c, a, p))
      throw SingularityError("transform: combined covariance is not SPD");
  }
  matvec(a, centered, out, p);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public pointwise operations.

/// Posterior membership weights w_k proportional to pi_k phi_k(y),
/// computed in log space.
inline Vec responsibilities(const Vec& y, const Vec& pi,
                            const std::vector<GaussianComponent>& comps) {
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("responsibilities: NaN input");
  MixtureModel m = make_global_model(comps, pi);
  const PreparedModel pm = PreparedModel::from(m);
  if (y.size() != pm.p) throw std::invalid_argument("responsibilities: dimension mismatch");
  Vec log_pi(pm.K);
  for (std::size_t k = 0; k < pm.K; ++k) log_pi[k] = std::log(pi[k]);
  Vec w(pm.K);
  detail::responsibilities_row(pm, log_pi.data(), y.data(), w.data());
  return w;
}

/// Soft assignment returns w itself; hard assignment returns the one-hot
/// vector at the argmax (ties broken by lowest class index).
inline Vec assign(const Vec& w, Assignment mode) {
  Vec s = w;
  if (mode == Assignment::hard) detail::hard_assign_row(s.data(), s.size());
  return s;
}

namespace detail {

inline Vec standardize_with(const Vec& y, const Vec& stilde,
                            const std::vector<GaussianComponent>& comps, Method method) {
  Vec pi(comps.size(), 1.0 / comps.size());
  MixtureModel m = make_global_model(comps, pi);
  const PreparedModel pm = PreparedModel::from(m);
  if (y.size() != pm.p || stilde.size() != pm.K)
    throw std::invalid_argument("standardize: dimension mismatch");
  Vec out(pm.p);
  transform_point(pm, method, y.data(), stilde.data(), out.data());
  return out;
}

}  // namespace detail

/// T1: (sum_k s_k Sigma_k^{-1/2}) (y - sum_k s_k mu_k).
inline Vec standardize_t1(const Vec& y, const Vec& stilde,
                          const std::vector<GaussianComponent>& comps) {
  return detail::standardize_with(y, stilde, comps, Method::t1);
}

/// T2: (sum_k s_k Sigma_k)^{-1/2} (y - sum_k s_k mu_k).
inline Vec standardize_t2(const Vec& y, const Vec& stilde,
                          const std::vector<GaussianComponent>& comps) {
  return detail::standardize_with(y, stilde, comps, Method::t2);
}

/// T3: marginal-covariance form with the between-mean outer products.
inline Vec standardize_t3(const Vec& y, const Vec& stilde,
                          const std::vector<GaussianComponent>& comps) {
  return detail::standardize_with(y, stilde, comps, Method::t3);
}

// ---------------------------------------------------------------------------
// Field operations.

/// pi_{ik} = gamma_k b_{ik} / sum_j gamma_j b_{ij}, one row per voxel.
inline std::vector<double> spatial_weights(const Vec& gamma, const TemplateStack& b) {
  const std::size_t K = b.components();
  if (gamma.size() != K)
    throw std::invalid_argument("spatial_weights: gamma/template count mismatch");
  const std::size_t n = b.grid().size();
  std::vector<double> pi(n * K);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = b.row(i);
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) denom += gamma[k] * row[k];
    if (!(denom > 0.0))
      throw DegenerateError("spatial_weights: zero denominator at voxel " +
                            std::to_string(i));
    for (std::size_t k = 0; k < K; ++k) pi[i * K + k] = gamma[k] * row[k] / denom;
  }
  return pi;
}

/// Standardizes every voxel of an n x p observation matrix. Deterministic
/// and voxel-parallel; output is identical for any worker count.
inline ScoreField standardize_field(const std::vector<double>& obs, const VoxelGrid& grid,
                                    const MixtureModel& model, Method method,
                                    Assignment assignment, int threads = 0) {
  model.validate();
  const std::size_t n = grid.size();
  const std::size_t p = model.p();
  const std::size_t K = model.K();
  if (obs.size() != n * p)
    throw std::invalid_argument("standardize_field: observation size mismatch");
  if (model.kind == WeightKind::spatial && !(model.templates->grid() == grid))
    throw std::invalid_argument("standardize_field: template grid mismatch");

  const PreparedModel pm = PreparedModel::from(model);
  std::vector<double> log_pi_global;
  if (model.kind == WeightKind::global) {
    log_pi_global.resize(K);
    for (std::size_t k = 0; k < K; ++k) log_pi_global[k] = std::log(model.weights[k]);
  }

  ScoreField field;
  field.grid = grid;
  field.p = p;
  field.method = method;
  field.assignment = assignment;
  field.scores.resize(n * p);

  parallel_chunks(n, 4096, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    double log_pi[detail::kMaxDim];
    double w[detail::kMaxDim];
    for (std::size_t i = lo; i < hi; ++i) {
      const double* log_pi_row;
      if (model.kind == WeightKind::global) {
        log_pi_row = log_pi_global.data();
      } else {
        const double* b = model.templates->row(i);
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) denom += model.weights[k] * b[k];
        for (std::size_t k = 0; k < K; ++k)
          log_pi[k] = std::log(model.weights[k] * b[k] / denom);
        log_pi_row = log_pi;
      }
      detail::responsibilities_row(pm, log_pi_row, &obs[i * p], w);
      if (assignment == Assignment::hard) detail::hard_assign_row(w, K);
      detail::transform_point(pm, method, &obs[i * p], w, &field.scores[i * p]);
    }
  });
  return field;
}

/// Contrast z_i = a^T T_i with two-sided and one-sided p-values. The
/// contrast is renormalized to unit length when needed.
struct ContrastScores {
  Vec z;
  Vec p_two;
  Vec p_left;
  Vec p_right;
  bool renormalized = false;
};

inline ContrastScores contrast_scores(const ScoreField& field, Vec a) {
  if (a.size() != field.p)
    throw std::invalid_argument("contrast_scores: contrast dimension mismatch");
  double norm = std::sqrt(detail::dot(a.data(), a.data(), a.size()));
  if (!(norm > 0.0)) throw std::invalid_argument("contrast_scores: zero contrast vector");
  ContrastScores out;
  if (std::abs(norm - 1.0) > 1e-12) {
    for (double& v : a) v /= norm;
    out.renormalized = true;
  }
  const std::size_t n = field.grid.size();
  out.z.resize(n);
  out.p_two.resize(n);
  out.p_left.resize(n);
  out.p_right.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = detail::dot(field.row(i), a.data(), field.p);
    out.z[i] = z;
    const double cdf = norm_cdf(z);
    out.p_left[i] = cdf;
    out.p_right[i] = 1.0 - cdf;
    out.p_two[i] = 2.0 * (1.0 - norm_cdf(std::abs(z)));
  }
  return out;
}

}  // namespace bgadj
