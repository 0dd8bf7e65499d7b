#pragma once

// Parameter estimation: classical EM for GMM, generalized EM for SGMM
// (template-driven spatial weights with the gamma update), and the
// robust Huber-weighted M-step variant, plus the parameter-error
// metrics used to evaluate fits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bgadj/errors.hpp"
#include "bgadj/linalg.hpp"
#include "bgadj/mixture.hpp"
#include "bgadj/parallel.hpp"
#include "bgadj/rng.hpp"
#include "bgadj/stats.hpp"

namespace bgadj {

/// Huber weight u(s) = min(s, k1)/s with the removable singularity
/// u(0) = 1.
inline double huber_weight(double s, double k1) {
  return s <= k1 ? 1.0 : k1 / s;
}

/// Huber tuning constant k1(p) = sqrt(chi^2_{p,q}).
inline double huber_k1(unsigned p, double q) { return std::sqrt(chi2_quantile(p, q)); }

enum class InitScheme { automatic, template_moments, quantile1d, pc1_quantile, explicit_model };

struct FitConfig {
  double tol = 1e-5;
  int max_iter = 1000;
  double huber_q = 0.99;
  bool robust = false;
  bool spatial = false;
  InitScheme init = InitScheme::automatic;
  std::optional<MixtureModel> init_model;
  std::uint64_t seed = 0;
  int threads = 0;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("FitConfig: tol must be > 0");
    if (max_iter < 1) throw std::invalid_argument("FitConfig: max_iter >= 1");
    if (!(huber_q > 0.5 && huber_q < 1.0))
      throw std::invalid_argument("FitConfig: huber_q must lie in (0.5, 1)");
  }
};

struct FitResult {
  MixtureModel model;
  Responsibilities responsibilities;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> warnings;
};

struct EStepResult {
  Responsibilities resp;
  double loglik = 0.0;
};

// ---------------------------------------------------------------------------
// Individual algorithm steps.

/// E-step: membership weights under the model's (global or spatial)
/// mixing probabilities, with the observed-data log-likelihood.
inline EStepResult e_step(const std::vector<double>& obs, std::size_t n,
                          const MixtureModel& model, int threads = 0) {
  model.validate();
  const PreparedModel pm = PreparedModel::from(model);
  const std::size_t p = pm.p;
  const std::size_t K = pm.K;
  if (obs.size() != n * p) throw std::invalid_argument("e_step: observation size mismatch");
  const bool spatial = model.kind == WeightKind::spatial;
  if (spatial && model.templates->grid().size() != n)
    throw std::invalid_argument("e_step: template grid mismatch");

  Vec log_pi_global(K);
  if (!spatial)
    for (std::size_t k = 0; k < K; ++k) log_pi_global[k] = std::log(model.weights[k]);

  EStepResult out;
  out.resp.rows = n;
  out.resp.K = K;
  out.resp.values.resize(n * K);
  const std::size_t chunk = 4096;
  std::vector<double> partial_ll(chunk_count(n, chunk), 0.0);

  parallel_chunks(n, chunk, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
    double log_pi[detail::kMaxDim];
    double ll = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double* lp;
      if (spatial) {
        const double* b = model.templates->row(i);
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) denom += model.weights[k] * b[k];
        for (std::size_t k = 0; k < K; ++k)
          log_pi[k] = std::log(model.weights[k] * b[k] / denom);
        lp = log_pi;
      } else {
        lp = log_pi_global.data();
      }
      ll += detail::responsibilities_row(pm, lp, &obs[i * p], &out.resp.values[i * K]);
    }
    partial_ll[ci] = ll;
  });
  for (double v : partial_ll) out.loglik += v;
  if (!std::isfinite(out.loglik))
    throw std::runtime_error("e_step: non-finite log-likelihood");
  return out;
}

/// gamma_k^{t+1} = sum_i w_ik / sum_i [b_ik / sum_j gamma_j^t b_ij],
/// renormalized onto the simplex.
inline Vec update_gamma(const Responsibilities& w, const Vec& gamma_prev,
                        const TemplateStack& b) {
  const std::size_t K = b.components();
  const std::size_t n = b.grid().size();
  if (w.K != K || w.rows != n || gamma_prev.size() != K)
    throw std::invalid_argument("update_gamma: shape mismatch");
  Vec num(K, 0.0), den(K, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* brow = b.row(i);
    double mix = 0.0;
    for (std::size_t k = 0; k < K; ++k) mix += gamma_prev[k] * brow[k];
    if (!(mix > 0.0))
      throw DegenerateError("update_gamma: zero template mixture at voxel " +
                            std::to_string(i));
    for (std::size_t k = 0; k < K; ++k) {
      num[k] += w(i, k);
      den[k] += brow[k] / mix;
    }
  }
  Vec gamma(K);
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (!(den[k] > 0.0) || !std::isfinite(den[k]))
      throw DegenerateError("update_gamma: degenerate denominator for class " +
                            std::to_string(k));
    gamma[k] = num[k] / den[k];
    sum += gamma[k];
  }
  for (double& g : gamma) g /= sum;
  return gamma;
}

namespace detail {

// Covariance from a symmetric accumulation with a relative eigenvalue
// floor of 1e-10 * trace / p.
inline SpdMatrix cov_with_floor(Mat raw) {
  const std::size_t p = raw.rows();
  double trace = 0.0;
  for (std::size_t i = 0; i < p; ++i) trace += raw(i, i);
  if (!(trace > 0.0) || !std::isfinite(trace))
    throw DegenerateError("covariance update: non-positive trace (degenerate cluster)");
  const double floor = 1e-10 * trace / static_cast<double>(p);
  Vec vals;
  Mat vecs;
  sym_eig(raw, vals, vecs);
  for (double& v : vals) v = std::max(v, floor);
  Mat out(p, p);
  rebuild_from_eig(vals.data(), vecs.data(), out.data(), p, [](double x) { return x; });
  return SpdMatrix(std::move(out));
}

struct MomentAccum {
  Vec wsum;          // K
  Vec wy;            // K*p
  std::vector<double> wyy;  // K*p*p (covariance pass)
};

}  // namespace detail

/// Plain weighted M-step: weighted mean and (1/n-convention) weighted
/// covariance per component.
inline std::vector<GaussianComponent> m_step_plain(const std::vector<double>& obs,
                                                   std::size_t n, std::size_t p,
                                                   const Responsibilities& w,
                                                   int threads = 0) {
  const std::size_t K = w.K;
  if (w.rows != n || obs.size() != n * p)
    throw std::invalid_argument("m_step_plain: shape mismatch");

  const std::size_t chunk = 4096;
  const std::size_t nchunks = chunk_count(n, chunk);
  std::vector<double> pw(nchunks * K, 0.0), pwy(nchunks * K * p, 0.0);
  parallel_chunks(n, chunk, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
    double* sw = &pw[ci * K];
    double* swy = &pwy[ci * K * p];
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        const double wi = w(i, k);
        sw[k] += wi;
        for (std::size_t d = 0; d < p; ++d) swy[k * p + d] += wi * obs[i * p + d];
      }
  });
  Vec wsum(K, 0.0), means(K * p, 0.0);
  for (std::size_t ci = 0; ci < nchunks; ++ci)
    for (std::size_t k = 0; k < K; ++k) {
      wsum[k] += pw[ci * K + k];
      for (std::size_t d = 0; d < p; ++d) means[k * p + d] += pwy[(ci * K + k) * p + d];
    }
  for (std::size_t k = 0; k < K; ++k) {
    if (wsum[k] < static_cast<double>(p) + 1.0)
      throw DegenerateError("m_step_plain: effective weight of class " + std::to_string(k) +
                            " below p+1 (degenerate cluster)");
    for (std::size_t d = 0; d < p; ++d) means[k * p + d] /= wsum[k];
  }

  std::vector<double> pcov(nchunks * K * p * p, 0.0);
  parallel_chunks(n, chunk, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
    double* sc = &pcov[ci * K * p * p];
    double diff[detail::kMaxDim];
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        const double wi = w(i, k);
        if (wi == 0.0) continue;
        for (std::size_t d = 0; d < p; ++d) diff[d] = obs[i * p + d] - means[k * p + d];
        for (std::size_t r = 0; r < p; ++r)
          for (std::size_t c = r; c < p; ++c)
            sc[(k * p + r) * p + c] += wi * diff[r] * diff[c];
      }
  });

  std::vector<GaussianComponent> comps;
  comps.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    Mat cov(p, p);
    for (std::size_t ci = 0; ci < nchunks; ++ci)
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = r; c < p; ++c)
          cov(r, c) += pcov[((ci * K + k) * p + r) * p + c];
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = r; c < p; ++c) {
        cov(r, c) /= wsum[k];
        cov(c, r) = cov(r, c);
      }
    Vec mean(means.begin() + k * p, means.begin() + (k + 1) * p);
    comps.emplace_back(std::move(mean), detail::cov_with_floor(std::move(cov)));
  }
  return comps;
}

/// Robust M-step: Mahalanobis radii from the previous parameters drive
/// Huber weights u(r) for the means and u^2(r) (with radii recomputed
/// at the new means) for the covariances.
inline std::vector<GaussianComponent> m_step_robust(const std::vector<double>& obs,
                                                    std::size_t n, std::size_t p,
                                                    const Responsibilities& w,
                                                    const MixtureModel& prev, double k1,
                                                    int threads = 0) {
  const std::size_t K = w.K;
  if (w.rows != n || obs.size() != n * p || prev.K() != K || prev.p() != p)
    throw std::invalid_argument("m_step_robust: shape mismatch");
  const PreparedModel pm = PreparedModel::from(prev);

  const std::size_t chunk = 4096;
  const std::size_t nchunks = chunk_count(n, chunk);
  std::vector<double> pw(nchunks * K, 0.0), pwy(nchunks * K * p, 0.0);
  parallel_chunks(n, chunk, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
    double* sw = &pw[ci * K];
    double* swy = &pwy[ci * K * p];
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        const double r1 = std::sqrt(detail::mahalanobis_sq(pm.comps[k], &obs[i * p], p));
        const double wu = w(i, k) * huber_weight(r1, k1);
        sw[k] += wu;
        for (std::size_t d = 0; d < p; ++d) swy[k * p + d] += wu * obs[i * p + d];
      }
  });
  Vec wusum(K, 0.0), means(K * p, 0.0);
  for (std::size_t ci = 0; ci < nchunks; ++ci)
    for (std::size_t k = 0; k < K; ++k) {
      wusum[k] += pw[ci * K + k];
      for (std::size_t d = 0; d < p; ++d) means[k * p + d] += pwy[(ci * K + k) * p + d];
    }
  for (std::size_t k = 0; k < K; ++k) {
    if (wusum[k] < static_cast<double>(p) + 1.0)
      throw DegenerateError("m_step_robust: effective robust weight of class " +
                            std::to_string(k) + " below p+1 (degenerate cluster)");
    for (std::size_t d = 0; d < p; ++d) means[k * p + d] /= wusum[k];
  }

  // Covariance pass: radii at the new means, previous covariances.
  std::vector<double> pcov(nchunks * K * p * p, 0.0), pwu2(nchunks * K, 0.0);
  parallel_chunks(n, chunk, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
    double* sc = &pcov[ci * K * p * p];
    double* su = &pwu2[ci * K];
    double diff[detail::kMaxDim];
    double proj[detail::kMaxDim];
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t d = 0; d < p; ++d) diff[d] = obs[i * p + d] - means[k * p + d];
        detail::matvec(pm.comps[k].inv_sqrt.data(), diff, proj, p);
        double q = 0.0;
        for (std::size_t d = 0; d < p; ++d) q += proj[d] * proj[d];
        const double u = huber_weight(std::sqrt(q), k1);
        const double wu2 = w(i, k) * u * u;
        su[k] += wu2;
        for (std::size_t r = 0; r < p; ++r)
          for (std::size_t c = r; c < p; ++c)
            sc[(k * p + r) * p + c] += wu2 * diff[r] * diff[c];
      }
  });

  std::vector<GaussianComponent> comps;
  comps.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    double wu2sum = 0.0;
    for (std::size_t ci = 0; ci < nchunks; ++ci) wu2sum += pwu2[ci * K + k];
    if (!(wu2sum > 0.0))
      throw DegenerateError("m_step_robust: zero covariance weight mass for class " +
                            std::to_string(k));
    Mat cov(p, p);
    for (std::size_t ci = 0; ci < nchunks; ++ci)
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = r; c < p; ++c)
          cov(r, c) += pcov[((ci * K + k) * p + r) * p + c];
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = r; c < p; ++c) {
        cov(r, c) /= wu2sum;
        cov(c, r) = cov(r, c);
      }
    Vec mean(means.begin() + k * p, means.begin() + (k + 1) * p);
    comps.emplace_back(std::move(mean), detail::cov_with_floor(std::move(cov)));
  }
  return comps;
}

// ---------------------------------------------------------------------------
// Initialization schemes.

namespace detail {

inline std::vector<GaussianComponent> template_moment_components(
    const std::vector<double>& obs, std::size_t n, std::size_t p, const TemplateStack& b) {
  const std::size_t K = b.components();
  Responsibilities w;
  w.rows = n;
  w.K = K;
  w.values.assign(b.values().begin(), b.values().end());
  return m_step_plain(obs, n, p, w);
}

inline MixtureModel quantile1d_init(const std::vector<double>& obs, std::size_t n,
                                    std::size_t K) {
  std::vector<double> sorted(obs.begin(), obs.begin() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<GaussianComponent> comps;
  double total_var = 0.0;
  {
    double m = 0.0;
    for (double v : sorted) m += v;
    m /= n;
    for (double v : sorted) total_var += (v - m) * (v - m);
    total_var /= n;
  }
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t lo = k * n / K;
    const std::size_t hi = (k + 1) * n / K;
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) m += sorted[i];
    m /= (hi - lo);
    double v = 0.0;
    for (std::size_t i = lo; i < hi; ++i) v += (sorted[i] - m) * (sorted[i] - m);
    v /= (hi - lo);
    v = std::max(v, std::max(total_var, 1e-300) * 1e-6);
    comps.emplace_back(Vec{m}, SpdMatrix::diagonal(Vec{v}));
  }
  return make_global_model(std::move(comps), Vec(K, 1.0 / K));
}

// Quantile blocks along the leading principal axis of the pooled data;
// the multivariate analog of the 1-D quantile split. Deterministic.
inline MixtureModel pc1_quantile_init(const std::vector<double>& obs, std::size_t n,
                                      std::size_t p, std::size_t K) {
  Vec mean(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < p; ++d) mean[d] += obs[i * p + d];
  for (double& v : mean) v /= static_cast<double>(n);
  Mat cov(p, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = r; c < p; ++c)
        cov(r, c) += (obs[i * p + r] - mean[r]) * (obs[i * p + c] - mean[c]);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = r; c < p; ++c) {
      cov(r, c) /= static_cast<double>(n);
      cov(c, r) = cov(r, c);
    }
  Vec vals;
  Mat vecs;
  sym_eig(cov, vals, vecs);
  std::size_t lead = 0;
  for (std::size_t d = 1; d < p; ++d)
    if (vals[d] > vals[lead]) lead = d;
  std::vector<std::pair<double, std::size_t>> proj(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < p; ++d) s += vecs(d, lead) * (obs[i * p + d] - mean[d]);
    proj[i] = {s, i};
  }
  std::sort(proj.begin(), proj.end());
  Responsibilities w;
  w.rows = n;
  w.K = K;
  w.values.assign(n * K, 0.0);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t k = std::min(rank * K / n, K - 1);
    w.values[proj[rank].second * K + k] = 1.0;
  }
  std::vector<GaussianComponent> comps = m_step_plain(obs, n, p, w);
  return make_global_model(std::move(comps), Vec(K, 1.0 / K));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The full (generalized, optionally robust) EM driver.

namespace detail {

inline MixtureModel initial_model(const std::vector<double>& obs, std::size_t n,
                                  std::size_t p, std::size_t K,
                                  std::shared_ptr<const TemplateStack> templates,
                                  const FitConfig& cfg) {
  InitScheme scheme = cfg.init;
  if (scheme == InitScheme::automatic) {
    if (cfg.init_model)
      scheme = InitScheme::explicit_model;
    else if (cfg.spatial)
      scheme = InitScheme::template_moments;
    else if (p == 1)
      scheme = InitScheme::quantile1d;
    else
      scheme = InitScheme::pc1_quantile;
  }
  switch (scheme) {
    case InitScheme::explicit_model: {
      if (!cfg.init_model) throw std::invalid_argument("fit: explicit init without model");
      MixtureModel m = *cfg.init_model;
      m.validate();
      return m;
    }
    case InitScheme::template_moments: {
      if (!templates) throw std::invalid_argument("fit: template init without templates");
      auto comps = template_moment_components(obs, n, p, *templates);
      return make_spatial_model(std::move(comps), Vec(K, 1.0 / K), templates);
    }
    case InitScheme::quantile1d: {
      if (p != 1) throw std::invalid_argument("fit: quantile init requires p = 1");
      MixtureModel m = quantile1d_init(obs, n, K);
      if (cfg.spatial) return make_spatial_model(m.components, Vec(K, 1.0 / K), templates);
      return m;
    }
    default: {
      MixtureModel m = pc1_quantile_init(obs, n, p, K);
      if (cfg.spatial) return make_spatial_model(m.components, Vec(K, 1.0 / K), templates);
      return m;
    }
  }
}

inline FitResult fit_once(const std::vector<double>& obs, std::size_t n, std::size_t p,
                          std::size_t K, std::shared_ptr<const TemplateStack> templates,
                          const FitConfig& cfg, MixtureModel model) {
  FitResult result{std::move(model), {}, {}, 0, false, {}};
  const double k1 = cfg.robust ? huber_k1(static_cast<unsigned>(p), cfg.huber_q) : 0.0;
  int monotonicity_violations = 0;

  for (int iter = 0;; ++iter) {
    EStepResult e = e_step(obs, n, result.model, cfg.threads);
    result.loglik_trace.push_back(e.loglik);
    result.responsibilities = std::move(e.resp);
    result.iterations = iter;
    if (iter >= 1) {
      const double prev = result.loglik_trace[iter - 1];
      if (cfg.spatial && e.loglik < prev - 1e-6) ++monotonicity_violations;
      if (std::abs(e.loglik - prev) <= cfg.tol * std::abs(prev)) {
        result.converged = true;
        break;
      }
    }
    if (iter >= cfg.max_iter) break;

    if (cfg.spatial) {
      result.model.weights =
          update_gamma(result.responsibilities, result.model.weights, *templates);
    } else {
      Vec pi(K, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < K; ++k) pi[k] += result.responsibilities(i, k);
      double sum = 0.0;
      for (double& v : pi) {
        v /= static_cast<double>(n);
        sum += v;
      }
      for (double& v : pi) v /= sum;
      result.model.weights = pi;
    }
    result.model.components =
        cfg.robust ? m_step_robust(obs, n, p, result.responsibilities, result.model, k1,
                                   cfg.threads)
                   : m_step_plain(obs, n, p, result.responsibilities, cfg.threads);
  }

  if (monotonicity_violations > 0)
    result.warnings.push_back("generalized EM: log-likelihood decreased at " +
                              std::to_string(monotonicity_violations) + " iteration(s)");
  if (!result.converged)
    result.warnings.push_back("fit: maximum iterations reached before convergence");
  return result;
}

}  // namespace detail

/// Fits a mixture model by (generalized, optionally robust) EM.
/// Deterministic given cfg.seed and the initialization scheme.
inline FitResult fit(const std::vector<double>& obs, std::size_t n, std::size_t p,
                     std::size_t K, std::shared_ptr<const TemplateStack> templates,
                     const FitConfig& cfg) {
  cfg.validate();
  if (K == 0 || n == 0 || p == 0) throw std::invalid_argument("fit: empty problem");
  if (obs.size() != n * p) throw std::invalid_argument("fit: observation size mismatch");
  if (n < K * (p + 1)) throw std::invalid_argument("fit: n >= K(p+1) required");
  for (double v : obs)
    if (!std::isfinite(v)) throw std::invalid_argument("fit: non-finite observation");
  if (cfg.spatial) {
    if (!templates) throw std::invalid_argument("fit: spatial fit requires templates");
    if (templates->grid().size() != n || templates->components() != K)
      throw std::invalid_argument("fit: template shape mismatch");
  }

  MixtureModel init = detail::initial_model(obs, n, p, K, templates, cfg);
  try {
    return detail::fit_once(obs, n, p, K, templates, cfg, init);
  } catch (const DegenerateError&) {
    // One restart from a perturbed initialization, then give up.
    MixtureModel perturbed = init;
    RngStream g(cfg.seed, 0x70657274u);
    for (std::size_t k = 0; k < K; ++k) {
      double scale = 0.0;
      for (std::size_t d = 0; d < p; ++d)
        scale += perturbed.components[k].cov(d, d);
      scale = std::sqrt(scale / static_cast<double>(p));
      Vec mean = perturbed.components[k].mean;
      for (std::size_t d = 0; d < p; ++d) mean[d] += 0.05 * scale * g.normal();
      perturbed.components[k] =
          GaussianComponent(std::move(mean), perturbed.components[k].cov);
    }
    FitResult r = detail::fit_once(obs, n, p, K, templates, cfg, std::move(perturbed));
    r.warnings.push_back("fit: restarted once from a perturbed initialization");
    return r;
  }
}

// ---------------------------------------------------------------------------
// Evaluation metrics.

/// Per-parameter error table: Euclidean norm for mean differences,
/// spectral norm for covariance differences and for the n x K matrix of
/// mixing probabilities.
struct ParamErrorTable {
  Vec mean_err;
  Vec cov_err;
  double pi_err = 0.0;
};

inline ParamErrorTable param_error(const MixtureModel& est, const MixtureModel& truth) {
  est.validate();
  truth.validate();
  if (est.K() != truth.K() || est.p() != truth.p())
    throw std::invalid_argument("param_error: K or p mismatch");
  const std::size_t K = est.K();
  const std::size_t p = est.p();
  ParamErrorTable t;
  t.mean_err.resize(K);
  t.cov_err.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t d = 0; d < p; ++d) {
      const double diff = est.components[k].mean[d] - truth.components[k].mean[d];
      s += diff * diff;
    }
    t.mean_err[k] = std::sqrt(s);
    const Mat diff = est.components[k].cov.mat() - truth.components[k].cov.mat();
    Vec vals;
    Mat vecs;
    sym_eig(diff, vals, vecs);
    double m = 0.0;
    for (double v : vals) m = std::max(m, std::abs(v));
    t.cov_err[k] = m;
  }

  // pi matrices: spatial weights resolve through the templates; global
  // weights give constant rows. The spectral norm of the n x K
  // difference comes from its K x K Gram matrix.
  std::size_t n = 1;
  if (est.kind == WeightKind::spatial) n = est.templates->grid().size();
  if (truth.kind == WeightKind::spatial) {
    const std::size_t tn = truth.templates->grid().size();
    if (est.kind == WeightKind::spatial && tn != n)
      throw std::invalid_argument("param_error: template grid mismatch");
    n = tn;
  }
  const auto pi_row = [&](const MixtureModel& m, std::size_t i, Vec& row) {
    if (m.kind == WeightKind::global) {
      row = m.weights;
      return;
    }
    const double* b = m.templates->row(i);
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) denom += m.weights[k] * b[k];
    for (std::size_t k = 0; k < K; ++k) row[k] = m.weights[k] * b[k] / denom;
  };
  Mat gram(K, K);
  Vec re(K), rt(K);
  for (std::size_t i = 0; i < n; ++i) {
    pi_row(est, i, re);
    pi_row(truth, i, rt);
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = a; b < K; ++b) {
        const double v = (re[a] - rt[a]) * (re[b] - rt[b]);
        gram(a, b) += v;
        if (a != b) gram(b, a) += v;
      }
  }
  t.pi_err = spectral_norm_gram(gram);
  return t;
}

/// Permutes the estimated components (and weights) to minimize the sum
/// of mean-error norms against the truth; used before error tables when
/// label order is arbitrary (non-spatial fits).
inline MixtureModel align_components(const MixtureModel& est, const MixtureModel& truth) {
  const std::size_t K = est.K();
  if (K != truth.K() || est.p() != truth.p())
    throw std::invalid_argument("align_components: K or p mismatch");
  std::vector<std::size_t> perm(K), best(K);
  for (std::size_t k = 0; k < K; ++k) perm[k] = k;
  best = perm;
  double best_cost = 1e308;
  do {
    double cost = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      double s = 0.0;
      for (std::size_t d = 0; d < est.p(); ++d) {
        const double diff = est.components[perm[k]].mean[d] - truth.components[k].mean[d];
        s += diff * diff;
      }
      cost += std::sqrt(s);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  MixtureModel out = est;
  for (std::size_t k = 0; k < K; ++k) {
    out.components[k] = est.components[best[k]];
    out.weights[k] = est.weights[best[k]];
  }
  return out;
}

}  // namespace bgadj
