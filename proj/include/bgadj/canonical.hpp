#pragma once

// The two-class reduced parametrization (Delta_1, tau, pi_0) and the
// exact distribution theory of the hard-assigned standardized score:
// decision interval, closed-form univariate CDF, and the Monte Carlo
// estimator for contrasts of T_H in any dimension.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bgadj/errors.hpp"
#include "bgadj/linalg.hpp"
#include "bgadj/mixture.hpp"
#include "bgadj/parallel.hpp"
#include "bgadj/rng.hpp"
#include "bgadj/stats.hpp"

namespace bgadj {

/// Reduced parameter triple governing the law of T^(1):
/// Delta_1 = Sigma_1^{-1/2}(mu_1 - mu_2), tau = Sigma_2^{-1/2} Sigma_1^{1/2}
/// (a general matrix: the product of SPD roots need not be symmetric),
/// pi_0 = 2 log(pi_2/pi_1), and the derived Delta_2 = tau Delta_1.
struct CanonicalParams {
  Vec delta1;
  Mat tau;
  Vec delta2;
  double pi0 = 0.0;  // +-infinity allowed (degenerate class weights)

  CanonicalParams(Vec d1, Mat t, double p0)
      : delta1(std::move(d1)), tau(std::move(t)), pi0(p0) {
    const std::size_t p = delta1.size();
    if (tau.rows() != p || tau.cols() != p)
      throw std::invalid_argument("CanonicalParams: tau must be p x p");
    if (std::abs(tau.det()) <= 0.0)
      throw SingularityError("CanonicalParams: tau must be invertible");
    delta2 = tau * delta1;
  }

  std::size_t p() const { return delta1.size(); }

  /// pi_1 recovered from pi_0 = 2 log(pi_2/pi_1).
  double pi1() const {
    if (std::isinf(pi0)) return pi0 > 0 ? 0.0 : 1.0;
    return 1.0 / (1.0 + std::exp(0.5 * pi0));
  }

  /// Degenerate set Theta_0: equal components or a vanishing class.
  bool in_theta0() const {
    if (std::isinf(pi0)) return true;
    double d1 = 0.0;
    for (double v : delta1) d1 += v * v;
    const Mat dev = tau - Mat::identity(p());
    return std::sqrt(d1) < 1e-10 && dev.frobenius_norm() < 1e-10;
  }
};

/// Canonical parameters from the full two-class parameter set.
/// pi in {0,1} yields an infinite pi_0 sentinel (Theta_0), not an error.
inline CanonicalParams canonicalize(const Vec& mu1, const Vec& mu2, const SpdMatrix& s1,
                                    const SpdMatrix& s2, double pi1, double pi2) {
  if (!(pi1 >= 0.0 && pi1 <= 1.0) || !(pi2 >= 0.0 && pi2 <= 1.0) ||
      std::abs(pi1 + pi2 - 1.0) > 1e-12)
    throw std::invalid_argument("canonicalize: pi1 + pi2 must equal 1");
  if (mu1.size() != mu2.size() || mu1.size() != s1.dim() || s1.dim() != s2.dim())
    throw std::invalid_argument("canonicalize: dimension mismatch");
  Vec diff(mu1.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = mu1[i] - mu2[i];
  const Mat inv_sqrt1 = s1.inv_sqrt().mat();
  Vec delta1 = inv_sqrt1 * diff;
  Mat tau = s2.inv_sqrt().mat() * s1.sqrt().mat();
  double pi0;
  if (pi1 == 0.0)
    pi0 = std::numeric_limits<double>::infinity();
  else if (pi2 == 0.0)
    pi0 = -std::numeric_limits<double>::infinity();
  else
    pi0 = 2.0 * std::log(pi2 / pi1);
  return CanonicalParams(std::move(delta1), std::move(tau), pi0);
}

inline CanonicalParams canonicalize(const MixtureModel& model) {
  if (model.K() != 2 || model.kind != WeightKind::global)
    throw std::invalid_argument("canonicalize: two-class global model required");
  return canonicalize(model.components[0].mean, model.components[1].mean,
                      model.components[0].cov, model.components[1].cov,
                      model.weights[0], model.weights[1]);
}

/// r(y) = 2 log(phi_1(y) / phi_2(y)), evaluated from the densities.
inline double log_ratio_r(const Vec& y, const GaussianComponent& c1,
                          const GaussianComponent& c2) {
  Vec d1(y.size()), d2(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    d1[i] = y[i] - c1.mean[i];
    d2[i] = y[i] - c2.mean[i];
  }
  return (c2.cov.log_det() - c1.cov.log_det()) + c2.cov.inv_quad_form(d2) -
         c1.cov.inv_quad_form(d1);
}

// ---------------------------------------------------------------------------
// Latent-form sampling of T^(1) from the canonical parameters alone.

/// Samples T^(1) (soft or hard) and related quantities from (Z, s) draws
/// using only (Delta_1, tau, pi_0). Matrices are precomputed once.
class CanonicalSampler {
 public:
  explicit CanonicalSampler(const CanonicalParams& theta)
      : p_(theta.p()),
        delta1_(theta.delta1),
        delta2_(theta.delta2),
        tau_(theta.tau),
        tau_inv_(theta.tau.inverse()),
        pi0_(theta.pi0),
        pi1_(theta.pi1()),
        log_abs_det_tau_(std::log(std::abs(theta.tau.det()))) {}

  std::size_t p() const { return p_; }
  double pi1() const { return pi1_; }

  /// r(Y) expressed through the latent pair (Z, s_1).
  double log_ratio_latent(const double* z, bool s1) const {
    double zz = 0.0;
    for (std::size_t i = 0; i < p_; ++i) zz += z[i] * z[i];
    double buf[detail::kMaxDim];
    if (s1) {
      // (tau z + tau Delta_1)^T (tau z + tau Delta_1) - z^T z
      double shifted[detail::kMaxDim];
      for (std::size_t i = 0; i < p_; ++i) shifted[i] = z[i] + delta1_[i];
      detail::matvec(tau_.data(), shifted, buf, p_);
      double quad = 0.0;
      for (std::size_t i = 0; i < p_; ++i) quad += buf[i] * buf[i];
      return -2.0 * log_abs_det_tau_ + quad - zz;
    }
    // z^T z - (tau^{-1} z - Delta_1)^T (tau^{-1} z - Delta_1)
    detail::matvec(tau_inv_.data(), z, buf, p_);
    double quad = 0.0;
    for (std::size_t i = 0; i < p_; ++i) {
      const double v = buf[i] - delta1_[i];
      quad += v * v;
    }
    return -2.0 * log_abs_det_tau_ + zz - quad;
  }

  /// T^(1) from (Z, s_1) under the given assignment rule.
  void t1_from_latent(const double* z, bool s1, Assignment assignment, double* out) const {
    const double r = log_ratio_latent(z, s1);
    double w1;
    if (std::isinf(pi0_))
      w1 = pi0_ > 0 ? 0.0 : 1.0;
    else
      w1 = 1.0 / (1.0 + std::exp(-0.5 * (r - pi0_)));
    if (assignment == Assignment::hard) w1 = (w1 >= 0.5) ? 1.0 : 0.0;
    const double w2 = 1.0 - w1;
    double buf[detail::kMaxDim];
    double arg[detail::kMaxDim];
    if (s1) {
      // (w1 I + w2 tau)(Z + w2 Delta_1)
      for (std::size_t i = 0; i < p_; ++i) arg[i] = z[i] + w2 * delta1_[i];
      detail::matvec(tau_.data(), arg, buf, p_);
      for (std::size_t i = 0; i < p_; ++i) out[i] = w1 * arg[i] + w2 * buf[i];
    } else {
      // (w1 tau^{-1} + w2 I)(Z - w1 tau Delta_1)
      for (std::size_t i = 0; i < p_; ++i) arg[i] = z[i] - w1 * delta2_[i];
      detail::matvec(tau_inv_.data(), arg, buf, p_);
      for (std::size_t i = 0; i < p_; ++i) out[i] = w1 * buf[i] + w2 * arg[i];
    }
  }

  /// T_H by the direct three-branch representation (hard assignment).
  void t_hard_direct(const double* z, bool s1, double* out) const {
    const double r = log_ratio_latent(z, s1);
    const bool shat1 = r > pi0_;
    if (shat1 == s1) {
      for (std::size_t i = 0; i < p_; ++i) out[i] = z[i];
    } else if (s1) {
      // assigned class 2, drawn from class 1: tau Z + tau Delta_1
      double shifted[detail::kMaxDim];
      for (std::size_t i = 0; i < p_; ++i) shifted[i] = z[i] + delta1_[i];
      detail::matvec(tau_.data(), shifted, out, p_);
    } else {
      // assigned class 1, drawn from class 2: tau^{-1} Z - Delta_1
      detail::matvec(tau_inv_.data(), z, out, p_);
      for (std::size_t i = 0; i < p_; ++i) out[i] -= delta1_[i];
    }
  }

 private:
  std::size_t p_;
  Vec delta1_, delta2_;
  Mat tau_, tau_inv_;
  double pi0_, pi1_, log_abs_det_tau_;
};

// ---------------------------------------------------------------------------
// Univariate decision interval and exact CDF (hard assignment).

/// Univariate view of canonical parameters, with the label swap that
/// maps tau < 1 onto the tau >= 1 form handled explicitly.
struct Canonical1d {
  double delta1 = 0.0;
  double tau = 1.0;
  double delta2 = 0.0;
  double pi0 = 0.0;

  double pi1() const {
    if (std::isinf(pi0)) return pi0 > 0 ? 0.0 : 1.0;
    return 1.0 / (1.0 + std::exp(0.5 * pi0));
  }
  bool in_theta0() const {
    return std::isinf(pi0) || (std::abs(delta1) < 1e-10 && std::abs(tau - 1.0) < 1e-10);
  }
  /// Swapped labeling: tau -> 1/tau, Delta_1 -> -Delta_2, pi_0 -> -pi_0.
  Canonical1d swapped() const {
    Canonical1d s;
    s.tau = 1.0 / tau;
    s.delta1 = -delta2;
    s.delta2 = -delta1;
    s.pi0 = -pi0;
    return s;
  }
};

inline Canonical1d to_univariate(const CanonicalParams& theta) {
  if (theta.p() != 1)
    throw std::invalid_argument("univariate canonical operation requires p = 1");
  Canonical1d c;
  c.delta1 = theta.delta1[0];
  c.tau = theta.tau(0, 0);
  c.delta2 = theta.delta2[0];
  c.pi0 = theta.pi0;
  if (!(c.tau > 0.0))
    throw std::invalid_argument("univariate canonical operation requires tau > 0");
  return c;
}

/// The set {h(x) < pi_0} for p = 1 in the (possibly label-swapped)
/// parametrization with tau >= 1. `swapped` records whether the swap
/// was applied; `params` are the parameters the interval refers to.
struct DecisionInterval {
  double lower = 0.0;  // may be -infinity
  double upper = 0.0;  // may be +infinity
  double c0 = 0.0;
  bool swapped = false;
  Canonical1d params;
};

/// h(x) = -x^2 + (tau x + Delta_2)^2 - 2 log tau (p = 1).
inline double decision_h(double x, const Canonical1d& c) {
  const double g = c.tau * x + c.delta2;
  return -x * x + g * g - 2.0 * std::log(c.tau);
}

inline DecisionInterval decision_interval(const Canonical1d& theta) {
  if (theta.in_theta0())
    throw DegenerateError(
        "decision_interval: parameters lie in Theta_0 (equal components or a "
        "vanishing class); the decision region is undefined there");
  DecisionInterval out;
  Canonical1d c = theta;
  if (c.tau < 1.0) {
    c = theta.swapped();
    out.swapped = true;
  }
  out.params = c;
  const double inf = std::numeric_limits<double>::infinity();
  if (c.tau > 1.0) {
    const double c0 = (c.tau * c.tau - 1.0) * (c.pi0 + 2.0 * std::log(c.tau)) +
                      c.delta2 * c.delta2;
    out.c0 = c0;
    const double root = std::sqrt(std::max(c0, 0.0));
    out.lower = (-c.tau * c.delta2 - root) / (c.tau * c.tau - 1.0);
    out.upper = (-c.tau * c.delta2 + root) / (c.tau * c.tau - 1.0);
  } else {
    // tau == 1: Theta_0 was excluded, so Delta_2 != 0 here.
    out.c0 = c.delta2 * c.delta2;
    const double edge = c.pi0 / (2.0 * c.delta2) - 0.5 * c.delta2;
    if (c.delta2 > 0.0) {
      out.lower = -inf;
      out.upper = edge;
    } else {
      out.lower = edge;
      out.upper = inf;
    }
  }
  return out;
}

inline DecisionInterval decision_interval(const CanonicalParams& theta) {
  return decision_interval(to_univariate(theta));
}

/// Exact CDF of T_H for p = 1 (hard assignment), via the closed form
/// with clamped normal CDF terms. tau < 1 is handled by the label swap;
/// the distribution of T_H is invariant under relabeling.
inline double hard_cdf_univariate(double t, const Canonical1d& theta) {
  const DecisionInterval iv = decision_interval(theta);
  const Canonical1d& c = iv.params;
  const double pi1 = c.pi1();
  const double pi2 = 1.0 - pi1;
  const double am = iv.lower, ap = iv.upper;
  const double bm = c.tau * am + c.delta2;
  const double bp = c.tau * ap + c.delta2;
  const auto cdf = [](double x) { return norm_cdf(x); };

  double f = cdf(t);
  f += pi1 * (cdf(std::max(bm, std::min(t, bp)) / c.tau - c.delta1) -
              cdf(std::max(am, std::min(t, ap))));
  f += pi2 * (cdf(c.tau * std::min(t, am) + c.delta2) +
              cdf(c.tau * std::max(t, ap) + c.delta2) - cdf(std::min(t, bm)) -
              cdf(std::max(t, bp)));
  return std::clamp(f, 0.0, 1.0);
}

inline double hard_cdf_univariate(double t, const CanonicalParams& theta) {
  return hard_cdf_univariate(t, to_univariate(theta));
}

// ---------------------------------------------------------------------------
// Monte Carlo CDF of a^T T_H (any dimension).

struct CdfEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// Empirical CDF of a^T T_H at each threshold in `ts`, by direct
/// simulation of the latent representation. Deterministic per seed and
/// independent of the worker count.
inline std::vector<CdfEstimate> hard_contrast_cdf_mc(
    const std::vector<double>& ts, const Vec& a, const CanonicalParams& theta,
    std::uint64_t reps, std::uint64_t seed, int threads = 0) {
  if (reps < 1000)
    throw std::invalid_argument("hard_contrast_cdf_mc: reps >= 1000 required");
  if (a.size() != theta.p())
    throw std::invalid_argument("hard_contrast_cdf_mc: contrast dimension mismatch");
  double an = 0.0;
  for (double v : a) an += v * v;
  if (std::abs(std::sqrt(an) - 1.0) > 1e-8)
    throw std::invalid_argument("hard_contrast_cdf_mc: contrast must have unit norm");

  const CanonicalSampler sampler(theta);
  const double pi1 = sampler.pi1();
  const std::size_t p = theta.p();
  const std::size_t nt = ts.size();
  std::vector<double> sorted_ts = ts;
  std::sort(sorted_ts.begin(), sorted_ts.end());

  const std::size_t chunk = 1 << 16;
  const std::size_t nchunks = chunk_count(reps, chunk);
  // histogram over intervals between sorted thresholds, one per chunk
  std::vector<std::uint64_t> hist(nchunks * (nt + 1), 0);

  parallel_chunks(reps, chunk, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
    std::uint64_t* h = &hist[ci * (nt + 1)];
    double z[detail::kMaxDim];
    double tvec[detail::kMaxDim];
    for (std::size_t r = lo; r < hi; ++r) {
      RngStream g(seed, 0x7468u, r);
      const bool s1 = g.uniform() <= pi1;
      g.normals(z, p);
      sampler.t_hard_direct(z, s1, tvec);
      const double v = detail::dot(a.data(), tvec, p);
      // v <= sorted_ts[j] exactly for j >= bucket; record the first such j
      const std::size_t bucket =
          std::lower_bound(sorted_ts.begin(), sorted_ts.end(), v) - sorted_ts.begin();
      h[bucket] += 1;
    }
  });

  // combine chunks in fixed order, then prefix-sum over thresholds
  std::vector<std::uint64_t> total(nt + 1, 0);
  for (std::size_t ci = 0; ci < nchunks; ++ci)
    for (std::size_t j = 0; j <= nt; ++j) total[j] += hist[ci * (nt + 1) + j];
  std::vector<std::uint64_t> cum(nt, 0);
  std::uint64_t running = 0;
  for (std::size_t j = 0; j < nt; ++j) {
    // count of v strictly below bucket j+... : buckets 0..j hold v <= sorted_ts[j]
    running += total[j];
    cum[j] = running;
  }

  std::vector<CdfEstimate> out(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    // map back to the caller's threshold order
    const std::size_t pos =
        std::lower_bound(sorted_ts.begin(), sorted_ts.end(), ts[j]) - sorted_ts.begin();
    const double fhat = static_cast<double>(cum[pos]) / static_cast<double>(reps);
    out[j].value = fhat;
    out[j].se = std::sqrt(std::max(fhat * (1.0 - fhat), 0.0) / static_cast<double>(reps));
  }
  return out;
}

inline CdfEstimate hard_contrast_cdf_mc(double t, const Vec& a, const CanonicalParams& theta,
                                        std::uint64_t reps, std::uint64_t seed,
                                        int threads = 0) {
  return hard_contrast_cdf_mc(std::vector<double>{t}, a, theta, reps, seed, threads)[0];
}

}  // namespace bgadj
