#pragma once

// Small dense linear algebra for dimensions up to ~8: general matrices,
// symmetric eigendecomposition (cyclic Jacobi), and symmetric
// positive-definite matrices with principal square roots.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "bgadj/errors.hpp"

namespace bgadj {

using Vec = std::vector<double>;

namespace detail {

constexpr std::size_t kMaxDim = 8;

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// out = A * x for row-major p x p A.
inline void matvec(const double* a, const double* x, double* out, std::size_t p) {
  for (std::size_t i = 0; i < p; ++i) out[i] = dot(a + i * p, x, p);
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix.
// `a` (row-major p x p) is destroyed; eigenvalues land in `vals` and
// eigenvectors in the columns of `vecs`. Intended for p <= kMaxDim.
inline void sym_eig_inplace(double* a, double* vals, double* vecs, std::size_t p) {
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) vecs[i * p + j] = (i == j) ? 1.0 : 0.0;

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) off += a[i * p + j] * a[i * p + j];
    if (off < 1e-300) break;
    double diag = 0.0;
    for (std::size_t i = 0; i < p; ++i) diag += a[i * p + i] * a[i * p + i];
    if (off <= 1e-30 * std::max(diag, 1e-300)) break;

    for (std::size_t pp = 0; pp < p; ++pp) {
      for (std::size_t q = pp + 1; q < p; ++q) {
        const double apq = a[pp * p + q];
        if (apq == 0.0) continue;
        const double app = a[pp * p + pp];
        const double aqq = a[q * p + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < p; ++k) {
          const double akp = a[k * p + pp];
          const double akq = a[k * p + q];
          a[k * p + pp] = c * akp - s * akq;
          a[k * p + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double apk = a[pp * p + k];
          const double aqk = a[q * p + k];
          a[pp * p + k] = c * apk - s * aqk;
          a[q * p + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < p; ++k) {
          const double vkp = vecs[k * p + pp];
          const double vkq = vecs[k * p + q];
          vecs[k * p + pp] = c * vkp - s * vkq;
          vecs[k * p + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  for (std::size_t i = 0; i < p; ++i) vals[i] = a[i * p + i];
}

// out = V diag(f(lambda)) V^T, symmetrized.
template <class F>
inline void rebuild_from_eig(const double* vals, const double* vecs, double* out,
                             std::size_t p, F&& f) {
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        s += vecs[i * p + k] * f(vals[k]) * vecs[j * p + k];
      out[i * p + j] = s;
      out[j * p + i] = s;
    }
  }
}

// Inverse principal square root of a symmetric PD matrix held in a raw
// buffer. Returns false if the matrix is not numerically PD.
inline bool spd_inv_sqrt_buf(const double* a, double* out, std::size_t p) {
  double work[kMaxDim * kMaxDim];
  double vals[kMaxDim];
  double vecs[kMaxDim * kMaxDim];
  std::copy(a, a + p * p, work);
  sym_eig_inplace(work, vals, vecs, p);
  double vmax = 0.0;
  for (std::size_t i = 0; i < p; ++i) vmax = std::max(vmax, vals[i]);
  for (std::size_t i = 0; i < p; ++i)
    if (!(vals[i] > 1e-12 * vmax)) return false;
  rebuild_from_eig(vals, vecs, out, p, [](double x) { return 1.0 / std::sqrt(x); });
  return true;
}

}  // namespace detail

/// Dense row-major matrix (general, small).
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::initializer_list<double> vals)
      : rows_(rows), cols_(cols), d_(vals) {
    if (d_.size() != rows * cols)
      throw std::invalid_argument("Mat: initializer size mismatch");
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }
  const double* data() const { return d_.data(); }
  double* data() { return d_.data(); }

  Mat transposed() const {
    Mat t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Mat operator*(const Mat& o) const {
    if (cols_ != o.rows_) throw std::invalid_argument("Mat multiply: shape mismatch");
    Mat r(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t k = 0; k < cols_; ++k) {
        const double v = (*this)(i, k);
        if (v == 0.0) continue;
        for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += v * o(k, j);
      }
    return r;
  }

  Vec operator*(const Vec& x) const {
    if (cols_ != x.size()) throw std::invalid_argument("Mat*Vec: shape mismatch");
    Vec r(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) r[i] = detail::dot(&d_[i * cols_], x.data(), cols_);
    return r;
  }

  Mat operator+(const Mat& o) const {
    Mat r = *this;
    for (std::size_t i = 0; i < d_.size(); ++i) r.d_[i] += o.d_[i];
    return r;
  }
  Mat operator-(const Mat& o) const {
    Mat r = *this;
    for (std::size_t i = 0; i < d_.size(); ++i) r.d_[i] -= o.d_[i];
    return r;
  }
  Mat operator*(double c) const {
    Mat r = *this;
    for (double& v : r.d_) v *= c;
    return r;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : d_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : d_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Inverse via Gauss-Jordan with partial pivoting (square only).
  Mat inverse() const {
    if (rows_ != cols_) throw std::invalid_argument("Mat::inverse: not square");
    const std::size_t n = rows_;
    Mat a = *this;
    Mat inv = identity(n);
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < n; ++r)
        if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
      if (std::abs(a(piv, col)) < 1e-300)
        throw SingularityError("Mat::inverse: singular matrix");
      if (piv != col) {
        for (std::size_t j = 0; j < n; ++j) {
          std::swap(a(col, j), a(piv, j));
          std::swap(inv(col, j), inv(piv, j));
        }
      }
      const double d = a(col, col);
      for (std::size_t j = 0; j < n; ++j) {
        a(col, j) /= d;
        inv(col, j) /= d;
      }
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const double f = a(r, col);
        if (f == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          a(r, j) -= f * a(col, j);
          inv(r, j) -= f * inv(col, j);
        }
      }
    }
    return inv;
  }

  /// Determinant via LU with partial pivoting (square only).
  double det() const {
    if (rows_ != cols_) throw std::invalid_argument("Mat::det: not square");
    const std::size_t n = rows_;
    Mat a = *this;
    double d = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < n; ++r)
        if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
      if (a(piv, col) == 0.0) return 0.0;
      if (piv != col) {
        for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
        d = -d;
      }
      d *= a(col, col);
      for (std::size_t r = col + 1; r < n; ++r) {
        const double f = a(r, col) / a(col, col);
        for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      }
    }
    return d;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

inline Mat outer(const Vec& u, const Vec& v) {
  Mat m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

/// Symmetric eigendecomposition; eigenvectors are the columns of `vecs`.
inline void sym_eig(const Mat& m, Vec& vals, Mat& vecs) {
  const std::size_t p = m.rows();
  std::vector<double> work(m.data(), m.data() + p * p);
  vals.assign(p, 0.0);
  vecs = Mat(p, p);
  detail::sym_eig_inplace(work.data(), vals.data(), vecs.data(), p);
}

/// Symmetric positive-definite matrix. Construction validates symmetry
/// (1e-12 relative) and positive eigenvalues (min > 1e-12 * max); the
/// eigendecomposition is computed once and reused by the derived
/// operations.
class SpdMatrix {
 public:
  explicit SpdMatrix(Mat m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0)
      throw std::invalid_argument("SpdMatrix: matrix must be square and non-empty");
    const std::size_t p = m_.rows();
    const double scale = std::max(m_.max_abs(), 1e-300);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j)
        if (std::abs(m_(i, j) - m_(j, i)) > 1e-12 * scale)
          throw std::invalid_argument("SpdMatrix: matrix is not symmetric");
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) {
        const double avg = 0.5 * (m_(i, j) + m_(j, i));
        m_(i, j) = avg;
        m_(j, i) = avg;
      }
    sym_eig(m_, vals_, vecs_);
    double vmax = 0.0;
    for (double v : vals_) vmax = std::max(vmax, v);
    for (double v : vals_)
      if (!(v > 1e-12 * vmax) || !std::isfinite(v))
        throw SingularityError("SpdMatrix: eigenvalue <= 1e-12 * max eigenvalue");
  }

  static SpdMatrix identity(std::size_t p) { return SpdMatrix(Mat::identity(p)); }
  static SpdMatrix diagonal(const Vec& d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return SpdMatrix(m);
  }

  std::size_t dim() const { return m_.rows(); }
  const Mat& mat() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  const Vec& eigenvalues() const { return vals_; }

  double log_det() const {
    double s = 0.0;
    for (double v : vals_) s += std::log(v);
    return s;
  }

  /// Principal (symmetric PD) square root.
  SpdMatrix sqrt() const {
    return rebuild([](double x) { return std::sqrt(x); });
  }
  /// Inverse of the principal square root.
  SpdMatrix inv_sqrt() const {
    return rebuild([](double x) { return 1.0 / std::sqrt(x); });
  }
  SpdMatrix inverse() const {
    return rebuild([](double x) { return 1.0 / x; });
  }

  /// x^T M^{-1} x.
  double inv_quad_form(const Vec& x) const {
    const std::size_t p = dim();
    double s = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      double proj = 0.0;
      for (std::size_t i = 0; i < p; ++i) proj += vecs_(i, k) * x[i];
      s += proj * proj / vals_[k];
    }
    return s;
  }

 private:
  template <class F>
  SpdMatrix rebuild(F&& f) const {
    const std::size_t p = dim();
    Mat out(p, p);
    detail::rebuild_from_eig(vals_.data(), vecs_.data(), out.data(), p, f);
    return SpdMatrix(std::move(out));
  }

  Mat m_;
  Vec vals_;
  Mat vecs_;
};

/// Principal square root of an SPD matrix.
inline SpdMatrix spd_sqrt(const SpdMatrix& m) { return m.sqrt(); }

/// R with R * M * R = I (inverse principal square root).
inline SpdMatrix spd_inv_sqrt(const SpdMatrix& m) { return m.inv_sqrt(); }

/// Spectral norm (largest singular value) of a general matrix, via the
/// symmetric eigenproblem on M^T M when M is wide/tall-but-small, or on
/// the K x K Gram matrix for tall-skinny inputs.
inline double spectral_norm_gram(const Mat& gram) {
  Vec vals;
  Mat vecs;
  sym_eig(gram, vals, vecs);
  double vmax = 0.0;
  for (double v : vals) vmax = std::max(vmax, std::abs(v));
  return std::sqrt(vmax);
}

inline double spectral_norm(const Mat& m) {
  const Mat gram = m.transposed() * m;
  return spectral_norm_gram(gram);
}

}  // namespace bgadj
