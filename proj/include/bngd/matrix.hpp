#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "bngd/rng.hpp"

namespace bngd {

using Vec = std::vector<double>;

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline Vec operator+(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vec operator-(const Vec& a, const Vec& b) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vec operator*(double s, const Vec& a) {
  Vec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

inline void axpy(double alpha, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec normalized(const Vec& a) {
  const double n = norm2(a);
  if (n == 0.0) throw std::domain_error("normalized: zero vector");
  return (1.0 / n) * a;
}

struct EigenSystem {
  Vec values;                      // ascending
  std::vector<Vec> vectors;       // vectors[i] pairs with values[i], orthonormal
};

class EigenFailure : public std::runtime_error {
 public:
  EigenFailure(const std::string& what, double off_diag_residual)
      : std::runtime_error(what), off_diag_residual(off_diag_residual) {}
  double off_diag_residual;
};

// Dense symmetric matrix, row-major. Construction symmetrizes exactly; the
// SPD flag is validated by eigendecomposition. Diagonal inputs keep the dense
// representation but matvec takes an O(d) path.
class SymMatrix {
 public:
  SymMatrix() = default;

  SymMatrix(std::size_t dim, Vec entries, bool assert_spd = false)
      : dim_(dim), a_(std::move(entries)) {
    if (dim_ == 0) throw std::domain_error("SymMatrix: dim must be >= 1");
    if (a_.size() != dim_ * dim_) throw std::domain_error("SymMatrix: entry count mismatch");
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = i + 1; j < dim_; ++j) {
        const double v = 0.5 * (a_[i * dim_ + j] + a_[j * dim_ + i]);
        a_[i * dim_ + j] = v;
        a_[j * dim_ + i] = v;
      }
    }
    detect_diagonal();
    if (assert_spd) {
      const EigenSystem es = eigen();
      if (es.values.front() <= 0.0)
        throw std::domain_error("SymMatrix: matrix is not positive definite (min eigenvalue " +
                                std::to_string(es.values.front()) + ")");
      spd_ = true;
    }
  }

  static SymMatrix diagonal(const Vec& d, bool assert_spd = false) {
    Vec e(d.size() * d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) e[i * d.size() + i] = d[i];
    return SymMatrix(d.size(), std::move(e), assert_spd);
  }

  static SymMatrix identity(std::size_t dim) {
    return diagonal(Vec(dim, 1.0), true);
  }

  std::size_t dim() const { return dim_; }
  bool is_spd() const { return spd_; }
  bool is_diagonal() const { return diagonal_; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * dim_ + j]; }
  const Vec& data() const { return a_; }

  Vec matvec(const Vec& x) const {
    Vec y(dim_, 0.0);
    if (diagonal_) {
      for (std::size_t i = 0; i < dim_; ++i) y[i] = a_[i * dim_ + i] * x[i];
      return y;
    }
    for (std::size_t i = 0; i < dim_; ++i) {
      const double* row = a_.data() + i * dim_;
      double s = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) s += row[j] * x[j];
      y[i] = s;
    }
    return y;
  }

  // x^T M x
  double quad(const Vec& x) const {
    if (diagonal_) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) s += a_[i * dim_ + i] * x[i] * x[i];
      return s;
    }
    return dot(x, matvec(x));
  }

  double frobenius() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

  // Cyclic Jacobi rotations. Off-diagonal Frobenius threshold 1e-12 * ||M||_F,
  // sweep cap 100; unconditionally convergent for symmetric input.
  EigenSystem eigen() const {
    const std::size_t n = dim_;
    Vec a = a_;
    std::vector<Vec> v(n, Vec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;  // v[j] is column j

    const double fro = frobenius();
    const double threshold = 1e-12 * (fro > 0.0 ? fro : 1.0);
    auto off_diag = [&]() {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a[i * n + j] * a[i * n + j];
      return std::sqrt(s);
    };

    int sweep = 0;
    for (; sweep < 100; ++sweep) {
      if (off_diag() <= threshold) break;
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
          const double apq = a[p * n + q];
          if (apq == 0.0) continue;
          const double app = a[p * n + p];
          const double aqq = a[q * n + q];
          const double tau = (aqq - app) / (2.0 * apq);
          const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                        : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
          const double c = 1.0 / std::sqrt(1.0 + t * t);
          const double s = t * c;
          for (std::size_t k = 0; k < n; ++k) {
            const double akp = a[k * n + p];
            const double akq = a[k * n + q];
            a[k * n + p] = c * akp - s * akq;
            a[k * n + q] = s * akp + c * akq;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double apk = a[p * n + k];
            const double aqk = a[q * n + k];
            a[p * n + k] = c * apk - s * aqk;
            a[q * n + k] = s * apk + c * aqk;
          }
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v[p][k];
            const double vkq = v[q][k];
            v[p][k] = c * vkp - s * vkq;
            v[q][k] = s * vkp + c * vkq;
          }
        }
      }
    }
    if (sweep == 100 && off_diag() > threshold)
      throw EigenFailure("Jacobi eigensolver did not reach tolerance within sweep cap",
                         off_diag());

    EigenSystem es;
    es.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) es.values[i] = a[i * n + i];
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return es.values[i] < es.values[j]; });
    EigenSystem sorted;
    sorted.values.resize(n);
    sorted.vectors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      sorted.values[i] = es.values[order[i]];
      sorted.vectors[i] = v[order[i]];
    }
    return sorted;
  }

 private:
  void detect_diagonal() {
    diagonal_ = true;
    for (std::size_t i = 0; i < dim_ && diagonal_; ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        if (i != j && a_[i * dim_ + j] != 0.0) {
          diagonal_ = false;
          break;
        }
  }

  std::size_t dim_ = 0;
  Vec a_;
  bool spd_ = false;
  bool diagonal_ = false;
};

inline EigenSystem eigen_sym(const SymMatrix& m) { return m.eigen(); }

// sqrt(x^T H x); zero iff x = 0 for SPD H
inline double h_norm(const SymMatrix& h, const Vec& x) {
  return std::sqrt(std::max(0.0, h.quad(x)));
}

// Orthogonal matrix stored as a column set; random ones come from
// Gram-Schmidt on a Gaussian matrix.
struct OrthoMatrix {
  std::size_t dim = 0;
  std::vector<Vec> cols;  // orthonormal columns

  Vec apply(const Vec& x) const {  // Q x
    Vec y(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) axpy(x[j], cols[j], y);
    return y;
  }

  Vec apply_transpose(const Vec& x) const {  // Q^T x
    Vec y(dim);
    for (std::size_t j = 0; j < dim; ++j) y[j] = dot(cols[j], x);
    return y;
  }

  static OrthoMatrix identity(std::size_t d) {
    OrthoMatrix q;
    q.dim = d;
    q.cols.assign(d, Vec(d, 0.0));
    for (std::size_t i = 0; i < d; ++i) q.cols[i][i] = 1.0;
    return q;
  }

  static OrthoMatrix random(std::size_t d, CounterRng& rng) {
    OrthoMatrix q;
    q.dim = d;
    q.cols.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      Vec v = rng.gaussian_vector(d);
      for (std::size_t i = 0; i < j; ++i) axpy(-dot(q.cols[i], v), q.cols[i], v);
      // second pass for orthogonality at working precision
      for (std::size_t i = 0; i < j; ++i) axpy(-dot(q.cols[i], v), q.cols[i], v);
      q.cols[j] = normalized(v);
    }
    return q;
  }

  double orthogonality_defect() const {  // ||Q^T Q - I||_F
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        const double v = dot(cols[i], cols[j]) - (i == j ? 1.0 : 0.0);
        s += v * v;
      }
    return std::sqrt(s);
  }
};

// Q^T H Q as a dense symmetric matrix
inline SymMatrix conjugate(const SymMatrix& h, const OrthoMatrix& q, double mu = 1.0,
                           bool assert_spd = true) {
  const std::size_t d = h.dim();
  std::vector<Vec> hq(d);
  for (std::size_t j = 0; j < d; ++j) hq[j] = h.matvec(q.cols[j]);
  Vec e(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) e[i * d + j] = mu * dot(q.cols[i], hq[j]);
  return SymMatrix(d, std::move(e), assert_spd);
}

}  // namespace bngd
