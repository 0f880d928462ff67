// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_COMPLEX_MAT_HPP
#define IVA_COMPLEX_MAT_HPP

#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "iva/errors.hpp"

namespace iva {

using cd = std::complex<double>;

// Dense row-major complex square matrix. Separation systems are tiny
// (N is the channel count), so everything below is plain loops.
struct CMat {
  int n = 0;
  std::vector<cd> a;

  CMat() = default;
  explicit CMat(int dim) : n(dim), a(static_cast<size_t>(dim) * dim) {}

  static CMat identity(int dim) {
    CMat m(dim);
    for (int i = 0; i < dim; ++i) m.at(i, i) = 1.0;
    return m;
  }

  cd& at(int i, int j) { return a[static_cast<size_t>(i) * n + j]; }
  const cd& at(int i, int j) const { return a[static_cast<size_t>(i) * n + j]; }
};

inline std::vector<cd> matvec(const CMat& m, std::span<const cd> x) {
  std::vector<cd> y(m.n);
  for (int i = 0; i < m.n; ++i) {
    cd acc = 0.0;
    for (int j = 0; j < m.n; ++j) acc += m.at(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

inline CMat matmul(const CMat& a, const CMat& b) {
  CMat c(a.n);
  for (int i = 0; i < a.n; ++i)
    for (int k = 0; k < a.n; ++k) {
      const cd aik = a.at(i, k);
      if (aik == cd{}) continue;
      for (int j = 0; j < a.n; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

inline CMat adjoint(const CMat& m) {
  CMat r(m.n);
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) r.at(i, j) = std::conj(m.at(j, i));
  return r;
}

// Determinant by LU with partial pivoting.
inline cd determinant(CMat m) {
  cd det = 1.0;
  for (int c = 0; c < m.n; ++c) {
    int pivot = c;
    double best = std::abs(m.at(c, c));
    for (int r = c + 1; r < m.n; ++r) {
      const double v = std::abs(m.at(r, c));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (best == 0.0) return 0.0;
    if (pivot != c) {
      for (int j = 0; j < m.n; ++j) std::swap(m.at(c, j), m.at(pivot, j));
      det = -det;
    }
    det *= m.at(c, c);
    for (int r = c + 1; r < m.n; ++r) {
      const cd f = m.at(r, c) / m.at(c, c);
      for (int j = c; j < m.n; ++j) m.at(r, j) -= f * m.at(c, j);
    }
  }
  return det;
}

// Gauss-Jordan inverse with partial pivoting.
inline CMat inverse(const CMat& src) {
  const int n = src.n;
  CMat m = src;
  CMat inv = CMat::identity(n);
  for (int c = 0; c < n; ++c) {
    int pivot = c;
    double best = std::abs(m.at(c, c));
    for (int r = c + 1; r < n; ++r) {
      const double v = std::abs(m.at(r, c));
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best))
      throw numeric_error("inverse: singular matrix");
    if (pivot != c) {
      for (int j = 0; j < n; ++j) {
        std::swap(m.at(c, j), m.at(pivot, j));
        std::swap(inv.at(c, j), inv.at(pivot, j));
      }
    }
    const cd d = m.at(c, c);
    for (int j = 0; j < n; ++j) {
      m.at(c, j) /= d;
      inv.at(c, j) /= d;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const cd f = m.at(r, c);
      if (f == cd{}) continue;
      for (int j = 0; j < n; ++j) {
        m.at(r, j) -= f * m.at(c, j);
        inv.at(r, j) -= f * inv.at(c, j);
      }
    }
  }
  return inv;
}

inline double norm2(std::span<const cd> x) {
  double s = 0.0;
  for (const cd& v : x) s += std::norm(v);
  return std::sqrt(s);
}

inline bool all_finite(std::span<const cd> x) {
  for (const cd& v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

}  // namespace iva

#endif  // IVA_COMPLEX_MAT_HPP
