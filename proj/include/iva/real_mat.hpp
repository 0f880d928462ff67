// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_REAL_MAT_HPP
#define IVA_REAL_MAT_HPP

#include <cmath>
#include <span>
#include <vector>

namespace iva {

// Row-major real matrix used for network weights and their gradients.
struct RealMat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  RealMat() = default;
  RealMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}

  double& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  bool finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// y = M x
inline void mat_apply(const RealMat& m, std::span<const double> x,
                      std::span<double> y) {
  for (int i = 0; i < m.rows; ++i) {
    const double* row = m.a.data() + static_cast<size_t>(i) * m.cols;
    double acc = 0.0;
    for (int j = 0; j < m.cols; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

// y = M^T x, restricted to the first `cols` columns of M.
inline void mat_apply_transposed(const RealMat& m, std::span<const double> x,
                                 std::span<double> y, int cols) {
  for (int j = 0; j < cols; ++j) y[j] = 0.0;
  for (int i = 0; i < m.rows; ++i) {
    const double* row = m.a.data() + static_cast<size_t>(i) * m.cols;
    const double xi = x[i];
    for (int j = 0; j < cols; ++j) y[j] += row[j] * xi;
  }
}

// M += outer(u, v)
inline void add_outer(RealMat& m, std::span<const double> u,
                      std::span<const double> v) {
  for (int i = 0; i < m.rows; ++i) {
    double* row = m.a.data() + static_cast<size_t>(i) * m.cols;
    const double ui = u[i];
    for (int j = 0; j < m.cols; ++j) row[j] += ui * v[j];
  }
}

}  // namespace iva

#endif  // IVA_REAL_MAT_HPP
