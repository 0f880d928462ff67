// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Independent reference implementations used only by tests. Each oracle
// deliberately avoids the code path of the implementation it checks.

#ifndef IVA_TESTS_ORACLES_HPP
#define IVA_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <span>
#include <vector>

#include "iva/complex_mat.hpp"
#include "iva/density.hpp"

namespace oracles {

using iva::cd;

// Largest eigenvalue of a real symmetric matrix by cyclic Jacobi rotations.
inline double jacobi_max_eigenvalue(std::vector<double> a, int n) {
  auto at = [&](int i, int j) -> double& { return a[static_cast<size_t>(i) * n + j]; };
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-26) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(at(p, q)) < 1e-300) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
  }
  double best = a[0];
  for (int i = 1; i < n; ++i) best = std::max(best, at(i, i));
  return best;
}

// Spectral norm of an arbitrary complex matrix M via the real symmetric
// embedding [[Re G, -Im G], [Im G, Re G]] of the Gram matrix G = M M^H.
inline double spectral_norm_bruteforce(const std::vector<cd>& m, int n) {
  std::vector<cd> gram(static_cast<size_t>(n) * n, cd{});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      cd acc = 0.0;
      for (int k = 0; k < n; ++k)
        acc += m[static_cast<size_t>(i) * n + k] *
               std::conj(m[static_cast<size_t>(j) * n + k]);
      gram[static_cast<size_t>(i) * n + j] = acc;
    }
  const int d = 2 * n;
  std::vector<double> real_embed(static_cast<size_t>(d) * d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const cd g = gram[static_cast<size_t>(i) * n + j];
      real_embed[static_cast<size_t>(i) * d + j] = g.real();
      real_embed[static_cast<size_t>(i) * d + (j + n)] = -g.imag();
      real_embed[static_cast<size_t>(i + n) * d + j] = g.imag();
      real_embed[static_cast<size_t>(i + n) * d + (j + n)] = g.real();
    }
  return std::sqrt(std::max(jacobi_max_eigenvalue(real_embed, d), 0.0));
}

// Spectral norm of I - a b^H computed without the closed-form roots.
inline double rank1_norm_bruteforce(std::span<const cd> a,
                                    std::span<const cd> b) {
  const int n = static_cast<int>(a.size());
  std::vector<cd> m(static_cast<size_t>(n) * n, cd{});
  for (int i = 0; i < n; ++i) {
    m[static_cast<size_t>(i) * n + i] = 1.0;
    for (int j = 0; j < n; ++j)
      m[static_cast<size_t>(i) * n + j] -= a[i] * std::conj(b[j]);
  }
  return spectral_norm_bruteforce(m, n);
}

// Direct O(n^2) DFT.
inline std::vector<cd> dft_direct(std::span<const double> x) {
  const size_t n = x.size();
  std::vector<cd> out(n);
  for (size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (size_t i = 0; i < n; ++i)
      acc += x[i] * std::polar(1.0, -2.0 * M_PI * static_cast<double>(k) *
                                        static_cast<double>(i) / n);
    out[k] = acc;
  }
  return out;
}

// Straight-line re-implementation of the gain network, written against the
// layer equations rather than the production code.
inline std::vector<double> nn_gains_reference(std::span<const cd> S,
                                              std::span<const double> h,
                                              const iva::NnWeights& w,
                                              std::vector<double>* hidden_out) {
  const int K = w.k;
  const double norm = [&] {
    double acc = 0.0;
    for (const cd& v : S) acc += v.real() * v.real() + v.imag() * v.imag();
    return std::sqrt(acc);
  }();
  const double nu = norm < 1e-12 ? 1e-12 : norm;

  std::vector<double> u;
  for (int i = 0; i < K; ++i) {
    const cd sbar = S[i] / nu;
    u.push_back(std::log(sbar.real() * sbar.real() +
                         sbar.imag() * sbar.imag() + 1e-12));
  }
  u.push_back(std::log(nu));
  for (int i = 0; i < w.hidden; ++i) u.push_back(h[i]);
  u.push_back(1.0);

  auto layer = [](const iva::RealMat& theta, const std::vector<double>& in) {
    std::vector<double> out(theta.rows, 0.0);
    for (int j = 0; j < theta.cols; ++j)
      for (int i = 0; i < theta.rows; ++i) out[i] += theta.at(i, j) * in[j];
    return out;
  };

  std::vector<double> alpha = layer(w.theta1, u);
  for (double& v : alpha) v = std::tanh(v);
  if (hidden_out)
    hidden_out->assign(alpha.begin(), alpha.begin() + w.hidden);
  std::vector<double> a1 = alpha;
  a1.push_back(1.0);
  std::vector<double> beta = layer(w.theta2, a1);
  for (double& v : beta) v = std::tanh(v);
  std::vector<double> b1 = beta;
  b1.push_back(1.0);
  std::vector<double> gamma = layer(w.theta3, b1);

  std::vector<double> gains(K);
  for (int i = 0; i < K; ++i)
    gains[i] = std::log(1.0 + std::exp(gamma[i])) / nu;
  return gains;
}

// Exhaustive search over all permutations, maximizing sum score[perm[j]][j].
inline double brute_force_assignment(const std::vector<double>& score, int n,
                                     std::vector<int>& best_perm) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  double best = -1e300;
  do {
    double total = 0.0;
    for (int j = 0; j < n; ++j)
      total += score[static_cast<size_t>(idx[j]) * n + j];
    if (total > best) {
      best = total;
      best_perm = idx;
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  return best;
}

// Series oracle for the low/high-pass mixing filters: expands the
// denominator as 1 / (1 + 0.17 z^-2) = sum_m (-0.17)^m z^-2m and convolves
// with the closed-form impulse response instead of running the recursion.
inline std::vector<double> butterworth_series(const std::vector<double>& x,
                                              bool highpass) {
  const double b1 = highpass ? -2.0 : 2.0;
  std::vector<double> impulse;
  double c = 1.0;
  for (int m = 0; m < 60; ++m) {  // |0.17|^60 is far below double precision
    impulse.push_back(c);        // tap at 2m
    impulse.push_back(0.0);      // tap at 2m + 1
    c *= -0.17;
  }
  // numerator [1, b1, 1] convolved with the denominator expansion
  std::vector<double> h(impulse.size() + 2, 0.0);
  for (size_t i = 0; i < impulse.size(); ++i) {
    h[i] += impulse[i];
    h[i + 1] += b1 * impulse[i];
    h[i + 2] += impulse[i];
  }
  std::vector<double> y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i)
    for (size_t j = 0; j < h.size() && j <= i; ++j) y[i] += h[j] * x[i - j];
  return y;
}

}  // namespace oracles

#endif  // IVA_TESTS_ORACLES_HPP
