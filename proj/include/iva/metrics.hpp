// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_METRICS_HPP
#define IVA_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "iva/assignment.hpp"
#include "iva/complex_mat.hpp"
#include "iva/errors.hpp"
#include "iva/stft.hpp"

namespace iva {

inline constexpr double kSirCapDb = 80.0;

// Average permutation-invariant absolute coherence between separated
// outputs and references, with the optimal source matching.
struct CoherenceReport {
  double value = 0.0;            // in [0, 1]
  std::vector<int> permutation;  // permutation[n] = output matched to ref n
  std::vector<double> per_pair;  // [output][ref] average absolute coherence
  int n = 0;
};

// Second-moment accumulators of the coherence objective:
//   C[m][n][k] = sum_t Y_m(k,t) conj(S_n(k,t))
//   P[m][k]    = sum_t |Y_m(k,t)|^2,  Q[n][k] = sum_t |S_n(k,t)|^2
// The 1/T of the empirical means cancels inside the coherence ratio.
struct CoherenceMoments {
  int n = 0;
  int k = 0;
  std::vector<cd> C;     // [m][n][k]
  std::vector<double> P; // [m][k]
  std::vector<double> Q; // [n][k]

  CoherenceMoments() = default;
  CoherenceMoments(int n_src, int n_bins)
      : n(n_src),
        k(n_bins),
        C(static_cast<size_t>(n_src) * n_src * n_bins, cd{}),
        P(static_cast<size_t>(n_src) * n_bins, 0.0),
        Q(static_cast<size_t>(n_src) * n_bins, 0.0) {}

  cd& c(int m, int s, int bin) {
    return C[(static_cast<size_t>(m) * n + s) * k + bin];
  }
  const cd& c(int m, int s, int bin) const {
    return C[(static_cast<size_t>(m) * n + s) * k + bin];
  }
  double& p(int m, int bin) { return P[static_cast<size_t>(m) * k + bin]; }
  double p(int m, int bin) const { return P[static_cast<size_t>(m) * k + bin]; }
  double& q(int s, int bin) { return Q[static_cast<size_t>(s) * k + bin]; }
  double q(int s, int bin) const { return Q[static_cast<size_t>(s) * k + bin]; }
};

inline double coherence_term(const cd& c, double p, double q) {
  // zero-energy pairs contribute nothing
  if (!(p > 1e-300) || !(q > 1e-300)) return 0.0;
  return std::abs(c) / std::sqrt(p * q);
}

inline CoherenceReport coherence_from_moments(const CoherenceMoments& m) {
  CoherenceReport rep;
  rep.n = m.n;
  rep.per_pair.assign(static_cast<size_t>(m.n) * m.n, 0.0);
  for (int a = 0; a < m.n; ++a)
    for (int b = 0; b < m.n; ++b) {
      double acc = 0.0;
      for (int k = 0; k < m.k; ++k)
        acc += coherence_term(m.c(a, b, k), m.p(a, k), m.q(b, k));
      rep.per_pair[static_cast<size_t>(a) * m.n + b] = acc / m.k;
    }
  const double best = solve_assignment(rep.per_pair, m.n, rep.permutation);
  rep.value = std::clamp(best / m.n, 0.0, 1.0);
  return rep;
}

inline CoherenceReport coherence(const Spectrogram& Y, const Spectrogram& S) {
  require(Y.channels == S.channels && Y.bins == S.bins && Y.frames == S.frames,
          "coherence: shape mismatch");
  require(Y.frames >= 2, "coherence: need at least two frames");
  CoherenceMoments m(Y.channels, Y.bins);
  for (int a = 0; a < Y.channels; ++a)
    for (int k = 0; k < Y.bins; ++k) {
      double p = 0.0;
      for (int t = 0; t < Y.frames; ++t) p += std::norm(Y.at(a, k, t));
      m.p(a, k) = p;
    }
  for (int b = 0; b < S.channels; ++b)
    for (int k = 0; k < S.bins; ++k) {
      double q = 0.0;
      for (int t = 0; t < S.frames; ++t) q += std::norm(S.at(b, k, t));
      m.q(b, k) = q;
    }
  for (int a = 0; a < Y.channels; ++a)
    for (int b = 0; b < S.channels; ++b)
      for (int k = 0; k < Y.bins; ++k) {
        cd acc = 0.0;
        for (int t = 0; t < Y.frames; ++t)
          acc += Y.at(a, k, t) * std::conj(S.at(b, k, t));
        m.c(a, b, k) = acc;
      }
  return coherence_from_moments(m);
}

// ---- signal-to-interference ratio -----------------------------------------

struct SirReport {
  std::vector<double> sir_db;    // per source, aligned by the permutation
  double mean_db = 0.0;
  std::vector<int> permutation;  // permutation[n] = output assigned to source n
};

inline double energy_ratio_db(double target, double interference) {
  if (!(target > 0.0) && !(interference > 0.0)) return 0.0;
  if (!(target > 0.0)) return -kSirCapDb;
  if (!(interference > 0.0)) return kSirCapDb;
  return std::clamp(10.0 * std::log10(target / interference), -kSirCapDb,
                    kSirCapDb);
}

// SIR from an exact image decomposition: contributions[m][n] is the part of
// output m caused by source n. The output-to-source alignment maximizes the
// summed SIR over all permutations.
inline SirReport sir(const std::vector<Signal>& contributions) {
  const int n = static_cast<int>(contributions.size());
  require(n >= 1, "sir: empty decomposition");
  for (const auto& row : contributions)
    require(static_cast<int>(row.size()) == n,
            "sir: decomposition is not square");

  std::vector<double> energy(static_cast<size_t>(n) * n, 0.0);
  for (int m = 0; m < n; ++m)
    for (int s = 0; s < n; ++s) {
      double e = 0.0;
      for (double v : contributions[m][s]) e += v * v;
      energy[static_cast<size_t>(m) * n + s] = e;
    }

  std::vector<double> db(static_cast<size_t>(n) * n, 0.0);
  for (int m = 0; m < n; ++m) {
    double row_total = 0.0;
    for (int s = 0; s < n; ++s) row_total += energy[static_cast<size_t>(m) * n + s];
    for (int s = 0; s < n; ++s) {
      const double target = energy[static_cast<size_t>(m) * n + s];
      db[static_cast<size_t>(m) * n + s] = energy_ratio_db(target, row_total - target);
    }
  }

  SirReport rep;
  solve_assignment(db, n, rep.permutation);
  rep.sir_db.resize(n);
  double total = 0.0;
  for (int s = 0; s < n; ++s) {
    rep.sir_db[s] = db[static_cast<size_t>(rep.permutation[s]) * n + s];
    total += rep.sir_db[s];
  }
  rep.mean_db = total / n;
  return rep;
}

// First difference 1 - z^-1; emphasizes high frequencies before SIR so
// permutation errors in the high band become visible.
inline std::vector<double> hf_emphasis(const std::vector<double>& x) {
  std::vector<double> y(x.size());
  double prev = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] - prev;
    prev = x[i];
  }
  return y;
}

}  // namespace iva

#endif  // IVA_METRICS_HPP
