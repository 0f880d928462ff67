// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_ASSIGNMENT_HPP
#define IVA_ASSIGNMENT_HPP

#include <limits>
#include <vector>

#include "iva/errors.hpp"

namespace iva {

// Exact linear assignment (Hungarian algorithm with potentials, O(n^3)).
// score is row-major [n][n]; returns the permutation as perm[col] = row and
// the optimal total. Both coherence and SIR alignment are sums of per-pair
// terms, so the assignment solves their permutation search exactly.
inline double solve_assignment(const std::vector<double>& score, int n,
                               std::vector<int>& perm, bool maximize = true) {
  require(n > 0 && static_cast<int>(score.size()) == n * n,
          "solve_assignment: bad matrix size");
  const double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](int i, int j) {
    const double v = score[static_cast<size_t>(i) * n + j];
    return maximize ? -v : v;
  };

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  perm.assign(n, -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    perm[j - 1] = p[j] - 1;
    total += score[static_cast<size_t>(p[j] - 1) * n + (j - 1)];
  }
  return total;
}

}  // namespace iva

#endif  // IVA_ASSIGNMENT_HPP
