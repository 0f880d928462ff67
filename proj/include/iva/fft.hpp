// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_FFT_HPP
#define IVA_FFT_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "iva/complex_mat.hpp"
#include "iva/errors.hpp"

namespace iva {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Radix-2 complex FFT for power-of-two sizes. Twiddles are tabulated from
// std::polar once per plan, which keeps round-trip error near machine level.
class Fft {
 public:
  explicit Fft(int n) : n_(n) {
    require(is_power_of_two(n), "Fft: size must be a power of two");
    rev_.resize(n);
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
      unsigned r = 0;
      for (int b = 0; b < log2n; ++b)
        if (i & (1 << b)) r |= 1u << (log2n - 1 - b);
      rev_[i] = static_cast<int>(r);
    }
    twiddle_.resize(static_cast<size_t>(n) / 2);
    const double step = -2.0 * M_PI / n;
    for (int k = 0; k < n / 2; ++k) twiddle_[k] = std::polar(1.0, step * k);
  }

  int size() const { return n_; }

  void forward(cd* x) const { transform(x, false); }
  void inverse(cd* x) const {
    transform(x, true);
    const double s = 1.0 / n_;
    for (int i = 0; i < n_; ++i) x[i] *= s;
  }

 private:
  void transform(cd* x, bool inv) const {
    for (int i = 0; i < n_; ++i) {
      const int j = rev_[i];
      if (i < j) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n_; len <<= 1) {
      const int half = len >> 1;
      const int stride = n_ / len;
      for (int base = 0; base < n_; base += len) {
        for (int k = 0; k < half; ++k) {
          cd w = twiddle_[static_cast<size_t>(k) * stride];
          if (inv) w = std::conj(w);
          const cd u = x[base + k];
          const cd v = x[base + k + half] * w;
          x[base + k] = u + v;
          x[base + k + half] = u - v;
        }
      }
    }
  }

  int n_;
  std::vector<int> rev_;
  std::vector<cd> twiddle_;
};

// One-sided spectrum of a real frame: n/2 + 1 bins, DC and Nyquist forced
// real so the bins carry exactly the information of the real signal.
inline void rfft(const Fft& plan, std::span<const double> frame,
                 std::vector<cd>& out) {
  const int n = plan.size();
  std::vector<cd> buf(n);
  for (int i = 0; i < n; ++i) buf[i] = frame[i];
  plan.forward(buf.data());
  out.resize(static_cast<size_t>(n) / 2 + 1);
  out[0] = buf[0].real();
  for (int k = 1; k < n / 2; ++k) out[k] = buf[k];
  out[n / 2] = buf[n / 2].real();
}

// Inverse of rfft; bins 1..n/2-1 stand for conjugate pairs, the imaginary
// parts of DC and Nyquist are discarded.
inline void irfft(const Fft& plan, std::span<const cd> bins,
                  std::vector<double>& out) {
  const int n = plan.size();
  std::vector<cd> buf(n);
  buf[0] = bins[0].real();
  for (int k = 1; k < n / 2; ++k) {
    buf[k] = bins[k];
    buf[n - k] = std::conj(bins[k]);
  }
  buf[n / 2] = bins[n / 2].real();
  plan.inverse(buf.data());
  out.resize(n);
  for (int i = 0; i < n; ++i) out[i] = buf[i].real();
}

}  // namespace iva

#endif  // IVA_FFT_HPP
