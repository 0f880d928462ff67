// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_MIXSIM_HPP
#define IVA_MIXSIM_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "iva/errors.hpp"
#include "iva/rng.hpp"
#include "iva/stft.hpp"
#include "iva/tensor_file.hpp"

namespace iva {

// Convolutive mixing systems: the random-tap trainer mixer, the fixed 2x2
// low/high-pass Butterworth system, and loaded impulse-response banks.
struct MixingSystem {
  enum class Kind { random_taps, butterworth, rir_bank };

  Kind kind = Kind::random_taps;
  int n = 0;  // sources == microphones

  // random_taps: [tap][mic][src] with tap index j+16 covering j in [-16,16];
  // the 1/(1+|j|) scaling is baked in.
  std::vector<double> taps;

  // rir_bank: [mic][src][sample]
  std::vector<double> rir;
  int rir_len = 0;
  double sample_rate = 0.0;

  double tap(int j16, int m, int s) const {
    return taps[(static_cast<size_t>(j16) * n + m) * n + s];
  }
  const double* rir_at(int m, int s) const {
    return rir.data() + (static_cast<size_t>(m) * n + s) * rir_len;
  }
};

inline constexpr int kRandomTapHalfSpan = 16;  // j in [-16, 16], 33 taps
inline constexpr int kRandomTapCount = 2 * kRandomTapHalfSpan + 1;

// Gaussian FIR mixer: x(i) = sum_j A(j) s(i-j) / (1 + |j|) with unit-variance
// taps, realized causally with a 16-sample latency shift.
inline MixingSystem sample_random_system(int n_sources, std::uint64_t seed) {
  require(n_sources >= 2, "sample_random_system: need at least 2 sources");
  MixingSystem sys;
  sys.kind = MixingSystem::Kind::random_taps;
  sys.n = n_sources;
  sys.taps.resize(static_cast<size_t>(kRandomTapCount) * n_sources * n_sources);
  Rng rng(seed);
  for (int j16 = 0; j16 < kRandomTapCount; ++j16) {
    const double scale = 1.0 / (1.0 + std::abs(j16 - kRandomTapHalfSpan));
    for (int m = 0; m < n_sources; ++m)
      for (int s = 0; s < n_sources; ++s)
        sys.taps[(static_cast<size_t>(j16) * n_sources + m) * n_sources + s] =
            scale * rng.normal();
  }
  return sys;
}

inline MixingSystem butterworth_system() {
  MixingSystem sys;
  sys.kind = MixingSystem::Kind::butterworth;
  sys.n = 2;
  return sys;
}

struct MixResult {
  Signal mixtures;        // [mic][sample]
  std::vector<Signal> images;  // [source][mic][sample]
};

namespace detail {

// y = (1 + z^-1)^2 w  or  (1 - z^-1)^2 w, then 1 / (1 + 0.17 z^-2).
inline std::vector<double> butterworth_filter(const std::vector<double>& x,
                                              bool highpass) {
  const double b1 = highpass ? -2.0 : 2.0;
  std::vector<double> y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    double w = x[i];
    if (i >= 1) w += b1 * x[i - 1];
    if (i >= 2) w += x[i - 2];
    if (i >= 2) w -= 0.17 * y[i - 2];
    y[i] = w;
  }
  return y;
}

}  // namespace detail

// Produces the mixtures together with every per-source image so that SIR
// can be decomposed exactly; images sum to the mixtures.
inline MixResult mix(const MixingSystem& sys, const Signal& sources) {
  require(static_cast<int>(sources.size()) == sys.n,
          "mix: source count does not match the system");
  const size_t len = sources.empty() ? 0 : sources[0].size();
  for (const auto& s : sources)
    require(s.size() == len, "mix: source lengths differ");

  const int n = sys.n;
  MixResult out;
  out.images.assign(n, Signal(n, std::vector<double>(len, 0.0)));

  switch (sys.kind) {
    case MixingSystem::Kind::random_taps:
      for (int s = 0; s < n; ++s)
        for (int m = 0; m < n; ++m) {
          auto& img = out.images[s][m];
          for (int j16 = 0; j16 < kRandomTapCount; ++j16) {
            const double a = sys.tap(j16, m, s);
            if (a == 0.0) continue;
            for (size_t i = static_cast<size_t>(j16); i < len; ++i)
              img[i] += a * sources[s][i - j16];
          }
        }
      break;
    case MixingSystem::Kind::butterworth:
      for (int s = 0; s < n; ++s)
        for (int m = 0; m < n; ++m)
          out.images[s][m] = detail::butterworth_filter(sources[s], m != s);
      break;
    case MixingSystem::Kind::rir_bank:
      for (int s = 0; s < n; ++s)
        for (int m = 0; m < n; ++m) {
          auto& img = out.images[s][m];
          const double* h = sys.rir_at(m, s);
          for (int j = 0; j < sys.rir_len; ++j) {
            const double a = h[j];
            if (a == 0.0) continue;
            for (size_t i = static_cast<size_t>(j); i < len; ++i)
              img[i] += a * sources[s][i - j];
          }
        }
      break;
  }

  out.mixtures.assign(n, std::vector<double>(len, 0.0));
  for (int s = 0; s < n; ++s)
    for (int m = 0; m < n; ++m)
      for (size_t i = 0; i < len; ++i) out.mixtures[m][i] += out.images[s][m][i];
  return out;
}

// ---- impulse-response banks ----------------------------------------------

inline constexpr int kMaxRirLength = 1 << 18;

inline void save_rir_bank(const MixingSystem& sys, const std::string& path) {
  require(sys.kind == MixingSystem::Kind::rir_bank,
          "save_rir_bank: not an impulse-response system");
  TensorFile tf;
  tf.meta.emplace_back("n_src", std::to_string(sys.n));
  tf.meta.emplace_back("n_mic", std::to_string(sys.n));
  tf.meta.emplace_back("length", std::to_string(sys.rir_len));
  tf.meta.emplace_back("sample_rate", std::to_string(sys.sample_rate));
  TensorEntry t;
  t.name = "rir";
  t.f64 = false;
  t.dims = {sys.n, sys.n, sys.rir_len};
  t.data = sys.rir;
  tf.tensors.push_back(std::move(t));
  write_tensor_file(path, tf);
}

inline MixingSystem load_rir_bank(const std::string& path) {
  const TensorFile tf = read_tensor_file(path);
  MixingSystem sys;
  sys.kind = MixingSystem::Kind::rir_bank;
  sys.n = static_cast<int>(tf.meta_int("n_src"));
  const int n_mic = static_cast<int>(tf.meta_int("n_mic"));
  sys.rir_len = static_cast<int>(tf.meta_int("length"));
  sys.sample_rate = std::stod(*tf.find_meta("sample_rate"));
  if (sys.n < 2 || n_mic != sys.n)
    throw format_error("rir bank: need a square system with >= 2 channels");
  if (sys.rir_len <= 0 || sys.rir_len > kMaxRirLength)
    throw format_error("rir bank: impulse response length out of range");
  const TensorEntry* t = tf.find("rir");
  if (!t || t->dims != std::vector<std::int64_t>{n_mic, sys.n, sys.rir_len})
    throw format_error("rir bank: missing or misshaped rir tensor");
  sys.rir = t->data;
  for (double v : sys.rir)
    if (!std::isfinite(v)) throw format_error("rir bank: non-finite response");
  return sys;
}

}  // namespace iva

#endif  // IVA_MIXSIM_HPP
