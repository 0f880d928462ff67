// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_SEPARATOR_HPP
#define IVA_SEPARATOR_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "iva/complex_mat.hpp"
#include "iva/density.hpp"
#include "iva/errors.hpp"
#include "iva/rng.hpp"
#include "iva/stft.hpp"
#include "iva/tensor_file.hpp"

namespace iva {

// Per-bin separation matrices plus the per-source hidden vectors of a
// recurrent density model. Matrices start at identity.
struct SeparationState {
  int bins = 0;
  int channels = 0;
  int hidden_dim = 0;
  std::vector<cd> W;          // [bins][channels][channels], row-major
  std::vector<double> hidden; // [channels][hidden_dim]
  long frame_index = 0;

  static SeparationState identity(int bins, int channels, int hidden_dim) {
    SeparationState s;
    s.bins = bins;
    s.channels = channels;
    s.hidden_dim = hidden_dim;
    s.W.assign(static_cast<size_t>(bins) * channels * channels, cd{});
    for (int k = 0; k < bins; ++k)
      for (int i = 0; i < channels; ++i) s.w(k)[static_cast<size_t>(i) * channels + i] = 1.0;
    s.hidden.assign(static_cast<size_t>(channels) * hidden_dim, 0.0);
    return s;
  }

  std::span<cd> w(int k) {
    return {W.data() + static_cast<size_t>(k) * channels * channels,
            static_cast<size_t>(channels) * channels};
  }
  std::span<const cd> w(int k) const {
    return {W.data() + static_cast<size_t>(k) * channels * channels,
            static_cast<size_t>(channels) * channels};
  }
  std::span<double> h(int n) {
    return {hidden.data() + static_cast<size_t>(n) * hidden_dim,
            static_cast<size_t>(hidden_dim)};
  }
};

// Normalized step-size control. Online mode uses the constant mu0; batch
// mode may interpolate linearly from mu_start to mu_end across epochs.
struct StepControl {
  double mu0 = 0.01;
  bool linear_schedule = false;
  double mu_start = 0.1;
  double mu_end = 0.01;

  void validate() const {
    require(mu0 > 0.0 && mu0 < 1.0, "step control: need 0 < mu0 < 1");
    if (linear_schedule)
      require(mu_start > 0.0 && mu_start < 1.0 && mu_end > 0.0 && mu_end < 1.0,
              "step control: schedule endpoints must lie in (0, 1)");
  }

  double epoch_mu(int epoch, int total_epochs) const {
    if (!linear_schedule) return mu0;
    if (total_epochs <= 1) return mu_start;
    const double f = static_cast<double>(epoch) / (total_epochs - 1);
    return mu_start + f * (mu_end - mu_start);
  }
};

struct SpectralNormEstimate {
  double exact = 0.0;
  double cheap = 0.0;
};

// Spectral norm of I - a b^H. The nontrivial eigenvalues x of the Gram
// matrix satisfy x^2 - s x + p = 0 with s = 2 - 2 Re(a^H b) + |a|^2 |b|^2
// and p = |1 - a^H b|^2, so the exact norm is the larger root and sqrt(s)
// is a cheap upper bound that is tight when a^H b = 1.
inline SpectralNormEstimate spectral_norm_rank1(std::span<const cd> a,
                                                std::span<const cd> b) {
  require(a.size() == b.size() && !a.empty(),
          "spectral_norm_rank1: need equal nonzero lengths");
  cd inner = 0.0;
  double na2 = 0.0, nb2 = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    inner += std::conj(a[i]) * b[i];
    na2 += std::norm(a[i]);
    nb2 += std::norm(b[i]);
  }
  const double s = 2.0 - 2.0 * inner.real() + na2 * nb2;
  const double p = std::norm(1.0 - inner);
  if (!std::isfinite(s) || !std::isfinite(p))
    throw numeric_error("spectral_norm_rank1: non-finite input");
  SpectralNormEstimate e;
  e.exact = std::sqrt(0.5 * (s + std::sqrt(std::max(s * s - 4.0 * p, 0.0))));
  e.cheap = std::sqrt(s);
  return e;
}

// g(k) stacks each source's gain at bin k times its output at bin k.
inline std::vector<cd> g_vector(std::span<const cd> Y_frame, int bins,
                                std::span<const GainResult> gains, int k) {
  const int n = static_cast<int>(gains.size());
  std::vector<cd> g(n);
  for (int i = 0; i < n; ++i)
    g[i] = gains[i].gains[k] * Y_frame[static_cast<size_t>(i) * bins + k];
  return g;
}

// W <- (I + mu (I - g Y^H)) W with mu = mu0 / cheap spectral norm, which
// keeps W nonsingular for any 0 < mu0 < 1. Returns the step size used.
inline double natural_gradient_step_inplace(std::span<cd> W,
                                            std::span<const cd> Y,
                                            std::span<const cd> g, double mu0,
                                            double* sigma_out = nullptr) {
  const int n = static_cast<int>(Y.size());
  cd inner = 0.0;
  double ng2 = 0.0, ny2 = 0.0;
  for (int i = 0; i < n; ++i) {
    inner += std::conj(g[i]) * Y[i];
    ng2 += std::norm(g[i]);
    ny2 += std::norm(Y[i]);
  }
  const double s = 2.0 - 2.0 * inner.real() + ng2 * ny2;
  const double sigma = std::sqrt(s);
  if (!std::isfinite(sigma) || sigma <= 0.0)
    throw numeric_error("natural_gradient_step: non-finite step normalizer");
  const double mu = mu0 / sigma;
  if (sigma_out) *sigma_out = sigma;

  // row vector v = Y^H W, then W += mu (W - g v)
  std::vector<cd> v(n, cd{});
  for (int i = 0; i < n; ++i) {
    const cd yc = std::conj(Y[i]);
    const cd* row = W.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) v[j] += yc * row[j];
  }
  for (int i = 0; i < n; ++i) {
    cd* row = W.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) row[j] += mu * (row[j] - g[i] * v[j]);
  }
  return mu;
}

inline CMat natural_gradient_step(const CMat& W, std::span<const cd> Y,
                                  std::span<const cd> g,
                                  const StepControl& control) {
  control.validate();
  require(static_cast<int>(Y.size()) == W.n && Y.size() == g.size(),
          "natural_gradient_step: dimension mismatch");
  CMat out = W;
  natural_gradient_step_inplace(std::span<cd>(out.a), Y, g, control.mu0);
  if (!all_finite(out.a))
    throw numeric_error("natural_gradient_step: non-finite result");
  return out;
}

// Minimal-distortion scaling: per bin, W <- diag(W^-1) W, which forces the
// diagonal of the implied mixing matrix to one.
inline std::vector<cd> resolve_scaling(std::span<const cd> W, int bins,
                                       int channels) {
  std::vector<cd> out(W.begin(), W.end());
  CMat m(channels);
  for (int k = 0; k < bins; ++k) {
    const cd* src = W.data() + static_cast<size_t>(k) * channels * channels;
    std::copy(src, src + static_cast<size_t>(channels) * channels,
              m.a.begin());
    const CMat inv = inverse(m);
    cd* dst = out.data() + static_cast<size_t>(k) * channels * channels;
    for (int i = 0; i < channels; ++i)
      for (int j = 0; j < channels; ++j)
        dst[static_cast<size_t>(i) * channels + j] =
            inv.at(i, i) * dst[static_cast<size_t>(i) * channels + j];
  }
  return out;
}

struct WSnapshot {
  long frame_index = 0;  // frames processed when the snapshot was taken
  std::vector<cd> W;
};

struct OnlineResult {
  Spectrogram outputs;
  std::vector<WSnapshot> trajectory;
};

struct OnlineOptions {
  int snapshot_interval = 0;  // 0: no trajectory
  bool snapshot_final = false;
};

namespace detail {

inline constexpr int kMaxBinResets = 3;

// Resets bins whose matrices went non-finite; throws once the per-run
// budget is exhausted.
inline void guard_divergence(SeparationState& state, int& resets) {
  const int n = state.channels;
  for (int k = 0; k < state.bins; ++k) {
    auto w = state.w(k);
    if (all_finite(w)) continue;
    if (++resets > kMaxBinResets)
      throw numeric_error("separator: divergence reset limit exceeded");
    std::fill(w.begin(), w.end(), cd{});
    for (int i = 0; i < n; ++i) w[static_cast<size_t>(i) * n + i] = 1.0;
  }
}

}  // namespace detail

// Online mode: one pass over the frames, one update of every bin per frame.
// The separated output of a frame uses the matrices from before that
// frame's update. State persists across calls, so callers can stream.
inline OnlineResult online_separate(const Spectrogram& mixture,
                                    const DensityModel& model,
                                    const StepControl& control,
                                    SeparationState& state,
                                    const OnlineOptions& options = {}) {
  control.validate();
  require(mixture.channels >= 2, "online_separate: need at least 2 channels");
  require(state.bins == mixture.bins && state.channels == mixture.channels,
          "online_separate: state does not match the spectrogram");
  require(state.hidden_dim == model.hidden_dim(),
          "online_separate: hidden size does not match the model");

  const int n = mixture.channels;
  const int bins = mixture.bins;
  OnlineResult result;
  result.outputs = mixture;  // geometry copy; data overwritten below

  std::vector<cd> Xf(static_cast<size_t>(n) * bins);
  std::vector<cd> Yf(static_cast<size_t>(n) * bins);
  std::vector<GainResult> gains(n);
  std::vector<cd> g(n), Yk(n);
  int resets = 0;

  for (int t = 0; t < mixture.frames; ++t) {
    for (int c = 0; c < n; ++c)
      for (int k = 0; k < bins; ++k)
        Xf[static_cast<size_t>(c) * bins + k] = mixture.at(c, k, t);

    // outputs with the pre-update matrices
    for (int k = 0; k < bins; ++k) {
      auto w = state.w(k);
      for (int i = 0; i < n; ++i) {
        cd acc = 0.0;
        for (int j = 0; j < n; ++j)
          acc += w[static_cast<size_t>(i) * n + j] *
                 Xf[static_cast<size_t>(j) * bins + k];
        Yf[static_cast<size_t>(i) * bins + k] = acc;
      }
    }
    for (int c = 0; c < n; ++c)
      for (int k = 0; k < bins; ++k)
        result.outputs.at(c, k, t) = Yf[static_cast<size_t>(c) * bins + k];

    // full-band gain evaluation, one per source
    for (int c = 0; c < n; ++c) {
      std::span<const cd> Yn(Yf.data() + static_cast<size_t>(c) * bins,
                             static_cast<size_t>(bins));
      gains[c] = model.gains(Yn, state.h(c));
    }

    for (int k = 0; k < bins; ++k) {
      for (int i = 0; i < n; ++i) {
        Yk[i] = Yf[static_cast<size_t>(i) * bins + k];
        g[i] = gains[i].gains[k] * Yk[i];
      }
      natural_gradient_step_inplace(state.w(k), Yk, g, control.mu0);
    }
    detail::guard_divergence(state, resets);

    for (int c = 0; c < n; ++c) {
      auto h = state.h(c);
      std::copy(gains[c].hidden_next.begin(), gains[c].hidden_next.end(),
                h.begin());
    }
    ++state.frame_index;

    if (options.snapshot_interval > 0 &&
        (t + 1) % options.snapshot_interval == 0)
      result.trajectory.push_back({state.frame_index, state.W});
  }
  if (options.snapshot_final &&
      (result.trajectory.empty() ||
       result.trajectory.back().frame_index != state.frame_index))
    result.trajectory.push_back({state.frame_index, state.W});
  return result;
}

inline OnlineResult online_separate(const Spectrogram& mixture,
                                    const DensityModel& model,
                                    const StepControl& control,
                                    const OnlineOptions& options = {}) {
  SeparationState state = SeparationState::identity(
      mixture.bins, mixture.channels, model.hidden_dim());
  return online_separate(mixture, model, control, state, options);
}

struct BatchResult {
  std::vector<cd> W;  // [bins][channels][channels]
  Spectrogram outputs;
};

// Batch mode: frames are revisited in random order, with the normalized
// step size following the epoch schedule. Recurrent models are rejected
// since random access breaks their state recursion.
inline BatchResult batch_separate(const Spectrogram& mixture,
                                  const DensityModel& model,
                                  const StepControl& control, int epochs,
                                  int iterations_per_epoch,
                                  std::uint64_t seed = 0) {
  control.validate();
  require(mixture.channels >= 2, "batch_separate: need at least 2 channels");
  require(model.hidden_dim() == 0,
          "batch_separate: recurrent models cannot be used in batch mode");
  require(epochs >= 0 && iterations_per_epoch >= 0,
          "batch_separate: negative iteration counts");

  const int n = mixture.channels;
  const int bins = mixture.bins;
  SeparationState state = SeparationState::identity(bins, n, 0);
  Rng rng(seed);

  std::vector<cd> Xf(static_cast<size_t>(n) * bins);
  std::vector<cd> Yf(static_cast<size_t>(n) * bins);
  std::vector<GainResult> gains(n);
  std::vector<cd> g(n), Yk(n);
  int resets = 0;

  for (int e = 0; e < epochs; ++e) {
    const double mu0 = control.epoch_mu(e, epochs);
    for (int it = 0; it < iterations_per_epoch; ++it) {
      const int t = static_cast<int>(
          rng.uniform_int(static_cast<std::uint64_t>(mixture.frames)));
      for (int c = 0; c < n; ++c)
        for (int k = 0; k < bins; ++k)
          Xf[static_cast<size_t>(c) * bins + k] = mixture.at(c, k, t);
      for (int k = 0; k < bins; ++k) {
        auto w = state.w(k);
        for (int i = 0; i < n; ++i) {
          cd acc = 0.0;
          for (int j = 0; j < n; ++j)
            acc += w[static_cast<size_t>(i) * n + j] *
                   Xf[static_cast<size_t>(j) * bins + k];
          Yf[static_cast<size_t>(i) * bins + k] = acc;
        }
      }
      for (int c = 0; c < n; ++c) {
        std::span<const cd> Yn(Yf.data() + static_cast<size_t>(c) * bins,
                               static_cast<size_t>(bins));
        gains[c] = model.gains(Yn, {});
      }
      for (int k = 0; k < bins; ++k) {
        for (int i = 0; i < n; ++i) {
          Yk[i] = Yf[static_cast<size_t>(i) * bins + k];
          g[i] = gains[i].gains[k] * Yk[i];
        }
        natural_gradient_step_inplace(state.w(k), Yk, g, mu0);
      }
      detail::guard_divergence(state, resets);
    }
  }

  BatchResult result;
  result.outputs = mixture;
  for (int t = 0; t < mixture.frames; ++t)
    for (int k = 0; k < bins; ++k) {
      auto w = state.w(k);
      for (int i = 0; i < n; ++i) {
        cd acc = 0.0;
        for (int j = 0; j < n; ++j) acc += w[static_cast<size_t>(i) * n + j] *
                                           mixture.at(j, k, t);
        result.outputs.at(i, k, t) = acc;
      }
    }
  result.W = std::move(state.W);
  return result;
}

// ---- state persistence ---------------------------------------------------

inline void save_state(const SeparationState& s, const std::string& path) {
  TensorFile tf;
  tf.meta.emplace_back("bins", std::to_string(s.bins));
  tf.meta.emplace_back("channels", std::to_string(s.channels));
  tf.meta.emplace_back("hidden", std::to_string(s.hidden_dim));
  tf.meta.emplace_back("frame_index", std::to_string(s.frame_index));
  TensorEntry w;
  w.name = "W";
  w.f64 = true;
  w.dims = {s.bins, s.channels, s.channels, 2};  // interleaved re, im
  w.data.reserve(s.W.size() * 2);
  for (const cd& v : s.W) {
    w.data.push_back(v.real());
    w.data.push_back(v.imag());
  }
  tf.tensors.push_back(std::move(w));
  if (s.hidden_dim > 0) {
    TensorEntry h;
    h.name = "hidden";
    h.f64 = true;
    h.dims = {s.channels, s.hidden_dim};
    h.data = s.hidden;
    tf.tensors.push_back(std::move(h));
  }
  write_tensor_file(path, tf);
}

inline SeparationState load_state(const std::string& path) {
  const TensorFile tf = read_tensor_file(path);
  SeparationState s;
  s.bins = static_cast<int>(tf.meta_int("bins"));
  s.channels = static_cast<int>(tf.meta_int("channels"));
  s.hidden_dim = static_cast<int>(tf.meta_int("hidden"));
  s.frame_index = tf.meta_int("frame_index");
  const TensorEntry* w = tf.find("W");
  if (!w || w->dims != std::vector<std::int64_t>{s.bins, s.channels,
                                                 s.channels, 2})
    throw format_error("state file: missing or misshaped W tensor");
  s.W.resize(w->data.size() / 2);
  for (size_t i = 0; i < s.W.size(); ++i)
    s.W[i] = cd{w->data[2 * i], w->data[2 * i + 1]};
  if (s.hidden_dim > 0) {
    const TensorEntry* h = tf.find("hidden");
    if (!h || h->dims != std::vector<std::int64_t>{s.channels, s.hidden_dim})
      throw format_error("state file: missing or misshaped hidden tensor");
    s.hidden = h->data;
  }
  return s;
}

}  // namespace iva

#endif  // IVA_SEPARATOR_HPP
