// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_STFT_HPP
#define IVA_STFT_HPP

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "iva/errors.hpp"
#include "iva/fft.hpp"

namespace iva {

// Analysis/synthesis window pair satisfying the weighted overlap-add
// perfect-reconstruction condition: sum_m wa(n+mH) ws(n+mH) == 1 for all n.
struct WindowPair {
  std::vector<double> analysis;
  std::vector<double> synthesis;
  int hop = 0;

  int frame_size() const { return static_cast<int>(analysis.size()); }
};

// Worst-case deviation of the overlap-add sum from one.
inline double reconstruction_residual(const WindowPair& w) {
  const int f = w.frame_size();
  const int h = w.hop;
  double worst = 0.0;
  for (int r = 0; r < h; ++r) {
    double acc = 0.0;
    for (int i = r; i < f; i += h) acc += w.analysis[i] * w.synthesis[i];
    worst = std::max(worst, std::abs(acc - 1.0));
  }
  return worst;
}

// Periodic Hann analysis window with its least-squares dual as synthesis
// window. The dual divides by the hop-folded energy of the analysis window,
// which makes the overlap-add sum exactly one in every hop residue class.
// The no-overlap case (hop == frame) switches to a rectangular pair since a
// Hann window has a zero sample that no overlap would cover.
inline WindowPair design_windows(int frame_size, int hop) {
  require(frame_size > 0 && is_power_of_two(frame_size),
          "design_windows: frame size must be a positive power of two");
  require(hop > 0 && hop <= frame_size,
          "design_windows: need 0 < hop <= frame_size");

  WindowPair w;
  w.hop = hop;
  w.analysis.resize(frame_size);
  if (hop == frame_size) {
    std::fill(w.analysis.begin(), w.analysis.end(), 1.0);
  } else {
    for (int i = 0; i < frame_size; ++i)
      w.analysis[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / frame_size);
  }

  std::vector<double> folded(hop, 0.0);
  for (int i = 0; i < frame_size; ++i)
    folded[i % hop] += w.analysis[i] * w.analysis[i];
  w.synthesis.resize(frame_size);
  for (int i = 0; i < frame_size; ++i) {
    const double d = folded[i % hop];
    if (!(d > 0.0))
      throw std::invalid_argument(
          "design_windows: analysis window has an uncovered sample phase");
    w.synthesis[i] = w.analysis[i] / d;
  }
  return w;
}

// Multichannel complex time-frequency array, indexed [channel][bin][frame].
struct Spectrogram {
  int channels = 0;
  int bins = 0;
  int frames = 0;
  int frame_size = 0;
  int hop = 0;
  double sample_rate = 0.0;
  std::vector<cd> data;

  Spectrogram() = default;
  Spectrogram(int n_channels, int n_bins, int n_frames)
      : channels(n_channels),
        bins(n_bins),
        frames(n_frames),
        data(static_cast<size_t>(n_channels) * n_bins * n_frames) {}

  cd& at(int c, int k, int t) {
    return data[(static_cast<size_t>(c) * bins + k) * frames + t];
  }
  const cd& at(int c, int k, int t) const {
    return data[(static_cast<size_t>(c) * bins + k) * frames + t];
  }
};

using Signal = std::vector<std::vector<double>>;  // [channel][sample]

inline int stft_frame_count(size_t samples, int frame_size, int hop) {
  require(samples >= static_cast<size_t>(frame_size),
          "stft: signal shorter than one frame");
  return static_cast<int>((samples - frame_size) / hop) + 1;
}

// Frame t covers samples [t*hop, t*hop + frame_size); a trailing partial
// frame is dropped.
inline Spectrogram stft(const Signal& signal, const WindowPair& windows,
                        double sample_rate = 0.0) {
  require(!signal.empty(), "stft: no channels");
  const int f = windows.frame_size();
  const int h = windows.hop;
  const size_t len = signal[0].size();
  for (const auto& ch : signal)
    require(ch.size() == len, "stft: channel lengths differ");
  const int frames = stft_frame_count(len, f, h);
  const int bins = f / 2 + 1;

  Spectrogram spec(static_cast<int>(signal.size()), bins, frames);
  spec.frame_size = f;
  spec.hop = h;
  spec.sample_rate = sample_rate;

  Fft plan(f);
  std::vector<double> frame(f);
  std::vector<cd> out;
  for (size_t c = 0; c < signal.size(); ++c) {
    for (int t = 0; t < frames; ++t) {
      const size_t base = static_cast<size_t>(t) * h;
      for (int i = 0; i < f; ++i)
        frame[i] = signal[c][base + i] * windows.analysis[i];
      rfft(plan, frame, out);
      for (int k = 0; k < bins; ++k) spec.at(static_cast<int>(c), k, t) = out[k];
    }
  }
  return spec;
}

// Weighted overlap-add synthesis; output length is (frames-1)*hop + frame.
// Reconstruction is exact on the interior; the first and last frame_size
// samples lack full window coverage.
inline Signal istft(const Spectrogram& spec, const WindowPair& windows) {
  const int f = windows.frame_size();
  require(f == spec.frame_size && windows.hop == spec.hop,
          "istft: window geometry does not match the spectrogram");
  require(spec.bins == f / 2 + 1, "istft: bin count mismatch");

  const size_t out_len =
      static_cast<size_t>(spec.frames - 1) * spec.hop + static_cast<size_t>(f);
  Signal out(spec.channels, std::vector<double>(out_len, 0.0));

  Fft plan(f);
  std::vector<cd> bins(spec.bins);
  std::vector<double> frame;
  for (int c = 0; c < spec.channels; ++c) {
    for (int t = 0; t < spec.frames; ++t) {
      for (int k = 0; k < spec.bins; ++k) bins[k] = spec.at(c, k, t);
      irfft(plan, bins, frame);
      const size_t base = static_cast<size_t>(t) * spec.hop;
      for (int i = 0; i < f; ++i)
        out[c][base + i] += frame[i] * windows.synthesis[i];
    }
  }
  return out;
}

}  // namespace iva

#endif  // IVA_STFT_HPP
