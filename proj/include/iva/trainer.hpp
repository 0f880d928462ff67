// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Fits the gain-network weights by maximizing the permutation-invariant
// absolute coherence between separated outputs and known sources, with the
// objective differentiated in reverse mode through the whole unrolled
// recursion: gain networks, per-bin natural-gradient updates, the hidden
// state chain and the coherence statistics. Complex quantities use the
// real-composite convention: adj(z) = dJ/dRe(z) + i dJ/dIm(z).

#ifndef IVA_TRAINER_HPP
#define IVA_TRAINER_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "iva/density.hpp"
#include "iva/errors.hpp"
#include "iva/metrics.hpp"
#include "iva/mixsim.hpp"
#include "iva/optimizer.hpp"
#include "iva/rng.hpp"
#include "iva/separator.hpp"
#include "iva/stft.hpp"
#include "iva/wav.hpp"

namespace iva {

struct TrainConfig {
  int n_sources = 4;
  int coherence_window = 128;       // frames per rollout
  double mu0 = 0.01;
  double reset_probability = 0.02;  // lane reset after each evaluation
  int batch_size = 64;
  int iterations = 20000;
  double optimizer_step = 0.01;
  std::string optimizer = "adam";
  std::uint64_t seed = 0;

  // geometry and architecture; desk-scale overrides are expected
  int frame_size = 512;
  int hop = 160;
  int width1 = 512;
  int width2 = 512;
  int hidden = 0;  // 0 = feedforward, 128 = recurrent
  double sample_rate = 16000.0;

  bool differentiate_step_size = true;  // false: treat mu_k as constant

  std::string log_csv;
  std::string checkpoint_path;
  int checkpoint_interval = 0;
  int threads = 1;

  int bins() const { return frame_size / 2 + 1; }
  int segment_samples() const {
    return (coherence_window - 1) * hop + frame_size;
  }

  void validate() const {
    require(n_sources >= 2, "train config: need at least 2 sources");
    require(coherence_window > 0 && batch_size > 0 && iterations >= 0,
            "train config: counts must be positive");
    require(mu0 > 0.0 && mu0 < 1.0, "train config: need 0 < mu0 < 1");
    require(reset_probability >= 0.0 && reset_probability <= 1.0,
            "train config: reset probability outside [0, 1]");
    require(optimizer_step > 0.0, "train config: step must be positive");
    require(is_power_of_two(frame_size) && hop > 0 && hop <= frame_size,
            "train config: bad frame geometry");
    require(width1 > 0 && width2 > 0 && hidden >= 0 && hidden <= width1 &&
                hidden <= 512,
            "train config: bad network sizes");
    require(threads >= 1, "train config: need at least one thread");
    if (checkpoint_interval > 0)
      require(hidden == 0 || hidden == 128,
              "train config: checkpoint files only accept hidden 0 or 128");
  }
};

// ---- source sampling -------------------------------------------------------

class SourceSampler {
 public:
  virtual ~SourceSampler() = default;
  // n peak-normalized segments of `length` samples each.
  virtual Signal sample(Rng& rng, int n, size_t length) = 0;
};

// Draws random segments from a directory of WAV files. Segments whose RMS
// is below -60 dBFS are rejected and redrawn.
class WavCorpusSampler final : public SourceSampler {
 public:
  explicit WavCorpusSampler(const std::string& dir) {
    namespace fs = std::filesystem;
    require(fs::is_directory(dir), "corpus: not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".wav")
        files_.push_back(e.path().string());
    std::sort(files_.begin(), files_.end());
    require(!files_.empty(), "corpus: no WAV files in " + dir);
  }

  Signal sample(Rng& rng, int n, size_t length) override {
    Signal out(n);
    for (int s = 0; s < n; ++s) out[s] = draw_segment(rng, length);
    return out;
  }

 private:
  std::vector<double> draw_segment(Rng& rng, size_t length) {
    constexpr int kAttempts = 200;
    constexpr double kSilenceRms = 1e-3;  // -60 dBFS
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const size_t idx = rng.uniform_int(files_.size());
      const std::vector<double>& wave = load(idx);
      if (wave.size() < length) continue;
      const size_t off = rng.uniform_int(wave.size() - length + 1);
      std::vector<double> seg(wave.begin() + off, wave.begin() + off + length);
      double peak = 0.0, power = 0.0;
      for (double v : seg) {
        peak = std::max(peak, std::abs(v));
        power += v * v;
      }
      if (std::sqrt(power / length) < kSilenceRms) continue;
      for (double& v : seg) v /= peak;
      return seg;
    }
    throw std::runtime_error("corpus: no usable segment found");
  }

  const std::vector<double>& load(size_t idx) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(idx);
    if (it == cache_.end()) {
      WavData w = read_wav(files_[idx]);
      it = cache_.emplace(idx, std::move(w.channels[0])).first;
    }
    return it->second;
  }

  std::vector<std::string> files_;
  std::unordered_map<size_t, std::vector<double>> cache_;
  std::mutex mu_;
};

// ---- rollout ---------------------------------------------------------------

// Everything the reverse pass needs from one unrolled window.
struct RolloutTrace {
  bool ok = false;
  bool neural = false;
  int frames = 0, n = 0, bins = 0, w1 = 0, w2 = 0, hidden = 0;

  std::vector<cd> X;     // [t][n][k]
  std::vector<cd> S;     // [t][n][k] reference spectra
  std::vector<cd> Y;     // [t][n][k]
  std::vector<cd> Wpre;  // [t][k][n][n], matrices used at frame t
  std::vector<double> h0;          // [n][hidden], state entering the window
  std::vector<double> nu;          // [t][n]
  std::vector<double> raw_norm;    // [t][n]
  std::vector<double> alpha;       // [t][n][w1]
  std::vector<double> beta;        // [t][n][w2]
  std::vector<double> gamma;       // [t][n][k]
  std::vector<double> mu;          // [t][k]
  std::vector<double> sigma;       // [t][k]

  CoherenceMoments moments;
  CoherenceReport report;

  size_t tnk(int t, int c, int k) const {
    return (static_cast<size_t>(t) * n + c) * bins + k;
  }
  size_t tkw(int t, int k) const {
    return (static_cast<size_t>(t) * bins + k) * n * n;
  }
};

struct RolloutResult {
  bool ok = false;
  double value = 0.0;
  RolloutTrace trace;
};

namespace detail {

inline int mix_latency(const MixingSystem& sys) {
  return sys.kind == MixingSystem::Kind::random_taps ? kRandomTapHalfSpan : 0;
}

}  // namespace detail

// Unrolls `frames` online separation steps over a fresh mixture of the given
// sources and reports the coherence against them. `state` advances in place,
// so an episode persists across consecutive rollouts. Sources must carry
// mix_latency extra samples of context at both ends.
inline RolloutResult rollout(const MixingSystem& system,
                             SeparationState& state,
                             const DensityModel& model, const Signal& sources,
                             int frames, const WindowPair& windows,
                             double mu0, double sample_rate = 16000.0) {
  const int n = system.n;
  const int hop = windows.hop;
  const int frame_size = windows.frame_size();
  const int bins = frame_size / 2 + 1;
  require(static_cast<int>(sources.size()) == n, "rollout: source count");
  require(state.bins == bins && state.channels == n &&
              state.hidden_dim == model.hidden_dim(),
          "rollout: state does not match the configuration");

  RolloutResult out;
  out.trace.n = n;
  out.trace.bins = bins;
  out.trace.neural = model.kind == DensityKind::neural;
  out.trace.hidden = model.hidden_dim();
  if (out.trace.neural) {
    out.trace.w1 = model.weights.width1();
    out.trace.w2 = model.weights.width2();
  }
  if (frames <= 0) {
    out.ok = out.trace.ok = true;
    out.trace.moments = CoherenceMoments(n, bins);
    return out;
  }

  const int latency = detail::mix_latency(system);
  const size_t seg = static_cast<size_t>(frames - 1) * hop + frame_size;
  for (const auto& s : sources)
    require(s.size() >= seg + 2 * static_cast<size_t>(latency),
            "rollout: source segment too short");

  const MixResult mixed = mix(system, sources);
  Signal mix_crop(n), ref_crop(n);
  for (int c = 0; c < n; ++c) {
    mix_crop[c].assign(mixed.mixtures[c].begin() + 2 * latency,
                       mixed.mixtures[c].begin() + 2 * latency + seg);
    ref_crop[c].assign(sources[c].begin() + latency,
                       sources[c].begin() + latency + seg);
  }
  const Spectrogram Xs = stft(mix_crop, windows, sample_rate);
  const Spectrogram Ss = stft(ref_crop, windows, sample_rate);

  RolloutTrace& tr = out.trace;
  tr.frames = frames;
  const size_t tnk_total = static_cast<size_t>(frames) * n * bins;
  tr.X.resize(tnk_total);
  tr.S.resize(tnk_total);
  tr.Y.resize(tnk_total);
  tr.Wpre.resize(static_cast<size_t>(frames) * bins * n * n);
  tr.h0 = state.hidden;
  tr.nu.resize(static_cast<size_t>(frames) * n);
  tr.raw_norm.resize(static_cast<size_t>(frames) * n);
  if (tr.neural) {
    tr.alpha.resize(static_cast<size_t>(frames) * n * tr.w1);
    tr.beta.resize(static_cast<size_t>(frames) * n * tr.w2);
    tr.gamma.resize(static_cast<size_t>(frames) * n * bins);
  }
  tr.mu.resize(static_cast<size_t>(frames) * bins);
  tr.sigma.resize(static_cast<size_t>(frames) * bins);
  tr.moments = CoherenceMoments(n, bins);

  std::vector<GainResult> gains(n);
  std::vector<cd> Yk(n), g(n);
  NnTrace nt;

  for (int t = 0; t < frames; ++t) {
    for (int c = 0; c < n; ++c)
      for (int k = 0; k < bins; ++k) {
        tr.X[tr.tnk(t, c, k)] = Xs.at(c, k, t);
        tr.S[tr.tnk(t, c, k)] = Ss.at(c, k, t);
      }
    std::copy(state.W.begin(), state.W.end(), tr.Wpre.begin() + tr.tkw(t, 0));

    for (int k = 0; k < bins; ++k) {
      auto w = state.w(k);
      for (int i = 0; i < n; ++i) {
        cd acc = 0.0;
        for (int j = 0; j < n; ++j)
          acc += w[static_cast<size_t>(i) * n + j] * tr.X[tr.tnk(t, j, k)];
        tr.Y[tr.tnk(t, i, k)] = acc;
      }
    }

    for (int c = 0; c < n; ++c) {
      std::span<const cd> Yn(tr.Y.data() + tr.tnk(t, c, 0),
                             static_cast<size_t>(bins));
      gains[c] = model.gains(Yn, state.h(c), tr.neural ? &nt : nullptr);
      if (tr.neural) {
        tr.nu[static_cast<size_t>(t) * n + c] = nt.nu;
        tr.raw_norm[static_cast<size_t>(t) * n + c] = nt.raw_norm;
        std::copy(nt.alpha.begin(), nt.alpha.end(),
                  tr.alpha.begin() + (static_cast<size_t>(t) * n + c) * tr.w1);
        std::copy(nt.beta.begin(), nt.beta.end(),
                  tr.beta.begin() + (static_cast<size_t>(t) * n + c) * tr.w2);
        std::copy(nt.gamma.begin(), nt.gamma.end(),
                  tr.gamma.begin() + (static_cast<size_t>(t) * n + c) * bins);
      }
    }

    for (int k = 0; k < bins; ++k) {
      for (int i = 0; i < n; ++i) {
        Yk[i] = tr.Y[tr.tnk(t, i, k)];
        g[i] = gains[i].gains[k] * Yk[i];
      }
      double sigma = 0.0;
      const double mu =
          natural_gradient_step_inplace(state.w(k), Yk, g, mu0, &sigma);
      tr.mu[static_cast<size_t>(t) * bins + k] = mu;
      tr.sigma[static_cast<size_t>(t) * bins + k] = sigma;
    }
    if (!all_finite(state.W)) return out;  // ok stays false; caller resets

    for (int c = 0; c < n; ++c)
      std::copy(gains[c].hidden_next.begin(), gains[c].hidden_next.end(),
                state.h(c).begin());
    ++state.frame_index;

    for (int a = 0; a < n; ++a)
      for (int k = 0; k < bins; ++k) {
        const cd y = tr.Y[tr.tnk(t, a, k)];
        tr.moments.p(a, k) += std::norm(y);
        tr.moments.q(a, k) += std::norm(tr.S[tr.tnk(t, a, k)]);
        for (int b = 0; b < n; ++b)
          tr.moments.c(a, b, k) += y * std::conj(tr.S[tr.tnk(t, b, k)]);
      }
  }

  tr.report = coherence_from_moments(tr.moments);
  tr.ok = true;
  out.ok = true;
  out.value = tr.report.value;
  return out;
}

// ---- reverse pass ----------------------------------------------------------

struct WeightGradient {
  RealMat theta1, theta2, theta3;

  static WeightGradient zeros_like(const NnWeights& w) {
    WeightGradient g;
    g.theta1 = RealMat(w.theta1.rows, w.theta1.cols);
    g.theta2 = RealMat(w.theta2.rows, w.theta2.cols);
    g.theta3 = RealMat(w.theta3.rows, w.theta3.cols);
    return g;
  }
};

inline std::vector<double> weights_flat(const NnWeights& w) {
  std::vector<double> flat;
  flat.reserve(w.parameter_count());
  for (const RealMat* m : {&w.theta1, &w.theta2, &w.theta3})
    flat.insert(flat.end(), m->a.begin(), m->a.end());
  return flat;
}

inline void weights_from_flat(NnWeights& w, std::span<const double> flat) {
  require(flat.size() == w.parameter_count(), "weights_from_flat: size");
  size_t off = 0;
  for (RealMat* m : {&w.theta1, &w.theta2, &w.theta3}) {
    std::copy(flat.begin() + off, flat.begin() + off + m->a.size(),
              m->a.begin());
    off += m->a.size();
  }
}

inline std::vector<double> gradient_flat(const WeightGradient& g) {
  std::vector<double> flat;
  flat.reserve(g.theta1.a.size() + g.theta2.a.size() + g.theta3.a.size());
  for (const RealMat* m : {&g.theta1, &g.theta2, &g.theta3})
    flat.insert(flat.end(), m->a.begin(), m->a.end());
  return flat;
}

namespace detail {

// Accumulates scale * d(coherence of trace)/d(theta) into acc.
inline void backprop_trace(const NnWeights& w, const RolloutTrace& tr,
                           bool diff_mu, double scale, WeightGradient& acc) {
  if (!tr.ok || !tr.neural || tr.frames == 0) return;
  const int n = tr.n, bins = tr.bins, w1 = tr.w1, w2 = tr.w2, H = tr.hidden;
  const double obj_scale = scale / (static_cast<double>(n) * bins);

  // objective seeds, frame independent
  std::vector<int> src_of_out(n, -1);
  for (int s = 0; s < n; ++s) src_of_out[tr.report.permutation[s]] = s;
  std::vector<cd> adjC(static_cast<size_t>(n) * bins, cd{});
  std::vector<double> adjP(static_cast<size_t>(n) * bins, 0.0);
  for (int m = 0; m < n; ++m) {
    const int s = src_of_out[m];
    for (int k = 0; k < bins; ++k) {
      const cd C = tr.moments.c(m, s, k);
      const double P = tr.moments.p(m, k);
      const double Q = tr.moments.q(s, k);
      const double mag = std::abs(C);
      if (!(P > 1e-300) || !(Q > 1e-300) || !(mag > 0.0)) continue;
      const double denom = std::sqrt(P * Q);
      adjC[static_cast<size_t>(m) * bins + k] = obj_scale * (C / mag) / denom;
      adjP[static_cast<size_t>(m) * bins + k] =
          -obj_scale * mag / (denom * 2.0 * P);
    }
  }

  std::vector<cd> adjW(static_cast<size_t>(bins) * n * n, cd{});
  std::vector<cd> adjWnew(adjW.size());
  std::vector<cd> adjY(static_cast<size_t>(n) * bins);
  std::vector<double> adjH(static_cast<size_t>(n) * H, 0.0);
  std::vector<double> adjHprev(adjH.size());
  std::vector<double> adjF(static_cast<size_t>(n) * bins);

  std::vector<cd> M(static_cast<size_t>(n) * n), A(M.size()),
      adjWprev(M.size()), adjA(M.size()), adjM(M.size());
  std::vector<cd> Yk(n), g(n), adjg(n), adjYk(n);
  std::vector<double> fk(n);

  std::vector<double> u(w.feature_dim());
  std::vector<double> adj_phi(bins), adj_gamma(bins), adj_beta(w2),
      adj_z2(w2), adj_alpha(w1), adj_z1(w1), adj_u(w.feature_dim());
  std::vector<double> b1(w2 + 1), a1(w1 + 1);

  for (int t = tr.frames - 1; t >= 0; --t) {
    // objective -> Y(t)
    for (int m = 0; m < n; ++m) {
      const int s = src_of_out[m];
      for (int k = 0; k < bins; ++k) {
        const cd y = tr.Y[tr.tnk(t, m, k)];
        adjY[static_cast<size_t>(m) * bins + k] =
            adjC[static_cast<size_t>(m) * bins + k] * tr.S[tr.tnk(t, s, k)] +
            2.0 * adjP[static_cast<size_t>(m) * bins + k] * y;
      }
    }
    std::fill(adjF.begin(), adjF.end(), 0.0);

    // update rule: W(t+1) = (I + mu (I - g Y^H)) W(t)
    for (int k = 0; k < bins; ++k) {
      const double mu = tr.mu[static_cast<size_t>(t) * bins + k];
      const double sigma = tr.sigma[static_cast<size_t>(t) * bins + k];
      double ng2 = 0.0, ny2 = 0.0;
      for (int i = 0; i < n; ++i) {
        Yk[i] = tr.Y[tr.tnk(t, i, k)];
        const double nu = tr.nu[static_cast<size_t>(t) * n + i];
        fk[i] = softplus(tr.gamma[(static_cast<size_t>(t) * n + i) * bins + k]) / nu;
        g[i] = fk[i] * Yk[i];
        ng2 += std::norm(g[i]);
        ny2 += std::norm(Yk[i]);
      }
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const cd m_ij =
              (i == j ? cd{1.0} : cd{}) - g[i] * std::conj(Yk[j]);
          M[static_cast<size_t>(i) * n + j] = m_ij;
          A[static_cast<size_t>(i) * n + j] =
              (i == j ? cd{1.0} : cd{}) + mu * m_ij;
        }

      const cd* aW = adjW.data() + static_cast<size_t>(k) * n * n;
      const cd* Wp = tr.Wpre.data() + tr.tkw(t, k);
      // adjWprev = A^H adjW ; adjA = adjW Wpre^H
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          cd acc1 = 0.0, acc2 = 0.0;
          for (int l = 0; l < n; ++l) {
            acc1 += std::conj(A[static_cast<size_t>(l) * n + i]) *
                    aW[static_cast<size_t>(l) * n + j];
            acc2 += aW[static_cast<size_t>(i) * n + l] *
                    std::conj(Wp[static_cast<size_t>(j) * n + l]);
          }
          adjWprev[static_cast<size_t>(i) * n + j] = acc1;
          adjA[static_cast<size_t>(i) * n + j] = acc2;
        }

      double adj_mu = 0.0;
      for (size_t i = 0; i < M.size(); ++i) {
        adj_mu += std::real(std::conj(adjA[i]) * M[i]);
        adjM[i] = mu * adjA[i];
      }
      // adjg = -adjM Y ; adjYk = -adjM^H g
      for (int i = 0; i < n; ++i) {
        cd acc = 0.0;
        for (int j = 0; j < n; ++j)
          acc += adjM[static_cast<size_t>(i) * n + j] * Yk[j];
        adjg[i] = -acc;
      }
      for (int j = 0; j < n; ++j) {
        cd acc = 0.0;
        for (int i = 0; i < n; ++i)
          acc += std::conj(adjM[static_cast<size_t>(i) * n + j]) * g[i];
        adjYk[j] = -acc;
      }
      if (diff_mu) {
        // mu = mu0 / sigma, sigma = sqrt(s), s = 2 - 2 Re(g^H Y) + |g|^2 |Y|^2
        const double adj_sigma = -(mu / sigma) * adj_mu;
        const double adj_s = adj_sigma / (2.0 * sigma);
        for (int i = 0; i < n; ++i) {
          adjg[i] += adj_s * (-2.0 * Yk[i] + 2.0 * ny2 * g[i]);
          adjYk[i] += adj_s * (-2.0 * g[i] + 2.0 * ng2 * Yk[i]);
        }
      }
      // g = f (.) Y with real f
      for (int i = 0; i < n; ++i) {
        adjF[static_cast<size_t>(i) * bins + k] +=
            std::real(std::conj(adjg[i]) * Yk[i]);
        adjY[static_cast<size_t>(i) * bins + k] += fk[i] * adjg[i] + adjYk[i];
      }
      std::copy(adjWprev.begin(), adjWprev.end(),
                adjWnew.begin() + static_cast<size_t>(k) * n * n);
    }

    // density network, one source at a time
    std::fill(adjHprev.begin(), adjHprev.end(), 0.0);
    for (int c = 0; c < n; ++c) {
      const double nu = tr.nu[static_cast<size_t>(t) * n + c];
      const double raw = tr.raw_norm[static_cast<size_t>(t) * n + c];
      const double* alpha =
          tr.alpha.data() + (static_cast<size_t>(t) * n + c) * w1;
      const double* beta =
          tr.beta.data() + (static_cast<size_t>(t) * n + c) * w2;
      const double* gamma =
          tr.gamma.data() + (static_cast<size_t>(t) * n + c) * bins;
      const double* h_prev =
          t == 0 ? tr.h0.data() + static_cast<size_t>(c) * H
                 : tr.alpha.data() + (static_cast<size_t>(t - 1) * n + c) * w1;
      const cd* Yrow = tr.Y.data() + tr.tnk(t, c, 0);
      const double* aF = adjF.data() + static_cast<size_t>(c) * bins;
      cd* aY = adjY.data() + static_cast<size_t>(c) * bins;

      double adj_nu = 0.0;
      for (int k = 0; k < bins; ++k) {
        const double phi = softplus(gamma[k]);
        adj_phi[k] = aF[k] / nu;
        adj_nu -= aF[k] * phi / (nu * nu);
        adj_gamma[k] = adj_phi[k] * sigmoid(gamma[k]);
      }

      // gamma = theta3 [beta; 1]
      for (int i = 0; i < w2; ++i) b1[i] = beta[i];
      b1[w2] = 1.0;
      add_outer(acc.theta3, std::span<const double>(adj_gamma.data(), bins),
                b1);
      mat_apply_transposed(w.theta3, adj_gamma, adj_beta, w2);
      for (int i = 0; i < w2; ++i)
        adj_z2[i] = adj_beta[i] * (1.0 - beta[i] * beta[i]);

      // beta = tanh(theta2 [alpha; 1])
      for (int i = 0; i < w1; ++i) a1[i] = alpha[i];
      a1[w1] = 1.0;
      add_outer(acc.theta2, std::span<const double>(adj_z2.data(), w2), a1);
      mat_apply_transposed(w.theta2, adj_z2, adj_alpha, w1);
      for (int i = 0; i < H; ++i)
        adj_alpha[i] += adjH[static_cast<size_t>(c) * H + i];
      for (int i = 0; i < w1; ++i)
        adj_z1[i] = adj_alpha[i] * (1.0 - alpha[i] * alpha[i]);

      // alpha = tanh(theta1 u), u = [log(|Y/nu|^2 + eps); log nu; h; 1]
      for (int k = 0; k < bins; ++k)
        u[k] = std::log(std::norm(Yrow[k] / nu) + kDensityEps);
      u[bins] = std::log(nu);
      for (int i = 0; i < H; ++i) u[bins + 1 + i] = h_prev[i];
      u[w.feature_dim() - 1] = 1.0;
      add_outer(acc.theta1, std::span<const double>(adj_z1.data(), w1), u);
      mat_apply_transposed(w.theta1, adj_z1, adj_u, w.feature_dim());

      adj_nu += adj_u[bins] / nu;
      for (int i = 0; i < H; ++i)
        adjHprev[static_cast<size_t>(c) * H + i] = adj_u[bins + 1 + i];

      for (int k = 0; k < bins; ++k) {
        const cd sbar = Yrow[k] / nu;
        const double mk = std::norm(sbar);
        const cd adj_sbar = 2.0 * (adj_u[k] / (mk + kDensityEps)) * sbar;
        aY[k] += adj_sbar / nu;
        adj_nu -= std::real(std::conj(adj_sbar) * sbar) / nu;
      }
      if (raw > kDensityEps) {
        const double inv = adj_nu / raw;
        for (int k = 0; k < bins; ++k) aY[k] += inv * Yrow[k];
      }
    }
    std::swap(adjH, adjHprev);

    // output path Y(t) = W(t) X(t)
    for (int k = 0; k < bins; ++k) {
      cd* aWk = adjWnew.data() + static_cast<size_t>(k) * n * n;
      for (int i = 0; i < n; ++i) {
        const cd ay = adjY[static_cast<size_t>(i) * bins + k];
        for (int j = 0; j < n; ++j)
          aWk[static_cast<size_t>(i) * n + j] +=
              ay * std::conj(tr.X[tr.tnk(t, j, k)]);
      }
    }
    std::swap(adjW, adjWnew);
  }
}

}  // namespace detail

// Mean-batch gradient of the coherence objective with respect to the
// weights. Traces from diverged or non-neural rollouts contribute zero.
inline WeightGradient gradient(const NnWeights& w,
                               std::span<const RolloutTrace> traces,
                               bool differentiate_step_size = true) {
  w.validate();
  WeightGradient acc = WeightGradient::zeros_like(w);
  int valid = 0;
  for (const auto& tr : traces)
    if (tr.ok) ++valid;
  if (valid == 0) return acc;
  const double scale = 1.0 / valid;
  for (const auto& tr : traces) {
    if (!tr.ok) continue;
    require(!tr.neural || (tr.bins == w.k && tr.w1 == w.width1() &&
                           tr.w2 == w.width2() && tr.hidden == w.hidden),
            "gradient: trace does not match the weights");
    detail::backprop_trace(w, tr, differentiate_step_size, scale, acc);
  }
  return acc;
}

// ---- training loop ---------------------------------------------------------

struct TrainResult {
  NnWeights weights;
  std::vector<double> objective;  // mean batch coherence per iteration
};

namespace detail {

struct Lane {
  MixingSystem system;
  SeparationState sep;
  Rng rng;

  Lane(int n, int bins, int hidden, std::uint64_t seed)
      : system(), sep(), rng(seed) {
    system = sample_random_system(n, rng.raw());
    sep = SeparationState::identity(bins, n, hidden);
  }

  void reset(int bins, int hidden) {
    system = sample_random_system(system.n, rng.raw());
    sep = SeparationState::identity(bins, system.n, hidden);
  }
};

}  // namespace detail

// Simulation-based training: per iteration every lane mixes freshly sampled
// sources through its persistent system, unrolls the separator for the
// coherence window, and the batch-mean coherence gradient feeds the
// optimizer. Lanes reset (new mixing system, identity matrices, zero hidden
// state) with the configured probability after each evaluation.
inline TrainResult train(const TrainConfig& cfg, SourceSampler& sampler) {
  cfg.validate();
  const int bins = cfg.bins();
  const WindowPair windows = design_windows(cfg.frame_size, cfg.hop);

  Rng master(cfg.seed);
  NnWeights theta =
      init_weights(bins, cfg.width1, cfg.width2, cfg.hidden, master);
  auto opt = make_optimizer(cfg.optimizer, cfg.optimizer_step);

  std::vector<detail::Lane> lanes;
  lanes.reserve(cfg.batch_size);
  for (int l = 0; l < cfg.batch_size; ++l)
    lanes.emplace_back(cfg.n_sources, bins, cfg.hidden,
                       cfg.seed ^ (0x9E3779B97F4A7C15ULL * (l + 1)));

  std::ofstream csv;
  if (!cfg.log_csv.empty()) {
    csv.open(cfg.log_csv);
    if (!csv) throw format_error("train: cannot write " + cfg.log_csv);
    csv << "iteration,coherence\n";
  }

  DensityModel model = DensityModel::neural(theta);
  std::vector<double> flat = weights_flat(theta);
  TrainResult result;
  result.objective.reserve(cfg.iterations);

  const size_t seg_len = static_cast<size_t>(cfg.segment_samples()) +
                         2 * static_cast<size_t>(kRandomTapHalfSpan);
  std::vector<RolloutResult> batch(cfg.batch_size);

  auto run_lane = [&](int l) {
    detail::Lane& lane = lanes[l];
    const Signal src = sampler.sample(lane.rng, cfg.n_sources, seg_len);
    batch[l] = rollout(lane.system, lane.sep, model, src,
                       cfg.coherence_window, windows, cfg.mu0,
                       cfg.sample_rate);
    if (!batch[l].ok) lane.reset(bins, cfg.hidden);  // divergence: skip
  };

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    if (cfg.threads <= 1 || cfg.batch_size == 1) {
      for (int l = 0; l < cfg.batch_size; ++l) run_lane(l);
    } else {
      std::vector<std::thread> pool;
      std::atomic<int> next{0};
      const int workers = std::min(cfg.threads, cfg.batch_size);
      for (int wkr = 0; wkr < workers; ++wkr)
        pool.emplace_back([&]() {
          for (int l = next.fetch_add(1); l < cfg.batch_size;
               l = next.fetch_add(1))
            run_lane(l);
        });
      for (auto& th : pool) th.join();
    }

    double mean = 0.0;
    int ok = 0;
    std::vector<RolloutTrace> traces;
    traces.reserve(cfg.batch_size);
    for (auto& r : batch) {
      if (!r.ok) continue;
      mean += r.value;
      ++ok;
      traces.push_back(std::move(r.trace));
    }
    if (ok > 0) mean /= ok;
    result.objective.push_back(mean);
    if (csv.is_open()) csv << iter << ',' << mean << '\n';

    const WeightGradient grad =
        gradient(theta, traces, cfg.differentiate_step_size);
    std::vector<double> step = gradient_flat(grad);
    for (double& v : step) v = -v;  // maximize coherence
    opt->update(flat, step);
    weights_from_flat(theta, flat);
    model.weights = theta;

    for (auto& lane : lanes)
      if (lane.rng.uniform() < cfg.reset_probability)
        lane.reset(bins, cfg.hidden);

    if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_path.empty() &&
        (iter + 1) % cfg.checkpoint_interval == 0)
      save_weights(theta, cfg.checkpoint_path, /*f64=*/true);
  }

  result.weights = std::move(theta);
  return result;
}

}  // namespace iva

#endif  // IVA_TRAINER_HPP
