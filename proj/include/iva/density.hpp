// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_DENSITY_HPP
#define IVA_DENSITY_HPP

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "iva/complex_mat.hpp"
#include "iva/errors.hpp"
#include "iva/real_mat.hpp"
#include "iva/rng.hpp"
#include "iva/tensor_file.hpp"

namespace iva {

// Floor used inside logs and divisions so silent frames stay finite.
constexpr double kDensityEps = 1e-12;

// Nonnegative per-bin gains of the score function gains(k) * S(k), plus the
// advanced hidden state for recurrent models.
struct GainResult {
  std::vector<double> gains;
  std::vector<double> hidden_next;
};

// Multivariate Laplace prior: the score of exp(-||S||) is S / (2 ||S||),
// so every bin carries the same gain 1 / (2 max(||S||, eps)).
inline GainResult laplace_gains(std::span<const cd> S) {
  GainResult r;
  const double nu = std::max(norm2(S), kDensityEps);
  r.gains.assign(S.size(), 1.0 / (2.0 * nu));
  return r;
}

// Three-layer gain network. theta1 maps the feature vector
// [log |Sbar|^2 ; log ||S|| ; h ; 1] to alpha, theta2 maps [alpha ; 1] to
// beta, theta3 maps [beta ; 1] to gamma; both hidden layers are tanh.
// The score is softplus(gamma) (.) Sbar, so the per-bin gain carries the
// 1/||S|| of the normalization: gains = softplus(gamma) / max(||S||, eps).
// For recurrent models the hidden state is the leading slice of alpha.
struct NnWeights {
  int k = 0;        // frequency bins
  int hidden = 0;   // 0 for the feedforward model
  RealMat theta1;   // [width1 x (k + 2 + hidden)]
  RealMat theta2;   // [width2 x (width1 + 1)]
  RealMat theta3;   // [k x (width2 + 1)]

  int width1() const { return theta1.rows; }
  int width2() const { return theta2.rows; }
  int feature_dim() const { return k + 2 + hidden; }

  void validate() const {
    require(k > 0, "weights: bin count must be positive");
    require(hidden >= 0 && hidden <= 512 && hidden <= width1(),
            "weights: hidden size out of range");
    require(theta1.cols == feature_dim(), "weights: theta1 shape mismatch");
    require(theta2.cols == width1() + 1, "weights: theta2 shape mismatch");
    require(theta3.rows == k && theta3.cols == width2() + 1,
            "weights: theta3 shape mismatch");
  }

  size_t parameter_count() const {
    return theta1.a.size() + theta2.a.size() + theta3.a.size();
  }
};

// Entries i.i.d. normal with deviation 1/sqrt(fan-in), per layer.
inline NnWeights init_weights(int k, int width1, int width2, int hidden,
                              Rng& rng) {
  NnWeights w;
  w.k = k;
  w.hidden = hidden;
  w.theta1 = RealMat(width1, k + 2 + hidden);
  w.theta2 = RealMat(width2, width1 + 1);
  w.theta3 = RealMat(k, width2 + 1);
  for (RealMat* m : {&w.theta1, &w.theta2, &w.theta3}) {
    const double s = 1.0 / std::sqrt(static_cast<double>(m->cols));
    for (double& v : m->a) v = s * rng.normal();
  }
  w.validate();
  return w;
}

inline double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// Forward intermediates, retained when a caller needs to differentiate
// through the network.
struct NnTrace {
  double nu = 0.0;     // max(||S||, eps)
  double raw_norm = 0.0;
  std::vector<double> features;
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;
};

inline GainResult nn_gains(std::span<const cd> S, std::span<const double> h,
                           const NnWeights& w, NnTrace* trace = nullptr) {
  require(static_cast<int>(S.size()) == w.k, "nn_gains: bin count mismatch");
  require(static_cast<int>(h.size()) == w.hidden,
          "nn_gains: hidden size mismatch");

  const double raw_norm = norm2(S);
  const double nu = std::max(raw_norm, kDensityEps);

  std::vector<double> u(w.feature_dim());
  for (int i = 0; i < w.k; ++i)
    u[i] = std::log(std::norm(S[i] / nu) + kDensityEps);
  u[w.k] = std::log(nu);
  for (int i = 0; i < w.hidden; ++i) u[w.k + 1 + i] = h[i];
  u[w.feature_dim() - 1] = 1.0;

  std::vector<double> alpha(w.width1());
  mat_apply(w.theta1, u, alpha);
  for (double& v : alpha) v = std::tanh(v);

  std::vector<double> a1(alpha);
  a1.push_back(1.0);
  std::vector<double> beta(w.width2());
  mat_apply(w.theta2, a1, beta);
  for (double& v : beta) v = std::tanh(v);

  std::vector<double> b1(beta);
  b1.push_back(1.0);
  std::vector<double> gamma(w.k);
  mat_apply(w.theta3, b1, gamma);

  GainResult r;
  r.gains.resize(w.k);
  for (int i = 0; i < w.k; ++i) r.gains[i] = softplus(gamma[i]) / nu;
  r.hidden_next.assign(alpha.begin(), alpha.begin() + w.hidden);

  if (trace) {
    trace->nu = nu;
    trace->raw_norm = raw_norm;
    trace->features = std::move(u);
    trace->alpha = std::move(alpha);
    trace->beta = std::move(beta);
    trace->gamma = std::move(gamma);
  }
  return r;
}

// Score vector of the modeled density: gains (.) S, element-wise.
inline std::vector<cd> score(std::span<const cd> S, const GainResult& g) {
  require(S.size() == g.gains.size(), "score: length mismatch");
  std::vector<cd> out(S.size());
  for (size_t i = 0; i < S.size(); ++i) out[i] = g.gains[i] * S[i];
  return out;
}

enum class DensityKind { laplace, neural };

struct DensityModel {
  DensityKind kind = DensityKind::laplace;
  NnWeights weights;

  static DensityModel laplace() { return DensityModel{}; }
  static DensityModel neural(NnWeights w) {
    w.validate();
    return DensityModel{DensityKind::neural, std::move(w)};
  }

  int hidden_dim() const {
    return kind == DensityKind::neural ? weights.hidden : 0;
  }

  GainResult gains(std::span<const cd> S, std::span<const double> h,
                   NnTrace* trace = nullptr) const {
    if (kind == DensityKind::laplace) return laplace_gains(S);
    return nn_gains(S, h, weights, trace);
  }
};

// ---- weight persistence -------------------------------------------------

// Weight files carry the bin count, the hidden size (0 or 128 only) and the
// three layer matrices. dtype f32 is the interchange format; f64 is used by
// training checkpoints.
inline void save_weights(const NnWeights& w, const std::string& path,
                         bool f64 = false) {
  w.validate();
  require(w.hidden == 0 || w.hidden == 128,
          "weights file: hidden size must be 0 or 128");
  TensorFile tf;
  tf.meta.emplace_back("k", std::to_string(w.k));
  tf.meta.emplace_back("hidden", std::to_string(w.hidden));
  for (const auto& [name, m] : {std::pair<const char*, const RealMat*>{
                                    "theta1", &w.theta1},
                                {"theta2", &w.theta2},
                                {"theta3", &w.theta3}}) {
    TensorEntry t;
    t.name = name;
    t.f64 = f64;
    t.dims = {m->rows, m->cols};
    t.data = m->a;
    tf.tensors.push_back(std::move(t));
  }
  write_tensor_file(path, tf);
}

inline NnWeights load_weights(const std::string& path) {
  const TensorFile tf = read_tensor_file(path);
  NnWeights w;
  w.k = static_cast<int>(tf.meta_int("k"));
  w.hidden = static_cast<int>(tf.meta_int("hidden"));
  if (w.hidden != 0 && w.hidden != 128)
    throw format_error("weights file: hidden size must be 0 or 128");
  if (w.k <= 0) throw format_error("weights file: bad bin count");

  auto take = [&](const char* name) {
    const TensorEntry* t = tf.find(name);
    if (!t || t->dims.size() != 2)
      throw format_error(std::string("weights file: missing tensor ") + name);
    RealMat m(static_cast<int>(t->dims[0]), static_cast<int>(t->dims[1]));
    m.a = t->data;
    if (!m.finite())
      throw format_error(std::string("weights file: non-finite entries in ") +
                         name);
    return m;
  };
  w.theta1 = take("theta1");
  w.theta2 = take("theta2");
  w.theta3 = take("theta3");
  try {
    w.validate();
  } catch (const std::invalid_argument& e) {
    throw format_error(std::string("weights file: ") + e.what());
  }
  return w;
}

}  // namespace iva

#endif  // IVA_DENSITY_HPP
