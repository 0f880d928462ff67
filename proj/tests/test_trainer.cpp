// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "iva/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "iva/optimizer.hpp"
#include "iva/rng.hpp"
#include "iva/wav.hpp"
#include "testutil.hpp"

using iva::DensityModel;
using iva::NnWeights;
using iva::RolloutResult;
using iva::RolloutTrace;
using iva::SeparationState;
using iva::Signal;

namespace {

struct TinySetup {
  static constexpr int kBins = 9, kFrame = 16, kHop = 4, kN = 2, kT = 8;
  iva::WindowPair windows = iva::design_windows(kFrame, kHop);
  iva::MixingSystem system = iva::sample_random_system(kN, 123);
  Signal sources;

  explicit TinySetup(std::uint64_t seed = 42) {
    iva::Rng rng(seed);
    const size_t seg = (kT - 1) * kHop + kFrame + 2 * iva::kRandomTapHalfSpan;
    sources = testutil::make_sparse_sources(rng, kN, seg);
  }

  RolloutResult run(const DensityModel& model) const {
    SeparationState st =
        SeparationState::identity(kBins, kN, model.hidden_dim());
    return iva::rollout(system, st, model, sources, kT, windows, 0.05);
  }
};

// |fd - analytic| <= rtol max(|fd|, |analytic|) + atol; the absolute floor
// absorbs the roundoff noise of central differences near zero.
void check_gradient(int hidden, int coords, std::uint64_t seed) {
  TinySetup setup;
  iva::Rng rng(seed);
  NnWeights theta = iva::init_weights(TinySetup::kBins, 16, 16, hidden, rng);

  RolloutResult base = setup.run(DensityModel::neural(theta));
  ASSERT_TRUE(base.ok);
  EXPECT_GT(base.value, 0.0);
  EXPECT_LE(base.value, 1.0);

  std::vector<RolloutTrace> traces;
  traces.push_back(std::move(base.trace));
  const auto grad = iva::gradient_flat(iva::gradient(theta, traces, true));
  const auto flat = iva::weights_flat(theta);

  iva::Rng pick(seed + 1);
  const double h = 1e-5;
  for (int trial = 0; trial < coords; ++trial) {
    const size_t i = pick.uniform_int(flat.size());
    auto up = flat, down = flat;
    up[i] += h;
    down[i] -= h;
    NnWeights wu = theta, wd = theta;
    iva::weights_from_flat(wu, up);
    iva::weights_from_flat(wd, down);
    const double fd = (setup.run(DensityModel::neural(wu)).value -
                       setup.run(DensityModel::neural(wd)).value) /
                      (2.0 * h);
    const double tol = 1e-5 * std::max(std::abs(fd), std::abs(grad[i])) + 1e-10;
    EXPECT_NEAR(grad[i], fd, tol) << "coordinate " << i;
  }
}

TEST(Gradient, MatchesFiniteDifferencesFeedforward) {
  check_gradient(/*hidden=*/0, /*coords=*/40, 7);
}

TEST(Gradient, MatchesFiniteDifferencesRecurrent) {
  check_gradient(/*hidden=*/8, /*coords=*/40, 8);
}

TEST(Gradient, StepSizePathCanBeFrozen) {
  TinySetup setup;
  iva::Rng rng(9);
  NnWeights theta = iva::init_weights(TinySetup::kBins, 16, 16, 0, rng);
  RolloutResult r = setup.run(DensityModel::neural(theta));
  ASSERT_TRUE(r.ok);
  std::vector<RolloutTrace> traces;
  traces.push_back(std::move(r.trace));
  const auto full = iva::gradient_flat(iva::gradient(theta, traces, true));
  const auto frozen = iva::gradient_flat(iva::gradient(theta, traces, false));
  double diff = 0.0;
  for (size_t i = 0; i < full.size(); ++i)
    diff = std::max(diff, std::abs(full[i] - frozen[i]));
  EXPECT_GT(diff, 0.0);  // the step-size path carries real gradient
}

TEST(Gradient, ZeroLengthUnrollIsZero) {
  iva::Rng rng(10);
  NnWeights theta = iva::init_weights(9, 16, 16, 0, rng);
  SeparationState st = SeparationState::identity(9, 2, 0);
  const auto sys = iva::sample_random_system(2, 3);
  const auto windows = iva::design_windows(16, 4);
  Signal empty_sources(2);
  const RolloutResult r = iva::rollout(sys, st, DensityModel::neural(theta),
                                       empty_sources, 0, windows, 0.05);
  ASSERT_TRUE(r.ok);
  EXPECT_EQ(r.value, 0.0);
  std::vector<RolloutTrace> traces;
  traces.push_back(r.trace);
  const auto g = iva::gradient_flat(iva::gradient(theta, traces, true));
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, LaplaceRolloutHasNoParameterGradient) {
  TinySetup setup;
  iva::Rng rng(11);
  NnWeights theta = iva::init_weights(TinySetup::kBins, 16, 16, 0, rng);
  RolloutResult r = setup.run(DensityModel::laplace());
  ASSERT_TRUE(r.ok);
  std::vector<RolloutTrace> traces;
  traces.push_back(std::move(r.trace));
  const auto g = iva::gradient_flat(iva::gradient(theta, traces, true));
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Rollout, IdentityMixingScoresNearOne) {
  // identity mixing and identity matrices: outputs equal the references
  iva::MixingSystem sys;
  sys.kind = iva::MixingSystem::Kind::random_taps;
  sys.n = 2;
  sys.taps.assign(static_cast<size_t>(iva::kRandomTapCount) * 4, 0.0);
  for (int m = 0; m < 2; ++m)
    sys.taps[(static_cast<size_t>(iva::kRandomTapHalfSpan) * 2 + m) * 2 + m] =
        1.0;
  iva::Rng rng(12);
  const auto windows = iva::design_windows(16, 4);
  const int frames = 32;
  const size_t seg = (frames - 1) * 4 + 16 + 2 * iva::kRandomTapHalfSpan;
  const Signal src = testutil::make_sparse_sources(rng, 2, seg);
  SeparationState st = SeparationState::identity(9, 2, 0);
  iva::Rng wrng(13);
  NnWeights theta = iva::init_weights(9, 16, 16, 0, wrng);
  const RolloutResult r = iva::rollout(sys, st, DensityModel::neural(theta),
                                       src, frames, windows, 0.01);
  ASSERT_TRUE(r.ok);
  EXPECT_GT(r.value, 0.9);
}

TEST(Rollout, StatePersistsAcrossCalls) {
  TinySetup setup;
  iva::Rng rng(14);
  NnWeights theta = iva::init_weights(TinySetup::kBins, 16, 16, 0, rng);
  SeparationState st = SeparationState::identity(9, 2, 0);
  const DensityModel model = DensityModel::neural(theta);
  iva::rollout(setup.system, st, model, setup.sources, TinySetup::kT,
               setup.windows, 0.05);
  EXPECT_EQ(st.frame_index, TinySetup::kT);
  const auto w_after_first = st.W;
  iva::rollout(setup.system, st, model, setup.sources, TinySetup::kT,
               setup.windows, 0.05);
  EXPECT_EQ(st.frame_index, 2 * TinySetup::kT);
  EXPECT_NE(st.W, w_after_first);
}

TEST(Optimizers, AdamAndSgdMoveParameters) {
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g{0.1, -0.2, 0.3};
  auto adam = iva::make_optimizer("adam", 0.01);
  auto p2 = p;
  adam->update(p2, g);
  for (int i = 0; i < 3; ++i) EXPECT_NE(p2[i], p[i]);

  iva::SgdOptimizer sgd(0.5);
  auto p3 = p;
  sgd.update(p3, g);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p3[i], p[i] - 0.5 * g[i]);

  EXPECT_THROW(iva::make_optimizer("nope", 0.1), std::invalid_argument);
}

class TrainerEnd2End : public ::testing::Test {
 protected:
  void write_corpus(const std::string& dir, int files, size_t len,
                    std::uint64_t seed) {
    iva::Rng rng(seed);
    for (int i = 0; i < files; ++i) {
      iva::WavData w;
      w.sample_rate = 16000.0;
      w.channels = testutil::make_sparse_sources(rng, 1, len);
      iva::write_wav(dir + "/src_" + std::to_string(i) + ".wav", w,
                     iva::WavFormat::float32);
    }
  }

  iva::TrainConfig tiny_config() {
    iva::TrainConfig cfg;
    cfg.n_sources = 2;
    cfg.coherence_window = 8;
    cfg.batch_size = 2;
    cfg.iterations = 5;
    cfg.frame_size = 16;
    cfg.hop = 4;
    cfg.width1 = 12;
    cfg.width2 = 12;
    cfg.hidden = 0;
    cfg.seed = 5;
    return cfg;
  }
};

TEST_F(TrainerEnd2End, ZeroIterationsReturnInitialWeights) {
  testutil::TempDir dir("corpus");
  write_corpus(dir.path(), 2, 4000, 1);
  iva::WavCorpusSampler sampler(dir.path());
  iva::TrainConfig cfg = tiny_config();
  cfg.iterations = 0;
  const auto r = iva::train(cfg, sampler);
  EXPECT_TRUE(r.objective.empty());
  iva::Rng rng(cfg.seed);
  const NnWeights expected =
      iva::init_weights(cfg.bins(), cfg.width1, cfg.width2, cfg.hidden, rng);
  EXPECT_EQ(r.weights.theta1.a, expected.theta1.a);
}

TEST_F(TrainerEnd2End, FixedSeedIsBitReproducible) {
  testutil::TempDir dir("corpus");
  write_corpus(dir.path(), 3, 4000, 2);
  iva::WavCorpusSampler s1(dir.path()), s2(dir.path());
  const iva::TrainConfig cfg = tiny_config();
  const auto a = iva::train(cfg, s1);
  const auto b = iva::train(cfg, s2);
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.weights.theta1.a, b.weights.theta1.a);
  EXPECT_EQ(a.weights.theta3.a, b.weights.theta3.a);
  for (double v : a.objective) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST_F(TrainerEnd2End, LogsObjectiveCsv) {
  testutil::TempDir dir("corpus");
  write_corpus(dir.path(), 2, 4000, 3);
  iva::WavCorpusSampler sampler(dir.path());
  iva::TrainConfig cfg = tiny_config();
  cfg.log_csv = dir.file("log.csv");
  const auto r = iva::train(cfg, sampler);
  std::ifstream is(cfg.log_csv);
  ASSERT_TRUE(static_cast<bool>(is));
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "iteration,coherence");
  int rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, cfg.iterations);
  EXPECT_EQ(r.objective.size(), static_cast<size_t>(cfg.iterations));
}

TEST(CorpusSampler, RejectsSilenceAndEmptyDirs) {
  testutil::TempDir dir("corpus");
  EXPECT_THROW(iva::WavCorpusSampler bad(dir.path()), std::invalid_argument);

  iva::WavData silent;
  silent.sample_rate = 16000.0;
  silent.channels.assign(1, std::vector<double>(8000, 0.0));
  iva::write_wav(dir.file("silent.wav"), silent, iva::WavFormat::float32);
  iva::WavCorpusSampler sampler(dir.path());
  iva::Rng rng(1);
  EXPECT_THROW(sampler.sample(rng, 1, 1000), std::runtime_error);
}

TEST(CorpusSampler, SegmentsArePeakNormalized) {
  testutil::TempDir dir("corpus");
  iva::Rng gen(4);
  iva::WavData w;
  w.sample_rate = 16000.0;
  w.channels = testutil::make_sparse_sources(gen, 1, 20000);
  for (auto& v : w.channels[0]) v *= 0.1;  // quiet but not silent
  iva::write_wav(dir.file("quiet.wav"), w, iva::WavFormat::float32);

  iva::WavCorpusSampler sampler(dir.path());
  iva::Rng rng(2);
  const Signal seg = sampler.sample(rng, 2, 3000);
  for (const auto& ch : seg) {
    double peak = 0.0;
    for (double v : ch) peak = std::max(peak, std::abs(v));
    EXPECT_NEAR(peak, 1.0, 1e-12);
  }
}

}  // namespace
