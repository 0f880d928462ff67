// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Drives the installed binary end to end; needs IVA_CLI in the environment.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "iva/density.hpp"
#include "iva/rng.hpp"
#include "iva/wav.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using testutil::run_cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!testutil::have_cli()) GTEST_SKIP() << "IVA_CLI not set";
  }

  // two short sparse sources on disk
  void write_sources(const testutil::TempDir& dir, int n, size_t len,
                     std::uint64_t seed) {
    iva::Rng rng(seed);
    const iva::Signal s = testutil::make_sparse_sources(rng, n, len);
    for (int i = 0; i < n; ++i) {
      iva::WavData w;
      w.sample_rate = 16000.0;
      w.channels.push_back(s[i]);
      iva::write_wav(dir.file("s" + std::to_string(i + 1) + ".wav"), w,
                     iva::WavFormat::float32);
    }
  }

  static std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)),
                       std::istreambuf_iterator<char>());
  }
};

TEST_F(CliTest, WindowsCheckPasses) {
  EXPECT_EQ(run_cli("windows-check --frame-size 512 --hop 160"), 0);
  EXPECT_EQ(run_cli("windows-check --frame-size 64 --hop 48"), 0);
  EXPECT_NE(run_cli("windows-check --frame-size 100 --hop 10"), 0);
}

TEST_F(CliTest, NormBenchPasses) {
  EXPECT_EQ(run_cli("norm-bench --trials 500 --max-n 6 --seed 3"), 0);
}

TEST_F(CliTest, MixButterworthWritesFiles) {
  testutil::TempDir dir("cli");
  write_sources(dir, 2, 4000, 1);
  ASSERT_EQ(run_cli("mix --system butterworth --sources " + dir.file("s1.wav") +
                    " " + dir.file("s2.wav") + " --out-dir " + dir.path()),
            0);
  EXPECT_TRUE(fs::exists(dir.file("mix_1.wav")));
  EXPECT_TRUE(fs::exists(dir.file("mix_2.wav")));
  EXPECT_TRUE(fs::exists(dir.file("img_s1_m1.wav")));
  EXPECT_TRUE(fs::exists(dir.file("img_s2_m2.wav")));
  EXPECT_TRUE(fs::exists(dir.file("manifest.json")));
}

TEST_F(CliTest, MixButterworthRejectsThreeSources) {
  testutil::TempDir dir("cli");
  write_sources(dir, 3, 2000, 2);
  EXPECT_NE(run_cli("mix --system butterworth --sources " + dir.file("s1.wav") +
                    " " + dir.file("s2.wav") + " " + dir.file("s3.wav") +
                    " --out-dir " + dir.path()),
            0);
}

TEST_F(CliTest, MixRandomTapsIsSeedDeterministic) {
  testutil::TempDir dir("cli");
  write_sources(dir, 2, 3000, 3);
  const std::string srcs =
      " --sources " + dir.file("s1.wav") + " " + dir.file("s2.wav");
  ASSERT_EQ(run_cli("mix --system random-taps --seed 11" + srcs +
                    " --out-dir " + dir.path() + "/a"),
            0);
  ASSERT_EQ(run_cli("mix --system random-taps --seed 11" + srcs +
                    " --out-dir " + dir.path() + "/b"),
            0);
  EXPECT_EQ(read_file(dir.path() + "/a/mix_1.wav"),
            read_file(dir.path() + "/b/mix_1.wav"));
  ASSERT_EQ(run_cli("mix --system random-taps --seed 12" + srcs +
                    " --out-dir " + dir.path() + "/c"),
            0);
  EXPECT_NE(read_file(dir.path() + "/a/mix_1.wav"),
            read_file(dir.path() + "/c/mix_1.wav"));
}

TEST_F(CliTest, SeparateOnlineLaplaceWritesOutputsAndMetrics) {
  testutil::TempDir dir("cli");
  write_sources(dir, 2, 16000, 4);
  ASSERT_EQ(run_cli("mix --system random-taps --seed 5 --sources " +
                    dir.file("s1.wav") + " " + dir.file("s2.wav") +
                    " --out-dir " + dir.path()),
            0);
  ASSERT_EQ(
      run_cli("separate --mode online --model laplace --mu0 0.03 --in " +
              dir.file("mix_1.wav") + " " + dir.file("mix_2.wav") +
              " --frame-size 256 --hop 64 --out-dir " + dir.path() +
              " --ref-manifest " + dir.file("manifest.json") +
              " --metrics-csv " + dir.file("metrics.csv") +
              " --eval-interval 50 --dump-contrib"),
      0);
  EXPECT_TRUE(fs::exists(dir.file("out_1.wav")));
  EXPECT_TRUE(fs::exists(dir.file("out_2.wav")));
  EXPECT_TRUE(fs::exists(dir.file("contrib_o1_s1.wav")));
  EXPECT_TRUE(fs::exists(dir.file("contrib_o2_s2.wav")));

  std::ifstream csv(dir.file("metrics.csv"));
  ASSERT_TRUE(static_cast<bool>(csv));
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "frame,sir_1,sir_2,mean_sir");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  EXPECT_GE(rows, 2);
}

TEST_F(CliTest, SeparateBatchRejectsRnn) {
  testutil::TempDir dir("cli");
  write_sources(dir, 2, 8000, 6);
  // recurrent weights for a 256-point frame (129 bins)
  iva::Rng rng(7);
  iva::NnWeights w = iva::init_weights(129, 130, 130, 128, rng);
  iva::save_weights(w, dir.file("rnn.ivaw"));
  ASSERT_EQ(run_cli("mix --system random-taps --seed 5 --sources " +
                    dir.file("s1.wav") + " " + dir.file("s2.wav") +
                    " --out-dir " + dir.path()),
            0);
  EXPECT_NE(run_cli("separate --mode batch --model rnn --weights " +
                    dir.file("rnn.ivaw") + " --in " + dir.file("mix_1.wav") +
                    " " + dir.file("mix_2.wav") + " --frame-size 256 --hop 64" +
                    " --out-dir " + dir.path()),
            0);
  // but online accepts it
  EXPECT_EQ(run_cli("separate --mode online --model rnn --weights " +
                    dir.file("rnn.ivaw") + " --in " + dir.file("mix_1.wav") +
                    " " + dir.file("mix_2.wav") + " --frame-size 256 --hop 64" +
                    " --out-dir " + dir.path() + "/rnn"),
            0);
}

TEST_F(CliTest, SeparateNeedsWeightsForNeuralModels) {
  testutil::TempDir dir("cli");
  write_sources(dir, 2, 8000, 8);
  EXPECT_NE(run_cli("separate --mode online --model fnn --in " +
                    dir.file("s1.wav") + " " + dir.file("s2.wav") +
                    " --out-dir " + dir.path()),
            0);
}

TEST_F(CliTest, EvaluateCoherenceOfIdenticalFilesIsOne) {
  testutil::TempDir dir("cli");
  write_sources(dir, 2, 16000, 9);
  const std::string files = dir.file("s1.wav") + " " + dir.file("s2.wav");
  ASSERT_EQ(run_cli("evaluate --metric coherence --outputs " + files +
                    " --references " + files + " --csv " + dir.file("c.csv")),
            0);
  std::ifstream csv(dir.file("c.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "index,coherence");
  const double v = std::stod(row.substr(row.find(',') + 1));
  EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST_F(CliTest, EvaluateSirFromContributions) {
  testutil::TempDir dir("cli");
  // perfect separation: out1 carries only s1, out2 only s2
  iva::Rng rng(10);
  const iva::Signal s = testutil::make_sparse_sources(rng, 2, 4000);
  auto save = [&](const std::string& name, const std::vector<double>& x) {
    iva::WavData w;
    w.sample_rate = 16000.0;
    w.channels.push_back(x);
    iva::write_wav(dir.file(name), w, iva::WavFormat::float32);
  };
  const std::vector<double> zero(4000, 0.0);
  save("c11.wav", s[0]);
  save("c12.wav", zero);
  save("c21.wav", zero);
  save("c22.wav", s[1]);
  ASSERT_EQ(run_cli("evaluate --metric sir --outputs " + dir.file("c11.wav") +
                    " " + dir.file("c12.wav") + " " + dir.file("c21.wav") +
                    " " + dir.file("c22.wav") + " --csv " + dir.file("s.csv")),
            0);
  std::ifstream csv(dir.file("s.csv"));
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_EQ(header, "index,sir_1,sir_2,mean_sir");
  EXPECT_NE(row.find("80"), std::string::npos);
}

TEST_F(CliTest, TrainTinyRunProducesLoadableWeights) {
  testutil::TempDir dir("cli");
  iva::Rng rng(11);
  for (int i = 0; i < 3; ++i) {
    iva::WavData w;
    w.sample_rate = 16000.0;
    w.channels = testutil::make_sparse_sources(rng, 1, 6000);
    iva::write_wav(dir.file("corpus_" + std::to_string(i) + ".wav"), w,
                   iva::WavFormat::float32);
  }
  ASSERT_EQ(run_cli("train --corpus " + dir.path() + " --out " +
                    dir.file("w.ivaw") + " --iterations 2 --batch-size 2" +
                    " --n-sources 2 --frame-size 16 --hop 4 --width1 8" +
                    " --width2 8 --coherence-window 8 --seed 3 --log-csv " +
                    dir.file("log.csv")),
            0);
  const iva::NnWeights w = iva::load_weights(dir.file("w.ivaw"));
  EXPECT_EQ(w.k, 9);
  EXPECT_EQ(w.hidden, 0);
  EXPECT_TRUE(fs::exists(dir.file("log.csv")));
}

TEST_F(CliTest, TrainConfigFileWithFlagOverride) {
  testutil::TempDir dir("cli");
  iva::Rng rng(12);
  iva::WavData w;
  w.sample_rate = 16000.0;
  w.channels = testutil::make_sparse_sources(rng, 1, 6000);
  iva::write_wav(dir.file("c.wav"), w, iva::WavFormat::float32);
  {
    std::ofstream cfg(dir.file("train.cfg"));
    cfg << "# tiny setup\n"
        << "iterations = 999\n"
        << "batch_size = 1\n"
        << "n_sources = 2\n"
        << "frame_size = 16\n"
        << "hop = 4\n"
        << "width1 = 8\nwidth2 = 8\n"
        << "coherence_window = 8\n";
  }
  // --iterations on the command line beats the config file
  ASSERT_EQ(run_cli("train --corpus " + dir.path() + " --out " +
                    dir.file("w.ivaw") + " --config " + dir.file("train.cfg") +
                    " --iterations 1"),
            0);
  EXPECT_TRUE(fs::exists(dir.file("w.ivaw")));
}

}  // namespace
