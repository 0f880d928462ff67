// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Command-line front end: mixing simulation, online/batch separation,
// training, metric evaluation and numeric self-checks.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "iva/density.hpp"
#include "iva/metrics.hpp"
#include "iva/mixsim.hpp"
#include "iva/separator.hpp"
#include "iva/stft.hpp"
#include "iva/trainer.hpp"
#include "iva/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Removes files created by a failed command so no partial outputs remain.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) return;
    for (const auto& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  std::string track(const std::string& path) {
    paths_.push_back(path);
    return path;
  }
  void commit() { committed_ = true; }

 private:
  std::vector<std::string> paths_;
  bool committed_ = false;
};

iva::Signal load_mono_sources(const std::vector<std::string>& files,
                              double* sample_rate) {
  iva::require(!files.empty(), "no source files given");
  iva::Signal out;
  double rate = 0.0;
  for (const auto& f : files) {
    iva::WavData w = iva::read_wav(f);
    iva::require(w.channels.size() == 1, "source file is not mono: " + f);
    if (rate == 0.0) rate = w.sample_rate;
    iva::require(w.sample_rate == rate, "sample-rate mismatch: " + f);
    out.push_back(std::move(w.channels[0]));
  }
  const size_t len = out[0].size();
  for (auto& ch : out) ch.resize(len, 0.0);  // pad shorter files with zeros
  *sample_rate = rate;
  return out;
}

void write_mono(const std::string& path, const std::vector<double>& x,
                double rate) {
  iva::WavData w;
  w.sample_rate = rate;
  w.channels.push_back(x);
  iva::write_wav(path, w, iva::WavFormat::float32);
}

// ---- mix -------------------------------------------------------------------

struct MixArgs {
  std::string system = "random-taps";
  std::vector<std::string> sources;
  std::string rir_file;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
};

int cmd_mix(const MixArgs& a) {
  double rate = 0.0;
  iva::Signal sources = load_mono_sources(a.sources, &rate);
  const int n = static_cast<int>(sources.size());

  iva::MixingSystem sys;
  if (a.system == "random-taps") {
    sys = iva::sample_random_system(n, a.seed);
  } else if (a.system == "butterworth") {
    iva::require(n == 2, "butterworth mixing is a 2x2 system");
    sys = iva::butterworth_system();
  } else if (a.system == "rir") {
    iva::require(!a.rir_file.empty(), "rir mixing needs --rir-file");
    sys = iva::load_rir_bank(a.rir_file);
    iva::require(sys.n == n, "rir bank channel count does not match sources");
  } else {
    throw std::invalid_argument("unknown mixing system: " + a.system);
  }

  const iva::MixResult mixed = iva::mix(sys, sources);
  fs::create_directories(a.out_dir);
  OutputGuard guard;

  json manifest;
  manifest["system"] = a.system;
  manifest["seed"] = a.seed;
  manifest["sample_rate"] = rate;
  manifest["n"] = n;
  for (int m = 0; m < n; ++m) {
    const std::string name = "mix_" + std::to_string(m + 1) + ".wav";
    write_mono(guard.track(a.out_dir + "/" + name), mixed.mixtures[m], rate);
    manifest["mixtures"].push_back(name);
  }
  for (int s = 0; s < n; ++s) {
    json row = json::array();
    for (int m = 0; m < n; ++m) {
      const std::string name = "img_s" + std::to_string(s + 1) + "_m" +
                               std::to_string(m + 1) + ".wav";
      write_mono(guard.track(a.out_dir + "/" + name), mixed.images[s][m],
                 rate);
      row.push_back(name);
    }
    manifest["images"].push_back(row);
  }
  {
    std::ofstream os(guard.track(a.out_dir + "/manifest.json"));
    iva::require(static_cast<bool>(os), "cannot write manifest");
    os << manifest.dump(2) << '\n';
  }
  guard.commit();
  std::cout << "wrote " << n << " mixtures and " << n * n << " images to "
            << a.out_dir << "\n";
  return 0;
}

// ---- separate ----------------------------------------------------------------

struct SeparateArgs {
  std::string mode = "online";
  std::string model = "laplace";
  std::string weights;
  std::vector<std::string> inputs;
  std::string out_dir = ".";
  double mu0 = 0.03;
  int epochs = 10;
  double mu_start = 0.1;
  double mu_end = 0.01;
  int iterations_per_epoch = 0;  // 0: one sweep worth of frames
  int frame_size = 512;
  int hop = 160;
  std::uint64_t seed = 0;
  std::string ref_manifest;
  std::string metrics_csv;
  int eval_interval = 0;
  bool hf_emph = false;
  bool dump_contrib = false;
};

// Passes each source's image signals through the frozen separator; by
// linearity this decomposes every output into exact per-source parts.
std::vector<iva::Signal> decompose_outputs(
    const std::vector<iva::Signal>& images, const std::vector<iva::cd>& W,
    const iva::WindowPair& windows, int bins, double rate) {
  const int n = static_cast<int>(images.size());
  std::vector<iva::Signal> contrib(
      n, iva::Signal(n));  // [output][source][sample]
  for (int s = 0; s < n; ++s) {
    iva::Spectrogram spec = iva::stft(images[s], windows, rate);
    iva::Spectrogram sep = spec;
    for (int t = 0; t < spec.frames; ++t)
      for (int k = 0; k < bins; ++k) {
        const iva::cd* w = W.data() + static_cast<size_t>(k) * n * n;
        for (int i = 0; i < n; ++i) {
          iva::cd acc = 0.0;
          for (int j = 0; j < n; ++j)
            acc += w[static_cast<size_t>(i) * n + j] * spec.at(j, k, t);
          sep.at(i, k, t) = acc;
        }
      }
    iva::Signal y = iva::istft(sep, windows);
    for (int m = 0; m < n; ++m) contrib[m][s] = std::move(y[m]);
  }
  return contrib;
}

iva::SirReport snapshot_sir(const std::vector<iva::Signal>& images,
                            const std::vector<iva::cd>& W_raw,
                            const iva::WindowPair& windows, int bins, int n,
                            double rate, bool hf) {
  const std::vector<iva::cd> W = iva::resolve_scaling(W_raw, bins, n);
  std::vector<iva::Signal> contrib =
      decompose_outputs(images, W, windows, bins, rate);
  if (hf)
    for (auto& row : contrib)
      for (auto& sig : row) sig = iva::hf_emphasis(sig);
  return iva::sir(contrib);
}

int cmd_separate(const SeparateArgs& a) {
  iva::require(a.mode == "online" || a.mode == "batch",
               "mode must be online or batch");
  iva::require(a.model == "laplace" || a.model == "fnn" || a.model == "rnn",
               "model must be laplace, fnn or rnn");
  iva::require(!(a.mode == "batch" && a.model == "rnn"),
               "recurrent models cannot be used in batch mode");

  iva::DensityModel model = iva::DensityModel::laplace();
  if (a.model != "laplace") {
    iva::require(!a.weights.empty(), "--weights is required for " + a.model);
    iva::NnWeights w = iva::load_weights(a.weights);
    if (a.model == "fnn")
      iva::require(w.hidden == 0, "fnn weights must have hidden size 0");
    else
      iva::require(w.hidden > 0, "rnn weights must have a hidden state");
    model = iva::DensityModel::neural(std::move(w));
  }

  double rate = 0.0;
  iva::Signal mixture = load_mono_sources(a.inputs, &rate);
  const int n = static_cast<int>(mixture.size());
  iva::require(n >= 2, "need at least two input channels");

  const iva::WindowPair windows = iva::design_windows(a.frame_size, a.hop);
  const iva::Spectrogram spec = iva::stft(mixture, windows, rate);
  const int bins = spec.bins;
  if (a.model != "laplace")
    iva::require(model.weights.k == bins,
                 "weights were built for a different frame size");

  // optional reference images for SIR curves
  std::vector<iva::Signal> images;
  if (!a.ref_manifest.empty()) {
    std::ifstream is(a.ref_manifest);
    iva::require(static_cast<bool>(is),
                 "cannot open manifest: " + a.ref_manifest);
    json manifest = json::parse(is);
    const fs::path base = fs::path(a.ref_manifest).parent_path();
    iva::require(static_cast<int>(manifest["n"]) == n,
                 "manifest channel count does not match inputs");
    for (const auto& row : manifest["images"]) {
      iva::Signal img;
      double r2 = 0.0;
      std::vector<std::string> paths;
      for (const auto& p : row)
        paths.push_back((base / p.get<std::string>()).string());
      img = load_mono_sources(paths, &r2);
      iva::require(r2 == rate, "image sample rate differs from mixtures");
      images.push_back(std::move(img));
    }
  }

  std::vector<iva::WSnapshot> trajectory;
  std::vector<iva::cd> W_final;
  iva::Spectrogram outputs;

  if (a.mode == "online") {
    iva::StepControl control;
    control.mu0 = a.mu0;
    iva::SeparationState state =
        iva::SeparationState::identity(bins, n, model.hidden_dim());
    iva::OnlineOptions options;
    options.snapshot_interval = a.eval_interval;
    options.snapshot_final = true;
    iva::OnlineResult r =
        iva::online_separate(spec, model, control, state, options);
    trajectory = std::move(r.trajectory);
    W_final = state.W;
    outputs = std::move(r.outputs);
  } else {
    iva::StepControl control;
    control.mu0 = a.mu_start;
    control.linear_schedule = true;
    control.mu_start = a.mu_start;
    control.mu_end = a.mu_end;
    const int per_epoch =
        a.iterations_per_epoch > 0 ? a.iterations_per_epoch : spec.frames;
    iva::BatchResult r = iva::batch_separate(spec, model, control, a.epochs,
                                             per_epoch, a.seed);
    W_final = std::move(r.W);
    trajectory.push_back({static_cast<long>(spec.frames), W_final});
    outputs = std::move(r.outputs);
  }

  fs::create_directories(a.out_dir);
  OutputGuard guard;

  // scaling-resolved output signals
  const std::vector<iva::cd> W_res = iva::resolve_scaling(W_final, bins, n);
  iva::Spectrogram resolved = spec;
  for (int t = 0; t < spec.frames; ++t)
    for (int k = 0; k < bins; ++k) {
      const iva::cd* w = W_res.data() + static_cast<size_t>(k) * n * n;
      for (int i = 0; i < n; ++i) {
        iva::cd acc = 0.0;
        for (int j = 0; j < n; ++j)
          acc += w[static_cast<size_t>(i) * n + j] * spec.at(j, k, t);
        resolved.at(i, k, t) = acc;
      }
    }
  iva::Signal separated = iva::istft(resolved, windows);
  for (int i = 0; i < n; ++i)
    write_mono(guard.track(a.out_dir + "/out_" + std::to_string(i + 1) +
                           ".wav"),
               separated[i], rate);

  if (!images.empty() && !a.metrics_csv.empty()) {
    std::ofstream csv(guard.track(a.metrics_csv));
    iva::require(static_cast<bool>(csv), "cannot write " + a.metrics_csv);
    csv << "frame";
    for (int s = 0; s < n; ++s) csv << ",sir_" << (s + 1);
    csv << ",mean_sir\n";
    for (const auto& snap : trajectory) {
      const iva::SirReport rep = snapshot_sir(images, snap.W, windows, bins,
                                              n, rate, a.hf_emph);
      csv << snap.frame_index;
      for (double v : rep.sir_db) csv << ',' << v;
      csv << ',' << rep.mean_db << '\n';
    }
  }

  if (a.dump_contrib) {
    iva::require(!images.empty(), "--dump-contrib needs --ref-manifest");
    std::vector<iva::Signal> contrib =
        decompose_outputs(images, W_res, windows, bins, rate);
    for (int m = 0; m < n; ++m)
      for (int s = 0; s < n; ++s)
        write_mono(guard.track(a.out_dir + "/contrib_o" +
                               std::to_string(m + 1) + "_s" +
                               std::to_string(s + 1) + ".wav"),
                   contrib[m][s], rate);
  }

  guard.commit();
  std::cout << "wrote " << n << " separated channels to " << a.out_dir
            << "\n";
  return 0;
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> outputs;
  std::vector<std::string> references;
  std::string metric = "coherence";
  bool hf_emph = false;
  std::string csv;
  int frame_size = 512;
  int hop = 160;
};

int cmd_evaluate(const EvaluateArgs& a) {
  std::ostringstream csv;
  if (a.metric == "coherence") {
    iva::require(!a.outputs.empty() &&
                     a.outputs.size() == a.references.size(),
                 "coherence needs matching --outputs and --references");
    double rate = 0.0, rate2 = 0.0;
    iva::Signal y = load_mono_sources(a.outputs, &rate);
    iva::Signal s = load_mono_sources(a.references, &rate2);
    iva::require(rate == rate2, "sample-rate mismatch between sets");
    const size_t len = std::min(y[0].size(), s[0].size());
    for (auto& ch : y) ch.resize(len);
    for (auto& ch : s) ch.resize(len);
    const iva::WindowPair windows = iva::design_windows(a.frame_size, a.hop);
    const iva::CoherenceReport rep = iva::coherence(
        iva::stft(y, windows, rate), iva::stft(s, windows, rate));
    csv << "index,coherence\n0," << rep.value << '\n';
  } else if (a.metric == "sir") {
    const size_t total = a.outputs.size();
    size_t n = 1;
    while (n * n < total) ++n;
    iva::require(n * n == total && n >= 1,
                 "sir needs n^2 contribution files (output-major order)");
    double rate = 0.0;
    iva::Signal flat = load_mono_sources(a.outputs, &rate);
    std::vector<iva::Signal> contrib(n, iva::Signal(n));
    for (size_t m = 0; m < n; ++m)
      for (size_t s = 0; s < n; ++s) {
        auto& sig = flat[m * n + s];
        contrib[m][s] = a.hf_emph ? iva::hf_emphasis(sig) : std::move(sig);
      }
    const iva::SirReport rep = iva::sir(contrib);
    csv << "index";
    for (size_t s = 0; s < n; ++s) csv << ",sir_" << (s + 1);
    csv << ",mean_sir\n0";
    for (double v : rep.sir_db) csv << ',' << v;
    csv << ',' << rep.mean_db << '\n';
  } else {
    throw std::invalid_argument("metric must be sir or coherence");
  }

  std::cout << csv.str();
  if (!a.csv.empty()) {
    OutputGuard guard;
    std::ofstream os(guard.track(a.csv));
    iva::require(static_cast<bool>(os), "cannot write " + a.csv);
    os << csv.str();
    guard.commit();
  }
  return 0;
}

// ---- train --------------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string out;
  std::string config_file;
  iva::TrainConfig cfg;
};

void apply_config_file(const std::string& path, iva::TrainConfig& cfg) {
  std::ifstream is(path);
  iva::require(static_cast<bool>(is), "cannot open config: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    try {
      if (key == "n_sources") cfg.n_sources = std::stoi(value);
      else if (key == "coherence_window") cfg.coherence_window = std::stoi(value);
      else if (key == "mu0") cfg.mu0 = std::stod(value);
      else if (key == "reset_probability") cfg.reset_probability = std::stod(value);
      else if (key == "batch_size") cfg.batch_size = std::stoi(value);
      else if (key == "iterations") cfg.iterations = std::stoi(value);
      else if (key == "optimizer_step") cfg.optimizer_step = std::stod(value);
      else if (key == "optimizer") cfg.optimizer = value;
      else if (key == "seed") cfg.seed = std::stoull(value);
      else if (key == "frame_size") cfg.frame_size = std::stoi(value);
      else if (key == "hop") cfg.hop = std::stoi(value);
      else if (key == "width1") cfg.width1 = std::stoi(value);
      else if (key == "width2") cfg.width2 = std::stoi(value);
      else if (key == "hidden") cfg.hidden = std::stoi(value);
      else if (key == "sample_rate") cfg.sample_rate = std::stod(value);
      else if (key == "differentiate_step_size")
        cfg.differentiate_step_size = value == "1" || value == "true";
      else if (key == "threads") cfg.threads = std::stoi(value);
      else if (key == "log_csv") cfg.log_csv = value;
      else if (key == "checkpoint_path") cfg.checkpoint_path = value;
      else if (key == "checkpoint_interval") cfg.checkpoint_interval = std::stoi(value);
      else throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument("config " + path + " line " +
                                  std::to_string(lineno) + ": " + e.what());
    }
  }
}

int cmd_train(TrainArgs& a) {
  if (a.corpus.empty()) {
    const char* env = std::getenv("IVA_CORPUS");
    iva::require(env != nullptr && *env != '\0',
                 "--corpus or IVA_CORPUS is required");
    a.corpus = env;
  }
  iva::require(!a.out.empty(), "--out is required");
  iva::require(a.cfg.hidden == 0 || a.cfg.hidden == 128,
               "weight files accept hidden sizes 0 or 128 only");
  iva::WavCorpusSampler sampler(a.corpus);
  const iva::TrainResult result = iva::train(a.cfg, sampler);
  OutputGuard guard;
  iva::save_weights(result.weights, guard.track(a.out), /*f64=*/false);
  guard.commit();
  const double last = result.objective.empty() ? 0.0
                                               : result.objective.back();
  std::cout << "trained " << a.cfg.iterations
            << " iterations, final batch coherence " << last << ", wrote "
            << a.out << "\n";
  return 0;
}

// ---- self checks ----------------------------------------------------------------

int cmd_windows_check(int frame_size, int hop) {
  const iva::WindowPair w = iva::design_windows(frame_size, hop);
  const double residual = iva::reconstruction_residual(w);
  std::cout << "frame=" << frame_size << " hop=" << hop
            << " pr_residual=" << residual << "\n";
  return residual < 1e-10 ? 0 : 2;
}

int cmd_norm_bench(int trials, int max_n, std::uint64_t seed) {
  iva::Rng rng(seed);
  int violations = 0;
  double max_gap = 0.0, sum_gap = 0.0, max_tight_err = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(max_n));
    std::vector<iva::cd> a(n), b(n);
    for (auto& v : a) v = 2.0 * rng.complex_normal();
    for (auto& v : b) v = 2.0 * rng.complex_normal();
    const auto e = iva::spectral_norm_rank1(a, b);
    if (e.exact < 1.0 - 1e-12 || e.cheap < e.exact - 1e-12) ++violations;
    max_gap = std::max(max_gap, e.cheap - e.exact);
    sum_gap += e.cheap - e.exact;

    // rescale b so a^H b = 1; the cheap estimate is exact there
    iva::cd inner = 0.0;
    for (int i = 0; i < n; ++i) inner += std::conj(a[i]) * b[i];
    if (std::abs(inner) > 1e-6) {
      std::vector<iva::cd> b1 = b;
      for (auto& v : b1) v /= inner;
      const auto t = iva::spectral_norm_rank1(a, b1);
      max_tight_err = std::max(max_tight_err, std::abs(t.cheap - t.exact));
    }
  }
  std::cout << "trials=" << trials << " violations=" << violations
            << " max_overestimate=" << max_gap
            << " mean_overestimate=" << sum_gap / trials
            << " max_error_at_unit_inner=" << max_tight_err << "\n";
  return violations == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frequency-domain IVA toolkit"};
  app.require_subcommand(1);

  MixArgs mix_args;
  auto* mix_cmd = app.add_subcommand("mix", "simulate a convolutive mixture");
  mix_cmd->add_option("--system", mix_args.system,
                      "random-taps | butterworth | rir");
  mix_cmd->add_option("--sources", mix_args.sources, "mono source WAVs")
      ->required();
  mix_cmd->add_option("--rir-file", mix_args.rir_file, "impulse response bank");
  mix_cmd->add_option("--seed", mix_args.seed, "random-taps seed");
  mix_cmd->add_option("--out-dir", mix_args.out_dir, "output directory");

  SeparateArgs sep_args;
  auto* sep_cmd = app.add_subcommand("separate", "separate a mixture");
  sep_cmd->add_option("--mode", sep_args.mode, "online | batch");
  sep_cmd->add_option("--model", sep_args.model, "laplace | fnn | rnn");
  sep_cmd->add_option("--weights", sep_args.weights, "gain network weights");
  sep_cmd->add_option("--in", sep_args.inputs, "mixture WAVs (one per mic)")
      ->required();
  sep_cmd->add_option("--out-dir", sep_args.out_dir, "output directory");
  sep_cmd->add_option("--mu0", sep_args.mu0, "online normalized step size");
  sep_cmd->add_option("--epochs", sep_args.epochs, "batch epochs");
  sep_cmd->add_option("--mu-start", sep_args.mu_start, "batch schedule start");
  sep_cmd->add_option("--mu-end", sep_args.mu_end, "batch schedule end");
  sep_cmd->add_option("--iterations-per-epoch", sep_args.iterations_per_epoch,
                      "frames visited per epoch (default: frame count)");
  sep_cmd->add_option("--frame-size", sep_args.frame_size, "STFT frame size");
  sep_cmd->add_option("--hop", sep_args.hop, "STFT hop size");
  sep_cmd->add_option("--seed", sep_args.seed, "batch frame-sampling seed");
  sep_cmd->add_option("--ref-manifest", sep_args.ref_manifest,
                      "mix manifest with per-source images");
  sep_cmd->add_option("--metrics-csv", sep_args.metrics_csv,
                      "write SIR evaluations here");
  sep_cmd->add_option("--eval-interval", sep_args.eval_interval,
                      "frames between SIR evaluations (online)");
  sep_cmd->add_flag("--hf-emphasis", sep_args.hf_emph,
                    "1 - z^-1 before SIR evaluation");
  sep_cmd->add_flag("--dump-contrib", sep_args.dump_contrib,
                    "write per-source contribution WAVs");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "compute metrics from WAVs");
  eval_cmd->add_option("--outputs", eval_args.outputs,
                       "separated outputs (coherence) or n^2 contribution "
                       "files in output-major order (sir)")
      ->required();
  eval_cmd->add_option("--references", eval_args.references,
                       "reference sources (coherence)");
  eval_cmd->add_option("--metric", eval_args.metric, "sir | coherence");
  eval_cmd->add_flag("--hf-emphasis", eval_args.hf_emph,
                     "1 - z^-1 before SIR");
  eval_cmd->add_option("--csv", eval_args.csv, "also write the CSV here");
  eval_cmd->add_option("--frame-size", eval_args.frame_size, "STFT frame");
  eval_cmd->add_option("--hop", eval_args.hop, "STFT hop");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "fit gain-network weights");
  train_cmd->add_option("--corpus", train_args.corpus,
                        "directory of source WAVs (or IVA_CORPUS)");
  train_cmd->add_option("--out", train_args.out, "output weights file")
      ->required();
  train_cmd->add_option("--config", train_args.config_file,
                        "key = value config file");
  auto& cfg = train_args.cfg;
  train_cmd->add_option("--iterations", cfg.iterations, "training iterations");
  train_cmd->add_option("--batch-size", cfg.batch_size, "simulation lanes");
  train_cmd->add_option("--n-sources", cfg.n_sources, "sources per mixture");
  train_cmd->add_option("--frame-size", cfg.frame_size, "STFT frame size");
  train_cmd->add_option("--hop", cfg.hop, "STFT hop size");
  train_cmd->add_option("--width1", cfg.width1, "first layer width");
  train_cmd->add_option("--width2", cfg.width2, "second layer width");
  train_cmd->add_option("--hidden", cfg.hidden, "hidden state size (0 or 128)");
  train_cmd->add_option("--coherence-window", cfg.coherence_window,
                        "frames per rollout");
  train_cmd->add_option("--mu0", cfg.mu0, "separator step size");
  train_cmd->add_option("--reset-prob", cfg.reset_probability,
                        "lane reset probability");
  train_cmd->add_option("--step", cfg.optimizer_step, "optimizer step size");
  train_cmd->add_option("--optimizer", cfg.optimizer, "adam | sgd");
  train_cmd->add_option("--seed", cfg.seed, "training seed");
  train_cmd->add_option("--sample-rate", cfg.sample_rate, "corpus sample rate");
  train_cmd->add_option("--threads", cfg.threads, "parallel lanes");
  train_cmd->add_option("--log-csv", cfg.log_csv, "objective log CSV");
  train_cmd->add_option("--checkpoint", cfg.checkpoint_path,
                        "periodic checkpoint file");
  train_cmd->add_option("--checkpoint-interval", cfg.checkpoint_interval,
                        "iterations between checkpoints");
  bool no_mu_grad = false;
  train_cmd->add_flag("--no-step-gradient", no_mu_grad,
                      "treat the normalized step size as constant");

  int wc_frame = 512, wc_hop = 160;
  auto* wc_cmd =
      app.add_subcommand("windows-check", "verify perfect reconstruction");
  wc_cmd->add_option("--frame-size", wc_frame, "frame size");
  wc_cmd->add_option("--hop", wc_hop, "hop size");

  int nb_trials = 10000, nb_max_n = 8;
  std::uint64_t nb_seed = 0;
  auto* nb_cmd = app.add_subcommand(
      "norm-bench", "compare exact and cheap rank-one spectral norms");
  nb_cmd->add_option("--trials", nb_trials, "random trials");
  nb_cmd->add_option("--max-n", nb_max_n, "maximum vector length");
  nb_cmd->add_option("--seed", nb_seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mix_cmd->parsed()) return cmd_mix(mix_args);
    if (sep_cmd->parsed()) return cmd_separate(sep_args);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
    if (train_cmd->parsed()) {
      if (!train_args.config_file.empty()) {
        // command-line flags win over config-file values
        iva::TrainConfig merged;
        apply_config_file(train_args.config_file, merged);
        auto passed = [&](const std::string& name) {
          return train_cmd->get_option(name)->count() > 0;
        };
        if (passed("--iterations")) merged.iterations = cfg.iterations;
        if (passed("--batch-size")) merged.batch_size = cfg.batch_size;
        if (passed("--n-sources")) merged.n_sources = cfg.n_sources;
        if (passed("--frame-size")) merged.frame_size = cfg.frame_size;
        if (passed("--hop")) merged.hop = cfg.hop;
        if (passed("--width1")) merged.width1 = cfg.width1;
        if (passed("--width2")) merged.width2 = cfg.width2;
        if (passed("--hidden")) merged.hidden = cfg.hidden;
        if (passed("--coherence-window"))
          merged.coherence_window = cfg.coherence_window;
        if (passed("--mu0")) merged.mu0 = cfg.mu0;
        if (passed("--reset-prob"))
          merged.reset_probability = cfg.reset_probability;
        if (passed("--step")) merged.optimizer_step = cfg.optimizer_step;
        if (passed("--optimizer")) merged.optimizer = cfg.optimizer;
        if (passed("--seed")) merged.seed = cfg.seed;
        if (passed("--sample-rate")) merged.sample_rate = cfg.sample_rate;
        if (passed("--threads")) merged.threads = cfg.threads;
        if (passed("--log-csv")) merged.log_csv = cfg.log_csv;
        if (passed("--checkpoint")) merged.checkpoint_path = cfg.checkpoint_path;
        if (passed("--checkpoint-interval"))
          merged.checkpoint_interval = cfg.checkpoint_interval;
        train_args.cfg = merged;
      }
      if (no_mu_grad) train_args.cfg.differentiate_step_size = false;
      return cmd_train(train_args);
    }
    if (wc_cmd->parsed()) return cmd_windows_check(wc_frame, wc_hop);
    if (nb_cmd->parsed()) return cmd_norm_bench(nb_trials, nb_max_n, nb_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
