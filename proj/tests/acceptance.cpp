// Acceptance checks for the audio-visual quality estimator. Each criterion
// prints exactly one PASS/FAIL line; the process exits nonzero if any fail.
//
// The two corpus-level criteria shell out to the installed CLI binary the
// same way a user would drive it.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "avq/audio_features.hpp"
#include "avq/cv_harness.hpp"
#include "avq/distortion_lab.hpp"
#include "avq/fusion.hpp"
#include "avq/matrix.hpp"
#include "avq/media_io.hpp"
#include "avq/neural.hpp"
#include "avq/rng.hpp"
#include "avq/scoring.hpp"
#include "avq/visual_features.hpp"

#ifndef AVQ_CLI_PATH
#error "AVQ_CLI_PATH must point at the avq binary"
#endif

namespace {

namespace fs = std::filesystem;

int g_passed = 0;
int g_failed = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  (ok ? g_passed : g_failed) += 1;
  std::cout << (ok ? "PASS" : "FAIL") << " " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
}

// Runs a criterion body that returns {ok, detail}; exceptions become FAIL.
template <typename Fn>
void criterion(const std::string& name, Fn&& body) {
  try {
    const std::pair<bool, std::string> result = body();
    report(name, result.first, result.second);
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(AVQ_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return std::string(buf);
}

// One default-geometry synthetic clip (5 s, 160x120 @ 8 fps, 16 kHz).
void default_clip(std::uint64_t seed, avq::FrameSequence* video,
                  avq::AudioSignal* audio) {
  const avq::SynthConfig cfg;
  avq::Rng rng(seed);
  *video = avq::synth_source_video(cfg, rng);
  *audio = avq::synth_source_audio(cfg, rng);
}

std::pair<bool, std::string> check_shapes() {
  avq::FrameSequence video;
  avq::AudioSignal audio;
  default_clip(3, &video, &audio);

  const avq::VisualFeatureMatrix visual = avq::visual_features(video);
  const avq::AudioFeatureMatrix bands = avq::spectrogram(audio);
  const avq::AudiovisualFeatureMatrix merged =
      avq::fuse_features(visual, bands);

  avq::ClipTrainingData clip;
  clip.features = merged;
  clip.targets = avq::build_target(4.2, merged.data.cols());
  clip.id = "shape-probe";
  avq::TrainConfig tc;
  tc.pretrain_epochs = 1;
  tc.finetune_epochs = 1;
  const avq::DeepModel model = avq::train_model(avq::assemble_global({clip}), tc);
  const avq::Matrix output = avq::forward(model, merged.data);

  const bool ok = visual.data.rows() == 90 &&
                  visual.data.cols() == video.frame_count() &&
                  bands.data.rows() == 25 && merged.data.rows() == 115 &&
                  merged.data.cols() == bands.data.cols() &&
                  output.rows() == 4 && output.cols() == merged.data.cols();
  std::ostringstream detail;
  detail << "visual " << visual.data.rows() << "x" << visual.data.cols()
         << ", audio " << bands.data.rows() << "x" << bands.data.cols()
         << ", merged " << merged.data.rows() << "x" << merged.data.cols()
         << ", output " << output.rows() << "x" << output.cols();
  return {ok, detail.str()};
}

std::pair<bool, std::string> check_gradients() {
  double worst = 0.0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    worst = std::max(worst, avq::gradient_check_autoencoder(seed));
    worst = std::max(worst, avq::gradient_check_cross_entropy(seed));
  }
  std::ostringstream detail;
  detail << "max relative error " << worst << " vs bound 1e-4";
  return {worst < 1e-4, detail.str()};
}

double mean_hidden_activation(const avq::DenseLayer& encoder,
                              const avq::Matrix& data) {
  const avq::Matrix hidden = avq::layer_forward(encoder, data);
  double sum = 0.0;
  for (std::size_t r = 0; r < hidden.rows(); ++r)
    for (std::size_t c = 0; c < hidden.cols(); ++c) sum += hidden(r, c);
  return sum / static_cast<double>(hidden.rows() * hidden.cols());
}

std::pair<bool, std::string> check_sparsity() {
  // Train the first stage on real merged features from two clips.
  std::vector<avq::ClipTrainingData> clips(2);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    avq::FrameSequence video;
    avq::AudioSignal audio;
    default_clip(100 + i, &video, &audio);
    clips[i].features =
        avq::fuse_features(avq::visual_features(video), avq::spectrogram(audio));
    clips[i].targets = avq::build_target(3.0, clips[i].features.data.cols());
    clips[i].id = "sparsity-" + std::to_string(i);
  }
  const avq::GlobalTrainingSet global = avq::assemble_global(clips);
  const avq::Scaler scaler = avq::fit_scaler(global.features);
  const avq::Matrix scaled = avq::apply_scaler(scaler, global.features);

  avq::AutoencoderConfig cfg;  // defaults: hidden 60, beta 4, rho 0.05
  cfg.seed = 11;
  avq::AutoencoderConfig control = cfg;
  control.sparsity_weight = 0.0;

  const double act_sparse =
      mean_hidden_activation(avq::train_autoencoder(scaled, cfg).encoder,
                             scaled);
  const double act_control =
      mean_hidden_activation(avq::train_autoencoder(scaled, control).encoder,
                             scaled);
  const double err_sparse = std::abs(act_sparse - cfg.sparsity_target);
  const double err_control = std::abs(act_control - cfg.sparsity_target);
  std::ostringstream detail;
  detail << "mean activation " << fmt(act_sparse) << " with penalty vs "
         << fmt(act_control) << " without, target 0.05";
  return {err_sparse < err_control, detail.str()};
}

std::pair<bool, std::string> check_scoring_oracle() {
  avq::Rng rng(2024);
  avq::Matrix probs(4, 1000);
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    double column[4];
    if (j % 50 == 0) {
      // Exact one-hot columns.
      for (double& v : column) v = 0.0;
      column[j / 50 % 4] = 1.0;
    } else if (j % 37 == 0) {
      // Exact two-way ties exercise the lowest-group rule.
      column[0] = 0.0;
      column[1] = 0.5;
      column[2] = 0.5;
      column[3] = 0.0;
    } else {
      double sum = 0.0;
      for (double& v : column) {
        v = rng.uniform();
        sum += v;
      }
      for (double& v : column) v /= sum;
    }
    for (std::size_t r = 0; r < 4; ++r) probs(r, j) = column[r];
  }

  const std::vector<double> scores = avq::column_scores(probs);
  if (scores.size() != probs.cols()) return {false, "wrong score count"};
  std::size_t mismatches = 0;
  bool in_range = true;
  for (std::size_t j = 0; j < probs.cols(); ++j) {
    // Independent re-implementation: 1-based argmax plus its probability,
    // first maximum wins.
    std::size_t best = 0;
    for (std::size_t r = 1; r < 4; ++r)
      if (probs(r, j) > probs(best, j)) best = r;
    const double expected = static_cast<double>(best + 1) + probs(best, j);
    if (scores[j] != expected) ++mismatches;
    if (scores[j] < 1.25 || scores[j] > 5.0) in_range = false;
  }
  std::ostringstream detail;
  detail << mismatches << "/1000 mismatches, range "
         << (in_range ? "within" : "outside") << " [1.25, 5]";
  return {mismatches == 0 && in_range, detail.str()};
}

std::pair<bool, std::string> check_target_rule() {
  const int g1 = avq::quality_group(1.65);
  const int g3 = avq::quality_group(3.52);
  const avq::TargetMatrix t1 = avq::build_target(1.65, 3);
  const avq::TargetMatrix t3 = avq::build_target(3.52, 3);
  bool hot1 = true, hot3 = true;
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t r = 0; r < 4; ++r) {
      hot1 = hot1 && t1.data(r, j) == (r == 0 ? 1.0 : 0.0);
      hot3 = hot3 && t3.data(r, j) == (r == 2 ? 1.0 : 0.0);
    }
  }
  std::ostringstream detail;
  detail << "MOS 1.65 -> group " << g1 << ", MOS 3.52 -> group " << g3;
  return {g1 == 1 && g3 == 3 && hot1 && hot3, detail.str()};
}

std::pair<bool, std::string> check_determinism(const fs::path& work) {
  const fs::path corpus = work / "determinism-corpus";
  if (run_cli("synth --out " + corpus.string() + " --count 6 --seed 5",
              work / "determinism-synth.log") != 0)
    return {false, "synth failed"};

  const std::string train_cmd = "train --manifest " +
                                (corpus / "manifest.csv").string() +
                                " --seed 9 --out ";
  const fs::path model_a = work / "model-a.json";
  const fs::path model_b = work / "model-b.json";
  if (run_cli(train_cmd + model_a.string(), work / "determinism-a.log") != 0)
    return {false, "first train run failed"};
  if (run_cli(train_cmd + model_b.string(), work / "determinism-b.log") != 0)
    return {false, "second train run failed"};

  const std::vector<std::uint8_t> a = avq::read_file(model_a);
  const std::vector<std::uint8_t> b = avq::read_file(model_b);
  std::ostringstream detail;
  detail << a.size() << "-byte model files "
         << (a == b ? "are byte-identical" : "differ");
  return {a == b, detail.str()};
}

struct CorpusOutcome {
  bool ran = false;
  double pcc_mean = 0.0;
  double pcc_stddev = 0.0;
  double rmse_mean = 0.0;
  bool leakage_ok = false;
  std::string error;
};

CorpusOutcome run_corpus_evaluation(const fs::path& work) {
  CorpusOutcome outcome;
  const fs::path corpus = work / "corpus";
  if (run_cli("synth --out " + corpus.string() + " --count 160 --seed 7",
              work / "synth.log") != 0) {
    outcome.error = "synth failed";
    return outcome;
  }
  if (run_cli("evaluate --manifest " + (corpus / "manifest.csv").string() +
                  " --k 10",
              work / "evaluate.log") != 0) {
    outcome.error = "evaluate failed";
    return outcome;
  }

  std::ifstream in(corpus / "report.json");
  if (!in.good()) {
    outcome.error = "report.json missing";
    return outcome;
  }
  const nlohmann::json doc = nlohmann::json::parse(in);
  outcome.pcc_mean = doc.at("aggregate").at("pcc").at("mean").get<double>();
  outcome.pcc_stddev =
      doc.at("aggregate").at("pcc").at("stddev").get<double>();
  outcome.rmse_mean = doc.at("aggregate").at("rmse").at("mean").get<double>();
  outcome.leakage_ok = doc.at("leakage_audit_passed").get<bool>();
  outcome.ran = true;
  return outcome;
}

}  // namespace

int main() {
  std::error_code ec;
  const fs::path work = fs::temp_directory_path() / "avq-acceptance";
  fs::remove_all(work, ec);
  fs::create_directories(work);

  criterion("shape-contracts", check_shapes);
  criterion("gradient-correctness", check_gradients);
  criterion("scoring-oracle", check_scoring_oracle);
  criterion("target-rule-fidelity", check_target_rule);
  criterion("sparsity-efficacy", check_sparsity);
  criterion("determinism", [&] { return check_determinism(work); });

  // One 160-clip corpus serves the last two criteria.
  CorpusOutcome outcome;
  try {
    outcome = run_corpus_evaluation(work);
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
  if (outcome.ran) {
    const bool learnable = outcome.pcc_mean >= 0.85 &&
                           outcome.rmse_mean <= 0.6 &&
                           outcome.pcc_stddev <= 0.1;
    report("end-to-end-learnability", learnable,
           "pcc " + fmt(outcome.pcc_mean) + " >= 0.85, rmse " +
               fmt(outcome.rmse_mean) + " <= 0.6, fold pcc stddev " +
               fmt(outcome.pcc_stddev) + " <= 0.1");
    report("no-leakage-audit", outcome.leakage_ok,
           outcome.leakage_ok ? "no test clip in any training fold"
                              : "training columns include test clips");
  } else {
    report("end-to-end-learnability", false, outcome.error);
    report("no-leakage-audit", false, outcome.error);
  }

  std::cout << "acceptance: " << g_passed << "/" << (g_passed + g_failed)
            << " criteria passed" << std::endl;
  fs::remove_all(work, ec);
  return g_failed == 0 ? 0 : 1;
}
