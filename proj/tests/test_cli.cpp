#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "avq/media_io.hpp"
#include "avq/neural.hpp"
#include "test_support.hpp"

#ifndef AVQ_CLI_PATH
#error "AVQ_CLI_PATH must point at the avq binary"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  static int serial = 0;
  const fs::path out_path =
      fs::temp_directory_path() / ("avq-cli-out-" + std::to_string(serial));
  const fs::path err_path =
      fs::temp_directory_path() / ("avq-cli-err-" + std::to_string(serial));
  ++serial;
  const std::string cmd = std::string(AVQ_CLI_PATH) + " " + args + " > " +
                          out_path.string() + " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp_text(out_path);
  r.err = slurp_text(err_path);
  fs::remove(out_path);
  fs::remove(err_path);
  return r;
}

std::size_t line_count(const std::string& text) {
  std::size_t lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

// One tiny corpus shared by the expensive cases in this file.
struct CorpusFixture {
  test_support::TempDir dir{"cli"};
  fs::path corpus;
  fs::path manifest;

  CorpusFixture() {
    corpus = dir.path() / "corpus";
    const RunResult r = run_cli(
        "synth --out " + corpus.string() +
        " --count 6 --seed 11 --width 64 --height 48 --duration 1"
        " --sample-rate 8000");
    REQUIRE(r.exit_code == 0);
    manifest = corpus / "manifest.csv";
    REQUIRE(strip(r.out) == manifest.string());
    REQUIRE(fs::exists(manifest));
  }
};

const CorpusFixture& corpus_fixture() {
  static CorpusFixture fixture;
  return fixture;
}

const std::string kTinyTrainFlags =
    " --hidden1 8 --hidden2 5 --pretrain-epochs 2 --finetune-epochs 2"
    " --batch-size 16";

}  // namespace

TEST_CASE("version and usage errors use the documented exit codes") {
  CHECK(run_cli("--version").exit_code == 0);
  CHECK(run_cli("--version").out.find("avq") != std::string::npos);

  CHECK(run_cli("").exit_code == 2);              // a subcommand is required
  CHECK(run_cli("--bogus").exit_code == 2);       // unknown flag
  CHECK(run_cli("transmogrify").exit_code == 2);  // unknown subcommand
  CHECK(run_cli("train --out x.json").exit_code == 2);  // missing --manifest

  const RunResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  for (const char* sub : {"extract", "train", "predict", "evaluate", "synth"})
    CHECK(help.out.find(sub) != std::string::npos);
}

TEST_CASE("synth writes a corpus with manifest and provenance record") {
  const CorpusFixture& fx = corpus_fixture();

  const avq::DatasetManifest m = avq::load_manifest(fx.manifest);
  CHECK(m.entries.size() == 6);
  for (const avq::ManifestEntry& e : m.entries) {
    CHECK(fs::exists(m.resolve(e.video_path)));
    CHECK(fs::exists(m.resolve(e.audio_path)));
  }

  const nlohmann::json cfg =
      nlohmann::json::parse(slurp_text(fx.corpus / "synth-config.json"));
  CHECK(cfg.at("count").get<int>() == 6);
  CHECK(cfg.at("seed").get<int>() == 11);
  CHECK(cfg.at("width").get<int>() == 64);
  CHECK(cfg.at("sample_rate").get<int>() == 8000);
}

TEST_CASE("extract emits labeled visual, audio, and merged feature tables") {
  const CorpusFixture& fx = corpus_fixture();
  const avq::DatasetManifest m = avq::load_manifest(fx.manifest);
  const std::string video = m.resolve(m.entries[0].video_path).string();
  const std::string audio = m.resolve(m.entries[0].audio_path).string();

  test_support::TempDir out("cli-extract");
  const fs::path visual_csv = out.path() / "visual.csv";
  const fs::path audio_csv = out.path() / "audio.csv";
  const fs::path merged_csv = out.path() / "merged.csv";
  const RunResult r = run_cli("extract --video " + video + " --audio " + audio +
                              " --visual-out " + visual_csv.string() +
                              " --audio-out " + audio_csv.string() +
                              " --merged-out " + merged_csv.string());
  REQUIRE(r.exit_code == 0);

  const std::string visual_text = slurp_text(visual_csv);
  CHECK(line_count(visual_text) == 90);
  CHECK(visual_text.find("ggd_alpha_s1_o0,") == 0);
  CHECK(visual_text.find("\nsi,") != std::string::npos);
  CHECK(visual_text.find("\nti,") != std::string::npos);

  const std::string audio_text = slurp_text(audio_csv);
  CHECK(line_count(audio_text) == 25);
  // Rows are labeled with band center frequencies, lowest first at 50 Hz.
  CHECK(std::stod(audio_text) == doctest::Approx(50.0).epsilon(1e-9));

  const std::string merged_text = slurp_text(merged_csv);
  CHECK(line_count(merged_text) == 115);

  // Usage errors: no inputs at all, or merged output without both inputs.
  CHECK(run_cli("extract --visual-out " + visual_csv.string()).exit_code == 2);
  CHECK(run_cli("extract --video " + video + " --merged-out " +
                merged_csv.string())
            .exit_code == 2);
}

TEST_CASE("train writes a loadable model deterministically") {
  const CorpusFixture& fx = corpus_fixture();
  test_support::TempDir out("cli-train");
  const fs::path model_a = out.path() / "model-a.json";
  const fs::path model_b = out.path() / "model-b.json";

  const std::string base = "train --manifest " + fx.manifest.string() +
                           " --seed 5" + kTinyTrainFlags + " --out ";
  REQUIRE(run_cli(base + model_a.string()).exit_code == 0);
  REQUIRE(run_cli(base + model_b.string()).exit_code == 0);

  const std::vector<std::uint8_t> bytes_a = avq::read_file(model_a);
  CHECK(bytes_a == avq::read_file(model_b));

  const avq::DeepModel model = avq::load_model(model_a);
  REQUIRE(model.layers.size() == 3);
  CHECK(model.layers[0].output_size() == 8);
  CHECK(model.layers[1].output_size() == 5);
  CHECK(model.layers[2].output_size() == 4);
  CHECK(model.config.seed == 5);

  // Missing manifest file is a pipeline error, not a usage error.
  const RunResult bad =
      run_cli("train --manifest /nonexistent/manifest.csv --out " +
              (out.path() / "x.json").string());
  CHECK(bad.exit_code == 1);
  CHECK(bad.err.find("avq: error") != std::string::npos);
}

TEST_CASE("predict scores media and feature tables identically") {
  const CorpusFixture& fx = corpus_fixture();
  const avq::DatasetManifest m = avq::load_manifest(fx.manifest);
  const std::string video = m.resolve(m.entries[1].video_path).string();
  const std::string audio = m.resolve(m.entries[1].audio_path).string();

  test_support::TempDir out("cli-predict");
  const fs::path model = out.path() / "model.json";
  REQUIRE(run_cli("train --manifest " + fx.manifest.string() + " --seed 5" +
                  kTinyTrainFlags + " --out " + model.string())
              .exit_code == 0);

  const fs::path merged_csv = out.path() / "merged.csv";
  REQUIRE(run_cli("extract --video " + video + " --audio " + audio +
                  " --merged-out " + merged_csv.string())
              .exit_code == 0);

  const RunResult via_media = run_cli("predict --model " + model.string() +
                                      " --video " + video + " --audio " +
                                      audio);
  const RunResult via_features = run_cli("predict --model " + model.string() +
                                         " --features " + merged_csv.string());
  REQUIRE(via_media.exit_code == 0);
  REQUIRE(via_features.exit_code == 0);
  // The feature CSV preserves doubles exactly, so the two paths agree to
  // the last printed digit.
  CHECK(strip(via_media.out) == strip(via_features.out));
  const double score = std::stod(via_media.out);
  CHECK(score >= 1.25);
  CHECK(score <= 5.0);

  const RunResult as_json =
      run_cli("predict --model " + model.string() + " --features " +
              merged_csv.string() + " --json --id clip-one");
  REQUIRE(as_json.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(as_json.out);
  CHECK(doc.at("id").get<std::string>() == "clip-one");
  CHECK(doc.at("score").get<double>() == doctest::Approx(score).epsilon(1e-12));
  CHECK(doc.at("per_column_summary").at("min").get<double>() <=
        doc.at("per_column_summary").at("max").get<double>());

  // Exactly one input source must be chosen.
  CHECK(run_cli("predict --model " + model.string()).exit_code == 2);
  CHECK(run_cli("predict --model " + model.string() + " --video " + video +
                " --audio " + audio + " --features " + merged_csv.string())
            .exit_code == 2);
  // A broken model file is a pipeline error.
  const fs::path broken = out.path() / "broken.json";
  avq::write_text_file(broken, "not a model\n");
  CHECK(run_cli("predict --model " + broken.string() + " --features " +
                merged_csv.string())
            .exit_code == 1);
}

TEST_CASE("evaluate writes reports and prints the aggregate line") {
  const CorpusFixture& fx = corpus_fixture();
  test_support::TempDir out("cli-eval");
  const std::string prefix = (out.path() / "report").string();

  const RunResult r = run_cli("evaluate --manifest " + fx.manifest.string() +
                              " --k 3 --seed 2" + kTinyTrainFlags +
                              " --report-prefix " + prefix);
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("folds=3") != std::string::npos);
  CHECK(r.out.find("pcc=") != std::string::npos);

  REQUIRE(fs::exists(prefix + ".csv"));
  REQUIRE(fs::exists(prefix + ".json"));
  const nlohmann::json doc =
      nlohmann::json::parse(slurp_text(prefix + ".json"));
  CHECK(doc.at("k").get<int>() == 3);
  CHECK(doc.at("leakage_audit_passed").get<bool>());
  CHECK(doc.at("predictions").size() == 6);
  CHECK(doc.at("train_config").at("hidden1").get<int>() == 8);

  // Too many folds for the corpus is a pipeline error.
  CHECK(run_cli("evaluate --manifest " + fx.manifest.string() + " --k 7" +
                kTinyTrainFlags)
            .exit_code == 1);
}
