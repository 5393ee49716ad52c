// avq: no-reference audio-visual quality estimation.
//
// Subcommands: extract (feature CSVs), train (fit a model from a manifest),
// predict (score one clip), evaluate (k-fold cross-validation report),
// synth (generate a labeled synthetic corpus).
//
// Exit codes: 0 success, 1 pipeline error (diagnostic names the failing
// module), 2 usage error.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "avq/audio_features.hpp"
#include "avq/cv_harness.hpp"
#include "avq/distortion_lab.hpp"
#include "avq/error.hpp"
#include "avq/fusion.hpp"
#include "avq/log.hpp"
#include "avq/media_io.hpp"
#include "avq/neural.hpp"
#include "avq/scoring.hpp"
#include "avq/visual_features.hpp"

namespace {

namespace fs = std::filesystem;

// Shortest decimal form that parses back to the identical double; keeps the
// extract -> predict --features path bit-exact.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string matrix_csv(const avq::Matrix& m,
                       const std::vector<std::string>* row_labels) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (row_labels != nullptr) {
      out += (*row_labels)[r];
      out += ',';
    }
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c != 0) out += ',';
      out += fmt_double(row[c]);
    }
    out += '\n';
  }
  return out;
}

avq::Matrix parse_numeric_csv(const fs::path& path) {
  const std::vector<std::uint8_t> raw = avq::read_file(path);
  std::vector<std::vector<double>> rows;
  std::vector<double> current;
  std::string field;
  const auto flush_field = [&] {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
      throw avq::Error(avq::ErrorCode::MalformedRow, "cli",
                       "'" + field + "' in " + path.string() +
                           " is not a number");
    current.push_back(value);
    field.clear();
  };
  for (std::uint8_t byte : raw) {
    const char c = static_cast<char>(byte);
    if (c == ',') {
      flush_field();
    } else if (c == '\n') {
      if (!field.empty() || !current.empty()) {
        flush_field();
        rows.push_back(std::move(current));
        current.clear();
      }
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !current.empty()) {
    flush_field();
    rows.push_back(std::move(current));
  }
  if (rows.empty())
    throw avq::Error(avq::ErrorCode::EmptyData, "cli",
                     path.string() + " holds no rows");
  for (const auto& row : rows)
    if (row.size() != rows.front().size())
      throw avq::Error(avq::ErrorCode::MalformedRow, "cli",
                       path.string() + " rows have differing lengths");

  avq::Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

void add_train_flags(CLI::App* cmd, avq::TrainConfig& cfg) {
  cmd->add_option("--hidden1", cfg.hidden1, "First encoder width")
      ->capture_default_str();
  cmd->add_option("--hidden2", cfg.hidden2, "Second encoder width")
      ->capture_default_str();
  cmd->add_option("--l2-weight", cfg.l2_weight,
                  "L2 penalty on autoencoder weights")
      ->capture_default_str();
  cmd->add_option("--sparsity-weight", cfg.sparsity_weight,
                  "Weight of the KL sparsity penalty")
      ->capture_default_str();
  cmd->add_option("--sparsity-target", cfg.sparsity_target,
                  "Target mean hidden activation")
      ->capture_default_str();
  cmd->add_option("--pretrain-epochs", cfg.pretrain_epochs,
                  "Epochs per pretraining stage")
      ->capture_default_str();
  cmd->add_option("--finetune-epochs", cfg.finetune_epochs,
                  "Epochs for end-to-end fine-tuning")
      ->capture_default_str();
  cmd->add_option("--learning-rate", cfg.learning_rate, "Step size")
      ->capture_default_str();
  cmd->add_option("--batch-size", cfg.batch_size, "Mini-batch width")
      ->capture_default_str();
}

struct ExtractArgs {
  std::string video, audio;
  std::string visual_out, audio_out, merged_out;
};

int run_extract(const ExtractArgs& args) {
  if (args.video.empty() && args.audio.empty()) {
    std::cerr << "avq: extract needs --video and/or --audio\n";
    return 2;
  }
  if (!args.merged_out.empty() && (args.video.empty() || args.audio.empty())) {
    std::cerr << "avq: --merged-out needs both --video and --audio\n";
    return 2;
  }

  avq::VisualFeatureMatrix visual;
  avq::AudioFeatureMatrix audio;
  if (!args.video.empty())
    visual = avq::visual_features(avq::load_y4m(args.video));
  if (!args.audio.empty()) audio = avq::spectrogram(avq::load_wav(args.audio));

  if (!args.visual_out.empty()) {
    const std::vector<std::string> labels = avq::visual_row_labels();
    avq::write_text_file(args.visual_out, matrix_csv(visual.data, &labels));
    avq::log_message("extract: wrote " + args.visual_out);
  }
  if (!args.audio_out.empty()) {
    std::vector<std::string> labels;
    labels.reserve(audio.band_centers_hz.size());
    for (double hz : audio.band_centers_hz) labels.push_back(fmt_double(hz));
    avq::write_text_file(args.audio_out, matrix_csv(audio.data, &labels));
    avq::log_message("extract: wrote " + args.audio_out);
  }
  if (!args.merged_out.empty()) {
    const avq::AudiovisualFeatureMatrix merged =
        avq::fuse_features(visual, audio);
    avq::write_text_file(args.merged_out, matrix_csv(merged.data, nullptr));
    avq::log_message("extract: wrote " + args.merged_out);
  }
  return 0;
}

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string export_global;
  std::size_t jobs = 1;
  avq::TrainConfig cfg;
};

int run_train(const TrainArgs& args) {
  const avq::DatasetManifest manifest = avq::load_manifest(args.manifest);
  const std::vector<avq::ClipTrainingData> clips =
      avq::extract_clip_features(manifest, args.jobs);
  const avq::GlobalTrainingSet global = avq::assemble_global(clips);

  if (!args.export_global.empty()) {
    avq::write_text_file(args.export_global + "features.csv",
                         matrix_csv(global.features, nullptr));
    avq::write_text_file(args.export_global + "targets.csv",
                         matrix_csv(global.targets, nullptr));
    std::string prov;
    for (const std::string& id : global.provenance) {
      prov += id;
      prov += '\n';
    }
    avq::write_text_file(args.export_global + "provenance.csv", prov);
    avq::log_message("train: exported global set with prefix '" +
                     args.export_global + "'");
  }

  const avq::DeepModel model = avq::train_model(global, args.cfg);
  avq::save_model(model, args.out);
  avq::log_message("train: wrote " + args.out);
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string video, audio, features;
  std::string id;
  bool json = false;
};

int run_predict(const PredictArgs& args) {
  const bool has_media = !args.video.empty() && !args.audio.empty();
  const bool has_features = !args.features.empty();
  if (has_media == has_features) {
    std::cerr << "avq: predict needs either --video with --audio, "
                 "or --features\n";
    return 2;
  }

  const avq::DeepModel model = avq::load_model(args.model);
  avq::QualityScore score;
  if (has_features) {
    score = avq::score_features(model, parse_numeric_csv(args.features));
  } else {
    score = avq::predict_quality(model, avq::load_y4m(args.video),
                                 avq::load_wav(args.audio));
  }

  if (args.json) {
    const auto [lo, hi] =
        std::minmax_element(score.per_column.begin(), score.per_column.end());
    double mean = 0.0;
    for (double s : score.per_column) mean += s;
    mean /= static_cast<double>(score.per_column.size());
    nlohmann::ordered_json doc;
    doc["id"] = args.id.empty()
                    ? fs::path(has_features ? args.features : args.video)
                          .stem()
                          .string()
                    : args.id;
    doc["score"] = score.value;
    doc["per_column_summary"]["min"] = *lo;
    doc["per_column_summary"]["max"] = *hi;
    doc["per_column_summary"]["mean"] = mean;
    std::cout << doc.dump() << "\n";
  } else {
    std::cout << fmt_double(score.value) << "\n";
  }
  return 0;
}

struct EvaluateArgs {
  std::string manifest;
  std::string report_prefix;
  avq::CvConfig cfg;
};

int run_evaluate(const EvaluateArgs& args) {
  const avq::DatasetManifest manifest = avq::load_manifest(args.manifest);
  const avq::EvalReport report = avq::run_cv(manifest, args.cfg);

  std::string prefix = args.report_prefix;
  if (prefix.empty())
    prefix = (manifest.base_dir / "report").string();
  avq::write_report_csv(report, prefix + ".csv");
  avq::write_report_json(report, prefix + ".json");
  avq::log_message("evaluate: wrote " + prefix + ".csv and " + prefix +
                   ".json");
  if (!report.leakage_audit_passed)
    avq::log_message("evaluate: WARNING: leakage audit failed");
  std::cout << avq::aggregate_line(report) << "\n";
  return 0;
}

struct SynthArgs {
  std::string out;
  avq::SynthConfig cfg;
};

int run_synth(const SynthArgs& args) {
  const avq::DatasetManifest manifest = avq::synth_dataset(args.cfg, args.out);

  nlohmann::ordered_json provenance;
  provenance["count"] = args.cfg.count;
  provenance["seed"] = args.cfg.seed;
  provenance["width"] = args.cfg.width;
  provenance["height"] = args.cfg.height;
  provenance["fps_num"] = args.cfg.fps_num;
  provenance["fps_den"] = args.cfg.fps_den;
  provenance["duration_seconds"] = args.cfg.duration_seconds;
  provenance["sample_rate"] = args.cfg.sample_rate;
  avq::write_text_file(fs::path(args.out) / "synth-config.json",
                       provenance.dump(2) + "\n");

  avq::log_message("synth: " + std::to_string(manifest.entries.size()) +
                   " clips in " + args.out);
  std::cout << (fs::path(args.out) / "manifest.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"no-reference audio-visual quality estimation"};
  app.set_version_flag("--version", "avq 0.1.0");
  app.set_config("--config", "", "key=value configuration file");
  app.require_subcommand(1);

  ExtractArgs extract_args;
  CLI::App* extract =
      app.add_subcommand("extract", "Write feature CSVs for one clip");
  extract->add_option("--video", extract_args.video, "Y4M input");
  extract->add_option("--audio", extract_args.audio, "WAV input");
  extract->add_option("--visual-out", extract_args.visual_out,
                      "Visual feature CSV (90 labeled rows)");
  extract->add_option("--audio-out", extract_args.audio_out,
                      "Band energy CSV (25 rows labeled by center Hz)");
  extract->add_option("--merged-out", extract_args.merged_out,
                      "Merged 115-row feature CSV, numeric only");

  TrainArgs train_args;
  CLI::App* train =
      app.add_subcommand("train", "Train a model from a manifest");
  train->add_option("--manifest", train_args.manifest, "Dataset manifest CSV")
      ->required();
  train->add_option("--out", train_args.out, "Model file to write")
      ->required();
  train->add_option("--seed", train_args.cfg.seed, "Training seed")
      ->capture_default_str();
  train->add_option("--jobs", train_args.jobs,
                    "Parallel feature extraction workers")
      ->capture_default_str();
  train->add_option("--export-global", train_args.export_global,
                    "Prefix for features/targets/provenance CSV dump");
  add_train_flags(train, train_args.cfg);

  PredictArgs predict_args;
  CLI::App* predict = app.add_subcommand("predict", "Score one clip");
  predict->add_option("--model", predict_args.model, "Trained model file")
      ->required();
  predict->add_option("--video", predict_args.video, "Y4M input");
  predict->add_option("--audio", predict_args.audio, "WAV input");
  predict->add_option("--features", predict_args.features,
                      "Merged feature CSV instead of media");
  predict->add_option("--id", predict_args.id, "Identifier for JSON output");
  predict->add_flag("--json", predict_args.json,
                    "Emit JSON with a per-column summary");

  EvaluateArgs eval_args;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "k-fold cross-validation over a manifest");
  evaluate->add_option("--manifest", eval_args.manifest, "Dataset manifest CSV")
      ->required();
  evaluate->add_option("--k", eval_args.cfg.k, "Fold count")
      ->capture_default_str();
  evaluate->add_option("--seed", eval_args.cfg.seed, "Split/training seed")
      ->capture_default_str();
  evaluate->add_flag("--group-by-source", eval_args.cfg.group_by_source,
                     "Keep clips sharing a source id in one fold");
  evaluate->add_option("--jobs", eval_args.cfg.jobs, "Parallel workers")
      ->capture_default_str();
  evaluate->add_option("--report-prefix", eval_args.report_prefix,
                       "Report path prefix (default: <manifest dir>/report)");
  add_train_flags(evaluate, eval_args.cfg.train);

  SynthArgs synth_args;
  CLI::App* synth =
      app.add_subcommand("synth", "Generate a labeled synthetic corpus");
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--count", synth_args.cfg.count, "Number of clips")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.cfg.seed, "Corpus seed")
      ->capture_default_str();
  synth->add_option("--width", synth_args.cfg.width, "Frame width")
      ->capture_default_str();
  synth->add_option("--height", synth_args.cfg.height, "Frame height")
      ->capture_default_str();
  synth->add_option("--fps", synth_args.cfg.fps_num, "Frames per second")
      ->capture_default_str();
  synth->add_option("--duration", synth_args.cfg.duration_seconds,
                    "Clip length in seconds")
      ->capture_default_str();
  synth->add_option("--sample-rate", synth_args.cfg.sample_rate,
                    "Audio sample rate in Hz")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (extract->parsed()) return run_extract(extract_args);
    if (train->parsed()) return run_train(train_args);
    if (predict->parsed()) return run_predict(predict_args);
    if (evaluate->parsed()) return run_evaluate(eval_args);
    if (synth->parsed()) return run_synth(synth_args);
  } catch (const avq::Error& e) {
    std::cerr << "avq: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "avq: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
