#include "avq/cv_harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "avq/audio_features.hpp"
#include "avq/error.hpp"
#include "avq/log.hpp"
#include "avq/rng.hpp"
#include "avq/scoring.hpp"
#include "avq/visual_features.hpp"

namespace avq {

namespace {

constexpr std::string_view kModule = "cv-harness";

void parallel_for(std::size_t jobs, std::size_t count,
                  const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(count);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          body(i);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
}

// Shortest round-trip decimal form, so reports reload to identical doubles.
std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

StatSummary summarize(const std::vector<double>& values) {
  StatSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(acc / (n - 1.0));
  }
  return s;
}

double plain_rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

std::string group_key(const std::string& id) {
  // "news-03" -> "news"; ids without a dash are their own group.
  return id.substr(0, id.rfind('-'));
}

nlohmann::ordered_json train_config_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["hidden1"] = cfg.hidden1;
  j["hidden2"] = cfg.hidden2;
  j["l2_weight"] = cfg.l2_weight;
  j["sparsity_weight"] = cfg.sparsity_weight;
  j["sparsity_target"] = cfg.sparsity_target;
  j["pretrain_epochs"] = cfg.pretrain_epochs;
  j["finetune_epochs"] = cfg.finetune_epochs;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace

std::vector<std::vector<std::size_t>> kfold_split(std::size_t entry_count,
                                                  std::size_t k,
                                                  std::uint64_t seed) {
  if (k < 2)
    throw Error(ErrorCode::TooFewEntries, kModule,
                "need at least 2 folds, got " + std::to_string(k));
  if (entry_count < k)
    throw Error(ErrorCode::TooFewEntries, kModule,
                std::to_string(entry_count) + " entries cannot fill " +
                    std::to_string(k) + " folds");

  std::vector<std::size_t> order(entry_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t base = entry_count / k;
  const std::size_t extra = entry_count % k;
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t offset = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + offset, order.begin() + offset + size);
    std::sort(folds[f].begin(), folds[f].end());
    offset += size;
  }
  return folds;
}

std::vector<std::vector<std::size_t>> kfold_split_grouped(
    const DatasetManifest& manifest, std::size_t k, std::uint64_t seed) {
  if (k < 2)
    throw Error(ErrorCode::TooFewEntries, kModule,
                "need at least 2 folds, got " + std::to_string(k));
  std::map<std::string, std::vector<std::size_t>> by_key;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i)
    by_key[group_key(manifest.entries[i].id)].push_back(i);
  if (by_key.size() < k)
    throw Error(ErrorCode::TooFewEntries, kModule,
                std::to_string(by_key.size()) + " source groups cannot fill " +
                    std::to_string(k) + " folds");

  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups(
      by_key.begin(), by_key.end());
  Rng rng(seed);
  rng.shuffle(groups);
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) {
                     return a.second.size() > b.second.size();
                   });

  std::vector<std::vector<std::size_t>> folds(k);
  std::vector<std::size_t> loads(k, 0);
  for (const auto& [key, members] : groups) {
    const std::size_t target = static_cast<std::size_t>(
        std::min_element(loads.begin(), loads.end()) - loads.begin());
    folds[target].insert(folds[target].end(), members.begin(), members.end());
    loads[target] += members.size();
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

std::vector<ClipTrainingData> extract_clip_features(
    const DatasetManifest& manifest, std::size_t jobs) {
  const std::size_t n = manifest.entries.size();
  std::vector<ClipTrainingData> clips(n);
  std::atomic<std::size_t> done{0};
  parallel_for(jobs, n, [&](std::size_t i) {
    const ManifestEntry& entry = manifest.entries[i];
    try {
      const FrameSequence video = load_y4m(manifest.resolve(entry.video_path));
      const AudioSignal audio = load_wav(manifest.resolve(entry.audio_path));
      AudiovisualFeatureMatrix merged =
          fuse_features(visual_features(video), spectrogram(audio));
      clips[i].targets = build_target(entry.mos, merged.data.cols());
      clips[i].features = std::move(merged);
      clips[i].id = entry.id;
    } catch (const Error& e) {
      throw Error(e.code(), e.module(),
                  "clip '" + entry.id + "': " + e.what());
    }
    const std::size_t finished = ++done;
    if (finished % 20 == 0 || finished == n)
      log_message("features: " + std::to_string(finished) + "/" +
                  std::to_string(n) + " clips");
  });
  return clips;
}

EvalReport build_report(const DatasetManifest& manifest,
                        const std::vector<std::vector<std::size_t>>& folds,
                        const std::vector<double>& predicted) {
  const std::size_t n = manifest.entries.size();
  if (predicted.size() != n)
    throw Error(ErrorCode::DimensionMismatch, kModule,
                std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(n) + " entries");

  constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  std::vector<std::size_t> fold_of(n, kUnassigned);
  for (std::size_t f = 0; f < folds.size(); ++f)
    for (std::size_t idx : folds[f]) {
      if (idx >= n || fold_of[idx] != kUnassigned)
        throw std::invalid_argument("folds must partition the manifest");
      fold_of[idx] = f;
    }
  if (std::count(fold_of.begin(), fold_of.end(), kUnassigned) != 0)
    throw std::invalid_argument("folds must cover every manifest entry");

  EvalReport report;
  report.k = folds.size();

  std::vector<double> fold_pcc, fold_scc, fold_rmse;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<double> pred, mos;
    for (std::size_t idx : folds[f]) {
      pred.push_back(predicted[idx]);
      mos.push_back(manifest.entries[idx].mos);
      report.predictions.push_back(
          {manifest.entries[idx].id, f, predicted[idx],
           manifest.entries[idx].mos});
    }
    FoldStats stats;
    stats.fold = f;
    stats.test_count = folds[f].size();
    stats.pcc = std::numeric_limits<double>::quiet_NaN();
    stats.scc = std::numeric_limits<double>::quiet_NaN();
    try {
      stats.pcc = pcc(pred, mos);
    } catch (const Error&) {
    }
    try {
      stats.scc = scc(pred, mos);
    } catch (const Error&) {
    }
    stats.rmse = rmse(pred, mos);
    fold_pcc.push_back(stats.pcc);
    fold_scc.push_back(stats.scc);
    fold_rmse.push_back(stats.rmse);
    report.per_fold.push_back(stats);
  }
  report.pcc_summary = summarize(fold_pcc);
  report.scc_summary = summarize(fold_scc);
  report.rmse_summary = summarize(fold_rmse);

  std::vector<double> all_pred(n), all_mos(n);
  for (std::size_t i = 0; i < n; ++i) {
    all_pred[i] = predicted[i];
    all_mos[i] = manifest.entries[i].mos;
  }
  report.pooled_pcc = std::numeric_limits<double>::quiet_NaN();
  report.pooled_scc = std::numeric_limits<double>::quiet_NaN();
  try {
    report.pooled_pcc = pcc(all_pred, all_mos);
  } catch (const Error&) {
  }
  try {
    report.pooled_scc = scc(all_pred, all_mos);
  } catch (const Error&) {
  }
  report.pooled_rmse = rmse(all_pred, all_mos);

  const auto add_breakdown = [&](const std::string& channel,
                                 auto label_of) {
    std::vector<std::string> order;
    for (const ManifestEntry& e : manifest.entries) {
      const std::string& label = label_of(e);
      if (std::find(order.begin(), order.end(), label) == order.end())
        order.push_back(label);
    }
    for (const std::string& label : order) {
      std::vector<double> pred, mos;
      for (std::size_t i = 0; i < n; ++i)
        if (label_of(manifest.entries[i]) == label) {
          pred.push_back(predicted[i]);
          mos.push_back(manifest.entries[i].mos);
        }
      BreakdownRow row;
      row.channel = channel;
      row.label = label;
      row.count = pred.size();
      row.pcc = std::numeric_limits<double>::quiet_NaN();
      row.scc = std::numeric_limits<double>::quiet_NaN();
      row.rmse = plain_rmse(pred, mos);
      if (pred.size() >= 2) {
        try {
          row.pcc = pcc(pred, mos);
        } catch (const Error&) {
        }
        try {
          row.scc = scc(pred, mos);
        } catch (const Error&) {
        }
      }
      report.breakdown.push_back(std::move(row));
    }
  };
  add_breakdown("video",
                [](const ManifestEntry& e) -> const std::string& {
                  return e.video_distortion;
                });
  add_breakdown("audio",
                [](const ManifestEntry& e) -> const std::string& {
                  return e.audio_distortion;
                });
  return report;
}

EvalReport run_cv(const DatasetManifest& manifest, const CvConfig& cfg) {
  const std::size_t n = manifest.entries.size();
  const auto folds = cfg.group_by_source
                         ? kfold_split_grouped(manifest, cfg.k, cfg.seed)
                         : kfold_split(n, cfg.k, cfg.seed);

  log_message("cv: extracting features for " + std::to_string(n) + " clips");
  const std::vector<ClipTrainingData> clips =
      extract_clip_features(manifest, cfg.jobs);

  const Rng base(cfg.seed);
  std::vector<std::uint64_t> fold_seeds(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f)
    fold_seeds[f] = base.fork(f).next_u64();

  std::vector<double> predicted(n, 0.0);
  std::vector<char> audit_ok(folds.size(), 0);
  parallel_for(cfg.jobs, folds.size(), [&](std::size_t f) {
    std::vector<char> in_test(n, 0);
    for (std::size_t idx : folds[f]) in_test[idx] = 1;
    std::vector<ClipTrainingData> train_clips;
    train_clips.reserve(n - folds[f].size());
    for (std::size_t i = 0; i < n; ++i)
      if (!in_test[i]) train_clips.push_back(clips[i]);

    const GlobalTrainingSet global = assemble_global(train_clips);

    std::unordered_set<std::string> test_ids;
    for (std::size_t idx : folds[f]) test_ids.insert(clips[idx].id);
    bool clean = true;
    for (const std::string& id : global.provenance)
      if (test_ids.count(id) != 0) {
        clean = false;
        break;
      }
    audit_ok[f] = clean ? 1 : 0;

    TrainConfig tc = cfg.train;
    tc.seed = fold_seeds[f];
    log_message("cv: fold " + std::to_string(f + 1) + "/" +
                std::to_string(folds.size()) + ": training on " +
                std::to_string(global.features.cols()) + " columns from " +
                std::to_string(train_clips.size()) + " clips");
    DeepModel model;
    try {
      model = train_model(global, tc);
    } catch (const Error& e) {
      throw Error(e.code(), kModule,
                  "fold " + std::to_string(f) + ": " + e.what());
    }
    for (std::size_t idx : folds[f])
      predicted[idx] = score_features(model, clips[idx].features.data).value;
  });

  EvalReport report = build_report(manifest, folds, predicted);
  report.k = cfg.k;
  report.seed = cfg.seed;
  report.group_by_source = cfg.group_by_source;
  report.train = cfg.train;
  report.leakage_audit_passed =
      std::all_of(audit_ok.begin(), audit_ok.end(),
                  [](char ok) { return ok == 1; });
  return report;
}

void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path) {
  std::string out = "section,fold,channel,label,count,pcc,scc,rmse\n";
  for (const FoldStats& f : report.per_fold)
    out += "fold," + std::to_string(f.fold) + ",,," +
           std::to_string(f.test_count) + "," + fmt_double(f.pcc) + "," +
           fmt_double(f.scc) + "," + fmt_double(f.rmse) + "\n";
  out += "aggregate_mean,,,,," + fmt_double(report.pcc_summary.mean) + "," +
         fmt_double(report.scc_summary.mean) + "," +
         fmt_double(report.rmse_summary.mean) + "\n";
  out += "aggregate_stddev,,,,," + fmt_double(report.pcc_summary.stddev) +
         "," + fmt_double(report.scc_summary.stddev) + "," +
         fmt_double(report.rmse_summary.stddev) + "\n";
  out += "pooled,,,," + std::to_string(report.predictions.size()) + "," +
         fmt_double(report.pooled_pcc) + "," + fmt_double(report.pooled_scc) +
         "," + fmt_double(report.pooled_rmse) + "\n";
  for (const BreakdownRow& row : report.breakdown)
    out += "breakdown,," + row.channel + "," + row.label + "," +
           std::to_string(row.count) + "," + fmt_double(row.pcc) + "," +
           fmt_double(row.scc) + "," + fmt_double(row.rmse) + "\n";
  write_text_file(path, out);
}

void write_report_json(const EvalReport& report,
                       const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["k"] = report.k;
  doc["seed"] = report.seed;
  doc["group_by_source"] = report.group_by_source;
  doc["train_config"] = train_config_json(report.train);
  doc["leakage_audit_passed"] = report.leakage_audit_passed;

  nlohmann::ordered_json folds = nlohmann::ordered_json::array();
  for (const FoldStats& f : report.per_fold) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    fj["test_count"] = f.test_count;
    fj["pcc"] = f.pcc;
    fj["scc"] = f.scc;
    fj["rmse"] = f.rmse;
    folds.push_back(std::move(fj));
  }
  doc["folds"] = std::move(folds);

  const auto summary_json = [](const StatSummary& s) {
    nlohmann::ordered_json j;
    j["mean"] = s.mean;
    j["stddev"] = s.stddev;
    return j;
  };
  doc["aggregate"]["pcc"] = summary_json(report.pcc_summary);
  doc["aggregate"]["scc"] = summary_json(report.scc_summary);
  doc["aggregate"]["rmse"] = summary_json(report.rmse_summary);

  doc["pooled"]["count"] = report.predictions.size();
  doc["pooled"]["pcc"] = report.pooled_pcc;
  doc["pooled"]["scc"] = report.pooled_scc;
  doc["pooled"]["rmse"] = report.pooled_rmse;

  nlohmann::ordered_json breakdown = nlohmann::ordered_json::array();
  for (const BreakdownRow& row : report.breakdown) {
    nlohmann::ordered_json bj;
    bj["channel"] = row.channel;
    bj["label"] = row.label;
    bj["count"] = row.count;
    bj["pcc"] = row.pcc;
    bj["scc"] = row.scc;
    bj["rmse"] = row.rmse;
    breakdown.push_back(std::move(bj));
  }
  doc["breakdown"] = std::move(breakdown);

  nlohmann::ordered_json predictions = nlohmann::ordered_json::array();
  for (const ClipPrediction& p : report.predictions) {
    nlohmann::ordered_json pj;
    pj["id"] = p.id;
    pj["fold"] = p.fold;
    pj["predicted"] = p.predicted;
    pj["mos"] = p.mos;
    predictions.push_back(std::move(pj));
  }
  doc["predictions"] = std::move(predictions);

  write_text_file(path, doc.dump(2) + "\n");
}

std::string aggregate_line(const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "folds=%zu pcc=%.4f (std %.4f) scc=%.4f (std %.4f) "
                "rmse=%.4f (std %.4f) | pooled pcc=%.4f scc=%.4f rmse=%.4f",
                report.per_fold.size(), report.pcc_summary.mean,
                report.pcc_summary.stddev, report.scc_summary.mean,
                report.scc_summary.stddev, report.rmse_summary.mean,
                report.rmse_summary.stddev, report.pooled_pcc,
                report.pooled_scc, report.pooled_rmse);
  return std::string(buf);
}

}  // namespace avq
