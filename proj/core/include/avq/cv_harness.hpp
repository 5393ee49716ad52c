#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "avq/fusion.hpp"
#include "avq/media_io.hpp"
#include "avq/neural.hpp"

namespace avq {

struct FoldStats {
  std::size_t fold = 0;
  std::size_t test_count = 0;
  double pcc = 0.0;  // NaN when undefined (constant pairs within the fold)
  double scc = 0.0;
  double rmse = 0.0;
};

struct StatSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation across folds
};

struct BreakdownRow {
  std::string channel;  // "video" or "audio"
  std::string label;    // distortion kind, including "none"
  std::size_t count = 0;
  double pcc = 0.0;  // NaN when undefined (too few or constant pairs)
  double scc = 0.0;
  double rmse = 0.0;
};

struct ClipPrediction {
  std::string id;
  std::size_t fold = 0;
  double predicted = 0.0;
  double mos = 0.0;
};

struct CvConfig {
  std::size_t k = 10;
  std::uint64_t seed = 1;
  bool group_by_source = false;
  std::size_t jobs = 1;
  TrainConfig train;
};

struct EvalReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool group_by_source = false;
  TrainConfig train;
  std::vector<FoldStats> per_fold;
  StatSummary pcc_summary;
  StatSummary scc_summary;
  StatSummary rmse_summary;
  double pooled_pcc = 0.0;  // statistics over all test predictions at once
  double pooled_scc = 0.0;
  double pooled_rmse = 0.0;
  std::vector<BreakdownRow> breakdown;
  std::vector<ClipPrediction> predictions;
  bool leakage_audit_passed = false;
};

// Seeded shuffle, then contiguous partitions whose sizes differ by at most
// one (the first entry_count % k folds take the extra element).
std::vector<std::vector<std::size_t>> kfold_split(std::size_t entry_count,
                                                  std::size_t k,
                                                  std::uint64_t seed);

// Same contract, but all entries sharing a source id (the id prefix before
// its last '-', or the whole id) land in one fold; groups are dealt to the
// currently smallest fold, largest group first.
std::vector<std::vector<std::size_t>> kfold_split_grouped(
    const DatasetManifest& manifest, std::size_t k, std::uint64_t seed);

// Loads every clip and runs the feature pipeline once; `jobs` caps parallel
// extraction workers.
std::vector<ClipTrainingData> extract_clip_features(
    const DatasetManifest& manifest, std::size_t jobs = 1);

// Statistics/bookkeeping half of the harness: predicted[i] pairs with
// manifest entry i.  Computes per-fold, aggregate, pooled, and per-label
// statistics.  Exposed separately so it can be fed oracle predictions.
EvalReport build_report(const DatasetManifest& manifest,
                        const std::vector<std::vector<std::size_t>>& folds,
                        const std::vector<double>& predicted);

// Full k-fold cross-validation: per fold, train on the other folds only and
// predict the held-out clips.  Also runs the leakage audit (no test id may
// appear in the fold's training provenance).
EvalReport run_cv(const DatasetManifest& manifest, const CvConfig& cfg);

void write_report_csv(const EvalReport& report,
                      const std::filesystem::path& path);
void write_report_json(const EvalReport& report,
                       const std::filesystem::path& path);

// One-line human summary for the terminal.
std::string aggregate_line(const EvalReport& report);

}  // namespace avq
