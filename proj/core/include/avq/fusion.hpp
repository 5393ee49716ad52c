#pragma once

#include <string>
#include <vector>

#include "avq/audio_features.hpp"
#include "avq/matrix.hpp"
#include "avq/visual_features.hpp"

namespace avq {

inline constexpr std::size_t kMergedFeatureRows = 115;  // 90 visual + 25 audio
inline constexpr std::size_t kQualityGroupCount = 4;

// 115 x m merged feature set; rows [0,90) visual, [90,115) audio.
struct AudiovisualFeatureMatrix {
  Matrix data;
};

// 4 x m one-hot quality groups; every column has exactly one 1.
struct TargetMatrix {
  Matrix data;
};

// Concatenation of all clips' features and targets, column provenance kept
// for fold bookkeeping and leakage audits.
struct GlobalTrainingSet {
  Matrix features;                    // 115 x M
  Matrix targets;                     // 4 x M
  std::vector<std::string> provenance;  // clip id per column
};

// Per-row min/max normalization into [0,1]; fitted on training data only and
// persisted with the model. Constant rows map to 0; inference clamps.
struct Scaler {
  std::vector<double> row_min;
  std::vector<double> row_max;
};

// Column j of the output copies input column floor(j*n/m). Replicates when
// n < m, degrades to subsampling when n > m.
Matrix align_replicate(const Matrix& matrix, std::size_t target_cols);

AudiovisualFeatureMatrix merge(const Matrix& visual_aligned, const Matrix& audio);
AudiovisualFeatureMatrix fuse_features(const VisualFeatureMatrix& visual,
                                       const AudioFeatureMatrix& audio);

// MOS interval -> group: [1,2)->1, [2,3)->2, [3,4)->3, [4,5]->4.
int quality_group(double mos);
TargetMatrix build_target(double mos, std::size_t columns);

struct ClipTrainingData {
  AudiovisualFeatureMatrix features;
  TargetMatrix targets;
  std::string id;
};

GlobalTrainingSet assemble_global(const std::vector<ClipTrainingData>& clips);

Scaler fit_scaler(const Matrix& features);
Matrix apply_scaler(const Scaler& scaler, const Matrix& features);

}  // namespace avq
