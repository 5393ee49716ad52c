#include "avq/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "avq/error.hpp"

namespace avq {

namespace {
constexpr std::string_view kModule = "fusion";
}

Matrix align_replicate(const Matrix& matrix, std::size_t target_cols) {
  const std::size_t n = matrix.cols();
  if (n == target_cols) return matrix;
  Matrix out(matrix.rows(), target_cols);
  for (std::size_t j = 0; j < target_cols; ++j) {
    const std::size_t src = (j * n) / target_cols;
    for (std::size_t r = 0; r < matrix.rows(); ++r) out(r, j) = matrix(r, src);
  }
  return out;
}

AudiovisualFeatureMatrix merge(const Matrix& visual_aligned, const Matrix& audio) {
  if (visual_aligned.rows() != kVisualFeatureRows)
    throw Error(ErrorCode::RowCountMismatch, kModule,
                "visual matrix has " + std::to_string(visual_aligned.rows()) +
                    " rows, expected " + std::to_string(kVisualFeatureRows));
  if (audio.rows() != kAudioBandCount)
    throw Error(ErrorCode::RowCountMismatch, kModule,
                "audio matrix has " + std::to_string(audio.rows()) +
                    " rows, expected " + std::to_string(kAudioBandCount));
  if (visual_aligned.cols() != audio.cols())
    throw Error(ErrorCode::ColumnCountMismatch, kModule,
                std::to_string(visual_aligned.cols()) + " visual vs " +
                    std::to_string(audio.cols()) + " audio columns");

  AudiovisualFeatureMatrix out;
  out.data = Matrix(kMergedFeatureRows, audio.cols());
  for (std::size_t r = 0; r < kVisualFeatureRows; ++r)
    std::copy_n(visual_aligned.row(r).data(), visual_aligned.cols(),
                out.data.row(r).data());
  for (std::size_t r = 0; r < kAudioBandCount; ++r)
    std::copy_n(audio.row(r).data(), audio.cols(),
                out.data.row(kVisualFeatureRows + r).data());
  return out;
}

AudiovisualFeatureMatrix fuse_features(const VisualFeatureMatrix& visual,
                                       const AudioFeatureMatrix& audio) {
  return merge(align_replicate(visual.data, audio.data.cols()), audio.data);
}

int quality_group(double mos) {
  if (mos < 1.0 || mos > 5.0)
    throw Error(ErrorCode::MosOutOfRange, kModule,
                std::to_string(mos) + " outside [1,5]");
  return std::min(static_cast<int>(std::floor(mos)), 4);
}

TargetMatrix build_target(double mos, std::size_t columns) {
  const int group = quality_group(mos);
  TargetMatrix t;
  t.data = Matrix(kQualityGroupCount, columns);
  for (std::size_t j = 0; j < columns; ++j)
    t.data(static_cast<std::size_t>(group - 1), j) = 1.0;
  return t;
}

GlobalTrainingSet assemble_global(const std::vector<ClipTrainingData>& clips) {
  if (clips.empty())
    throw Error(ErrorCode::EmptyInput, kModule, "no clips to assemble");

  std::size_t total = 0;
  for (const auto& clip : clips) {
    if (clip.features.data.cols() != clip.targets.data.cols())
      throw Error(ErrorCode::PerClipMismatch, kModule,
                  "clip '" + clip.id + "': " +
                      std::to_string(clip.features.data.cols()) +
                      " feature vs " + std::to_string(clip.targets.data.cols()) +
                      " target columns");
    total += clip.features.data.cols();
  }

  GlobalTrainingSet global;
  global.features = Matrix(kMergedFeatureRows, total);
  global.targets = Matrix(kQualityGroupCount, total);
  global.provenance.reserve(total);

  std::size_t offset = 0;
  for (const auto& clip : clips) {
    const std::size_t m = clip.features.data.cols();
    for (std::size_t r = 0; r < kMergedFeatureRows; ++r)
      std::copy_n(clip.features.data.row(r).data(), m,
                  global.features.row(r).data() + offset);
    for (std::size_t r = 0; r < kQualityGroupCount; ++r)
      std::copy_n(clip.targets.data.row(r).data(), m,
                  global.targets.row(r).data() + offset);
    for (std::size_t j = 0; j < m; ++j) global.provenance.push_back(clip.id);
    offset += m;
  }
  return global;
}

Scaler fit_scaler(const Matrix& features) {
  if (features.cols() < 2)
    throw Error(ErrorCode::EmptyInput, kModule,
                "need at least 2 columns to fit the scaler, got " +
                    std::to_string(features.cols()));
  Scaler s;
  s.row_min.resize(features.rows());
  s.row_max.resize(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto row = features.row(r);
    const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    s.row_min[r] = *lo;
    s.row_max[r] = *hi;
  }
  return s;
}

Matrix apply_scaler(const Scaler& scaler, const Matrix& features) {
  if (features.rows() != scaler.row_min.size())
    throw Error(ErrorCode::RowCountMismatch, kModule,
                std::to_string(features.rows()) + " rows vs scaler fitted on " +
                    std::to_string(scaler.row_min.size()));
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const double lo = scaler.row_min[r];
    const double range = scaler.row_max[r] - lo;
    for (std::size_t j = 0; j < features.cols(); ++j) {
      if (range <= 0.0) {
        out(r, j) = 0.0;
      } else {
        out(r, j) = std::clamp((features(r, j) - lo) / range, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace avq
