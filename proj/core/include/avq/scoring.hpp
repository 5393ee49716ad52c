#pragma once

#include <span>
#include <vector>

#include "avq/matrix.hpp"
#include "avq/media_io.hpp"
#include "avq/neural.hpp"

namespace avq {

struct QualityScore {
  double value = 0.0;              // mean of per_column, in [1.25, 5]
  std::vector<double> per_column;  // one score per analysis frame
};

// Index-plus-max rule: for each probability column, score = 1-based argmax
// group index + that group's probability. Ties go to the lowest group.
// Columns must be nonnegative and sum to 1 within 1e-6.
std::vector<double> column_scores(const Matrix& probabilities);

// Full clip pipeline: features -> fusion -> network -> column scores -> mean.
QualityScore predict_quality(const DeepModel& model, const FrameSequence& video,
                             const AudioSignal& audio);

// Same pipeline starting from an already-merged 115-row feature matrix.
QualityScore score_features(const DeepModel& model, const Matrix& merged);

// Pearson correlation; throws DegenerateVariance when either input is constant.
double pcc(std::span<const double> x, std::span<const double> y);

// Spearman rank correlation with average ranks for ties.
double scc(std::span<const double> x, std::span<const double> y);

double rmse(std::span<const double> x, std::span<const double> y);

}  // namespace avq
