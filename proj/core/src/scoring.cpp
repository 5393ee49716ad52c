#include "avq/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "avq/audio_features.hpp"
#include "avq/error.hpp"
#include "avq/fusion.hpp"
#include "avq/visual_features.hpp"

namespace avq {

namespace {

constexpr std::string_view kModule = "scoring";
constexpr double kColumnSumTolerance = 1e-6;

void require_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw Error(ErrorCode::DimensionMismatch, kModule,
                std::to_string(x.size()) + " vs " + std::to_string(y.size()) +
                    " samples");
  if (x.size() < 2)
    throw Error(ErrorCode::EmptyInput, kModule,
                "need at least 2 samples, got " + std::to_string(x.size()));
}

// Average ranks, 1-based; tied values share the mean of their rank range.
std::vector<double> fractional_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<double> column_scores(const Matrix& probabilities) {
  const std::size_t groups = probabilities.rows();
  const std::size_t m = probabilities.cols();
  if (groups == 0 || m == 0)
    throw Error(ErrorCode::EmptyInput, kModule, "empty probability matrix");

  std::vector<double> scores(m);
  for (std::size_t j = 0; j < m; ++j) {
    double total = 0.0;
    std::size_t best = 0;
    double best_p = probabilities(0, j);
    for (std::size_t g = 0; g < groups; ++g) {
      const double p = probabilities(g, j);
      if (p < 0.0)
        throw Error(ErrorCode::NotAProbabilityColumn, kModule,
                    "column " + std::to_string(j) + " has negative entry");
      total += p;
      if (p > best_p) {  // strict: ties stay at the lowest group index
        best_p = p;
        best = g;
      }
    }
    if (std::abs(total - 1.0) > kColumnSumTolerance)
      throw Error(ErrorCode::NotAProbabilityColumn, kModule,
                  "column " + std::to_string(j) + " sums to " +
                      std::to_string(total));
    scores[j] = static_cast<double>(best + 1) + best_p;
  }
  return scores;
}

QualityScore score_features(const DeepModel& model, const Matrix& merged) {
  const Matrix probabilities = forward(model, merged);
  QualityScore score;
  score.per_column = column_scores(probabilities);
  score.value =
      std::accumulate(score.per_column.begin(), score.per_column.end(), 0.0) /
      static_cast<double>(score.per_column.size());
  return score;
}

QualityScore predict_quality(const DeepModel& model, const FrameSequence& video,
                             const AudioSignal& audio) {
  const VisualFeatureMatrix visual = visual_features(video);
  const AudioFeatureMatrix bands = spectrogram(audio);
  const AudiovisualFeatureMatrix merged = fuse_features(visual, bands);
  return score_features(model, merged.data);
}

double pcc(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw Error(ErrorCode::DegenerateVariance, kModule,
                "constant input, correlation undefined");
  return sxy / std::sqrt(sxx * syy);
}

double scc(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y);
  const std::vector<double> rx = fractional_ranks(x);
  const std::vector<double> ry = fractional_ranks(y);
  return pcc(rx, ry);
}

double rmse(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace avq
