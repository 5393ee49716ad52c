#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avq/matrix.hpp"
#include "avq/media_io.hpp"

namespace avq {

inline constexpr std::size_t kOrientationCount = 6;   // 0,30,...,150 degrees
inline constexpr std::size_t kScaleCount = 2;         // dyadic
inline constexpr std::size_t kSubbandCount = kOrientationCount * kScaleCount;
inline constexpr std::size_t kNssFeatureCount = 88;
inline constexpr std::size_t kVisualFeatureRows = 90;  // 88 NSS + SI + TI
inline constexpr std::size_t kMinFrameDim = 32;

// Marginal generalized-Gaussian fit of a coefficient histogram.
// alpha is the shape (2 = Gaussian, 1 = Laplacian), sigma = sqrt(E[x^2]).
struct GgdFit {
  double alpha = 0.0;
  double sigma = 0.0;
};

// Bandpass coefficient planes: 6 orientations at 2 dyadic scales plus the
// highpass residual (frame minus its 2x low-pass reconstruction).
// Scale 0 planes match the frame size; scale 1 planes are computed on the
// 2x box-downsampled frame.
struct SubbandDecomposition {
  std::array<std::array<Matrix, kOrientationCount>, kScaleCount> subbands;
  Matrix highpass;
};

// 90 x n feature matrix for one clip. Row layout (0-based):
//   [0,24)   per subband (scale-major, orientation-minor): GGD alpha, sigma
//   [24,48)  per subband: kurtosis, skewness
//   [48,78)  per scale, the 15 orientation pairs (i<j): Pearson corr of |coeff|
//   [78,84)  per orientation: across-scale corr of |coeff| (scale 1 upsampled)
//   [84,88)  highpass residual: GGD alpha, sigma, kurtosis, skewness
//   88       SI, 89 TI
struct VisualFeatureMatrix {
  Matrix data;
};

std::vector<std::string> visual_row_labels();

SubbandDecomposition oriented_decompose(std::span<const std::uint8_t> luma,
                                        std::size_t width, std::size_t height);

// Moment-matching fit over the shape grid alpha in {0.200, 0.201, ..., 10.000}.
GgdFit fit_ggd(std::span<const double> samples);

std::array<double, kNssFeatureCount> nss_features(
    std::span<const std::uint8_t> luma, std::size_t width, std::size_t height);

// Row 0: SI(t), population stddev of the 3x3 Sobel gradient magnitude
// (border excluded). Row 1: TI(t), population stddev of the frame difference;
// TI of the first frame is 0.
Matrix si_ti(const FrameSequence& video);

VisualFeatureMatrix visual_features(const FrameSequence& video);

// 2x box downsample / nearest upsample used by the dyadic decomposition.
Matrix box_downsample_2x(const Matrix& plane);
Matrix duplicate_upsample_2x(const Matrix& half, std::size_t width,
                             std::size_t height);

}  // namespace avq
