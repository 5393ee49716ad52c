#include "avq/visual_features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "avq/error.hpp"
#include "avq/log.hpp"

namespace avq {

namespace {

constexpr std::string_view kModule = "visual-features";
constexpr int kKernelRadius = 6;
constexpr int kKernelSize = 2 * kKernelRadius + 1;  // 13
constexpr std::size_t kKernelTaps = kKernelSize * kKernelSize;
constexpr double kCenterFrequency = 0.25;  // cycles/pixel at the working scale
constexpr double kEnvelopeSigma = 2.24;    // 0.56 * wavelength
constexpr double kEnvelopeAspect = 0.5;

// Oriented cosine-Gabor taps, zero-mean (exact bandpass: DC response 0) and
// unit L2 per orientation. Row o holds the 13x13 kernel for angle 30*o deg,
// where the angle is the direction of the carrier wave.
struct KernelBank {
  Matrix taps{kOrientationCount, kKernelTaps};

  KernelBank() {
    for (std::size_t o = 0; o < kOrientationCount; ++o) {
      const double theta = std::numbers::pi * (30.0 * static_cast<double>(o)) / 180.0;
      const double ct = std::cos(theta);
      const double st = std::sin(theta);
      double sum = 0.0;
      std::size_t idx = 0;
      for (int y = -kKernelRadius; y <= kKernelRadius; ++y) {
        for (int x = -kKernelRadius; x <= kKernelRadius; ++x, ++idx) {
          const double u = x * ct + y * st;
          const double v = -x * st + y * ct;
          const double envelope =
              std::exp(-(u * u + kEnvelopeAspect * kEnvelopeAspect * v * v) /
                       (2.0 * kEnvelopeSigma * kEnvelopeSigma));
          const double g =
              envelope * std::cos(2.0 * std::numbers::pi * kCenterFrequency * u);
          taps(o, idx) = g;
          sum += g;
        }
      }
      const double mean = sum / static_cast<double>(kKernelTaps);
      double sq = 0.0;
      for (std::size_t i = 0; i < kKernelTaps; ++i) {
        taps(o, i) -= mean;
        sq += taps(o, i) * taps(o, i);
      }
      const double norm = std::sqrt(sq);
      for (std::size_t i = 0; i < kKernelTaps; ++i) taps(o, i) /= norm;
    }
  }
};

const KernelBank& kernel_bank() {
  static const KernelBank bank;
  return bank;
}

// reflect-101 border: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
inline std::size_t reflect(long i, long n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return static_cast<std::size_t>(i);
}

Matrix to_plane(std::span<const std::uint8_t> luma, std::size_t width,
                std::size_t height) {
  Matrix plane(height, width);
  for (std::size_t i = 0; i < luma.size(); ++i)
    plane.data()[i] = static_cast<double>(luma[i]);
  return plane;
}

// All six oriented responses of one plane, evaluated as a tap-matrix product
// over row blocks so the gather buffer stays small on large frames.
std::array<Matrix, kOrientationCount> filter_bank(const Matrix& plane) {
  const std::size_t h = plane.rows();
  const std::size_t w = plane.cols();

  // reflect lookup for x+dx, dx in [-r, r]
  std::vector<std::size_t> rx(w + 2 * kKernelRadius);
  for (long x = -kKernelRadius; x < static_cast<long>(w) + kKernelRadius; ++x)
    rx[static_cast<std::size_t>(x + kKernelRadius)] = reflect(x, static_cast<long>(w));

  std::array<Matrix, kOrientationCount> out;
  for (auto& m : out) m = Matrix(h, w);

  // Gather and response buffers persist per thread; reshaping keeps their
  // capacity, so a whole clip reuses one allocation instead of churning
  // tens of megabytes per frame.
  static thread_local Matrix cols;
  static thread_local Matrix responses;

  const std::size_t rows_per_block = std::max<std::size_t>(1, 32768 / w);
  for (std::size_t y0 = 0; y0 < h; y0 += rows_per_block) {
    const std::size_t block_rows = std::min(rows_per_block, h - y0);
    const std::size_t n = block_rows * w;
    cols.resize(kKernelTaps, n);
    responses.resize(kOrientationCount, n);
    std::size_t tap = 0;
    for (int dy = -kKernelRadius; dy <= kKernelRadius; ++dy) {
      for (int dx = -kKernelRadius; dx <= kKernelRadius; ++dx, ++tap) {
        double* dst = cols.data() + tap * n;
        for (std::size_t by = 0; by < block_rows; ++by) {
          const std::size_t sy =
              reflect(static_cast<long>(y0 + by) + dy, static_cast<long>(h));
          const double* src = plane.data() + sy * w;
          const std::size_t* xmap = rx.data() + kKernelRadius + dx;
          double* row_dst = dst + by * w;
          for (std::size_t x = 0; x < w; ++x) row_dst[x] = src[xmap[x]];
        }
      }
    }
    gemm(kernel_bank().taps, false, cols, false, responses);
    for (std::size_t o = 0; o < kOrientationCount; ++o)
      std::copy_n(responses.data() + o * n, n, out[o].data() + y0 * w);
  }
  return out;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // population
  double kurtosis = 0.0;  // m4 / m2^2
  double skewness = 0.0;  // m3 / m2^1.5
};

Moments central_moments(std::span<const double> v) {
  Moments m;
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  m.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - m.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.variance = m2;
  if (m2 > 0.0) {
    m.kurtosis = m4 / (m2 * m2);
    m.skewness = m3 / (m2 * std::sqrt(m2));
  }
  return m;
}

bool is_constant(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *lo == *hi;
}

// Pearson correlation; 0 when either side has zero variance.
double correlation_or_zero(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double sa = 0.0, sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n;
  const double mb = sb / n;
  double vab = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    vab += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return vab / std::sqrt(va * vb);
}

std::vector<double> abs_values(const Matrix& plane) {
  std::vector<double> out(plane.size());
  for (std::size_t i = 0; i < plane.size(); ++i)
    out[i] = std::fabs(plane.data()[i]);
  return out;
}

// The shape-to-moment-ratio grid. ratio(alpha) = G(1/a)G(3/a)/G(2/a)^2,
// matched against r = m2/m1^2 of the samples.
struct GgdGrid {
  std::vector<double> alpha;
  std::vector<double> ratio;

  GgdGrid() {
    for (int i = 200; i <= 10000; ++i) {
      const double a = i / 1000.0;
      alpha.push_back(a);
      ratio.push_back(std::exp(std::lgamma(1.0 / a) + std::lgamma(3.0 / a) -
                               2.0 * std::lgamma(2.0 / a)));
    }
  }
};

const GgdGrid& ggd_grid() {
  static const GgdGrid grid;
  return grid;
}

}  // namespace

Matrix box_downsample_2x(const Matrix& plane) {
  const std::size_t h = plane.rows();
  const std::size_t w = plane.cols();
  const std::size_t hh = (h + 1) / 2;
  const std::size_t hw = (w + 1) / 2;
  Matrix out(hh, hw);
  for (std::size_t y = 0; y < hh; ++y) {
    for (std::size_t x = 0; x < hw; ++x) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t dy = 0; dy < 2; ++dy) {
        for (std::size_t dx = 0; dx < 2; ++dx) {
          const std::size_t sy = 2 * y + dy;
          const std::size_t sx = 2 * x + dx;
          if (sy < h && sx < w) {
            sum += plane(sy, sx);
            ++count;
          }
        }
      }
      out(y, x) = sum / count;
    }
  }
  return out;
}

Matrix duplicate_upsample_2x(const Matrix& half, std::size_t width,
                             std::size_t height) {
  Matrix out(height, width);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) out(y, x) = half(y / 2, x / 2);
  return out;
}

SubbandDecomposition oriented_decompose(std::span<const std::uint8_t> luma,
                                        std::size_t width, std::size_t height) {
  if (width < kMinFrameDim || height < kMinFrameDim)
    throw Error(ErrorCode::FrameTooSmall, kModule,
                std::to_string(width) + "x" + std::to_string(height) +
                    " (need at least " + std::to_string(kMinFrameDim) + "x" +
                    std::to_string(kMinFrameDim) + ")");
  if (luma.size() != width * height)
    throw Error(ErrorCode::FrameTooSmall, kModule, "luma size mismatch");

  const Matrix plane = to_plane(luma, width, height);
  const Matrix half = box_downsample_2x(plane);

  SubbandDecomposition dec;
  dec.subbands[0] = filter_bank(plane);
  dec.subbands[1] = filter_bank(half);

  const Matrix recon = duplicate_upsample_2x(half, width, height);
  dec.highpass = Matrix(height, width);
  for (std::size_t i = 0; i < plane.size(); ++i)
    dec.highpass.data()[i] = plane.data()[i] - recon.data()[i];
  return dec;
}

GgdFit fit_ggd(std::span<const double> samples) {
  if (samples.size() < 64)
    throw Error(ErrorCode::DegenerateInput, kModule,
                "need at least 64 samples, got " + std::to_string(samples.size()));
  if (is_constant(samples))
    throw Error(ErrorCode::DegenerateInput, kModule, "all samples equal");

  double abs_sum = 0.0, sq_sum = 0.0;
  for (double x : samples) {
    abs_sum += std::fabs(x);
    sq_sum += x * x;
  }
  const double n = static_cast<double>(samples.size());
  const double m1 = abs_sum / n;
  const double m2 = sq_sum / n;
  if (m1 <= 0.0)
    throw Error(ErrorCode::DegenerateInput, kModule, "zero absolute moment");
  const double r = m2 / (m1 * m1);

  const GgdGrid& grid = ggd_grid();
  std::size_t best = 0;
  double best_diff = std::fabs(grid.ratio[0] - r);
  for (std::size_t i = 1; i < grid.ratio.size(); ++i) {
    const double diff = std::fabs(grid.ratio[i] - r);
    if (diff < best_diff) {
      best_diff = diff;
      best = i;
    }
  }
  return {grid.alpha[best], std::sqrt(m2)};
}

std::array<double, kNssFeatureCount> nss_features(
    std::span<const std::uint8_t> luma, std::size_t width, std::size_t height) {
  const SubbandDecomposition dec = oriented_decompose(luma, width, height);

  std::array<double, kNssFeatureCount> f{};
  std::size_t degenerate_count = 0;

  auto marginal_stats = [&](const Matrix& plane, std::size_t ggd_base,
                            std::size_t moment_base) {
    std::span<const double> coeffs(plane.data(), plane.size());
    if (is_constant(coeffs)) {
      ++degenerate_count;
      return false;
    }
    const GgdFit fit = fit_ggd(coeffs);
    f[ggd_base] = fit.alpha;
    f[ggd_base + 1] = fit.sigma;
    const Moments m = central_moments(coeffs);
    f[moment_base] = m.kurtosis;
    f[moment_base + 1] = m.skewness;
    return true;
  };

  std::array<std::array<std::vector<double>, kOrientationCount>, kScaleCount> abs_planes;
  for (std::size_t s = 0; s < kScaleCount; ++s) {
    for (std::size_t o = 0; o < kOrientationCount; ++o) {
      const std::size_t sb = s * kOrientationCount + o;
      marginal_stats(dec.subbands[s][o], 2 * sb, 24 + 2 * sb);
      abs_planes[s][o] = abs_values(dec.subbands[s][o]);
    }
  }

  // 15 orientation pairs per scale, lexicographic (i,j) with i<j
  std::size_t idx = 48;
  for (std::size_t s = 0; s < kScaleCount; ++s)
    for (std::size_t i = 0; i < kOrientationCount; ++i)
      for (std::size_t j = i + 1; j < kOrientationCount; ++j)
        f[idx++] = correlation_or_zero(abs_planes[s][i], abs_planes[s][j]);

  // across-scale correlation after 2x upsampling alignment
  for (std::size_t o = 0; o < kOrientationCount; ++o) {
    const Matrix& coarse = dec.subbands[1][o];
    Matrix coarse_abs(coarse.rows(), coarse.cols());
    for (std::size_t i = 0; i < coarse.size(); ++i)
      coarse_abs.data()[i] = std::fabs(coarse.data()[i]);
    const Matrix up = duplicate_upsample_2x(coarse_abs, width, height);
    f[78 + o] = correlation_or_zero(abs_planes[0][o],
                                    std::span<const double>(up.data(), up.size()));
  }

  marginal_stats(dec.highpass, 84, 86);

  if (degenerate_count > 0)
    log_message("visual-features: " + std::to_string(degenerate_count) +
                " degenerate subband(s), features set to 0");
  return f;
}

Matrix si_ti(const FrameSequence& video) {
  const std::size_t n = video.frame_count();
  if (n == 0) throw Error(ErrorCode::EmptyInput, kModule, "no frames");
  const std::size_t w = video.width;
  const std::size_t h = video.height;

  Matrix out(2, n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::uint8_t* frame = video.frames[t].data();

    // SI: Sobel magnitude over the interior
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    if (w >= 3 && h >= 3) {
      for (std::size_t y = 1; y + 1 < h; ++y) {
        const std::uint8_t* up = frame + (y - 1) * w;
        const std::uint8_t* mid = frame + y * w;
        const std::uint8_t* dn = frame + (y + 1) * w;
        for (std::size_t x = 1; x + 1 < w; ++x) {
          const double gx = (up[x + 1] + 2.0 * mid[x + 1] + dn[x + 1]) -
                            (up[x - 1] + 2.0 * mid[x - 1] + dn[x - 1]);
          const double gy = (dn[x - 1] + 2.0 * dn[x] + dn[x + 1]) -
                            (up[x - 1] + 2.0 * up[x] + up[x + 1]);
          const double mag = std::sqrt(gx * gx + gy * gy);
          sum += mag;
          sq += mag * mag;
          ++count;
        }
      }
    }
    if (count > 0) {
      const double mean = sum / count;
      const double var = std::max(0.0, sq / count - mean * mean);
      out(0, t) = std::sqrt(var);
    }

    // TI: stddev of the difference to the previous frame
    if (t == 0) {
      out(1, t) = 0.0;
    } else {
      const std::uint8_t* prev = video.frames[t - 1].data();
      double dsum = 0.0, dsq = 0.0;
      const std::size_t pixels = w * h;
      for (std::size_t i = 0; i < pixels; ++i) {
        const double d = static_cast<double>(frame[i]) - prev[i];
        dsum += d;
        dsq += d * d;
      }
      const double mean = dsum / pixels;
      const double var = std::max(0.0, dsq / pixels - mean * mean);
      out(1, t) = std::sqrt(var);
    }
  }
  return out;
}

VisualFeatureMatrix visual_features(const FrameSequence& video) {
  const std::size_t n = video.frame_count();
  if (n == 0) throw Error(ErrorCode::EmptyInput, kModule, "no frames");

  VisualFeatureMatrix vf;
  vf.data = Matrix(kVisualFeatureRows, n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto f = nss_features(video.frames[t], video.width, video.height);
    for (std::size_t r = 0; r < kNssFeatureCount; ++r) vf.data(r, t) = f[r];
  }
  const Matrix st = si_ti(video);
  for (std::size_t t = 0; t < n; ++t) {
    vf.data(88, t) = st(0, t);
    vf.data(89, t) = st(1, t);
  }
  return vf;
}

std::vector<std::string> visual_row_labels() {
  std::vector<std::string> labels;
  labels.reserve(kVisualFeatureRows);
  auto angle = [](std::size_t o) { return std::to_string(30 * o); };
  for (std::size_t s = 0; s < kScaleCount; ++s)
    for (std::size_t o = 0; o < kOrientationCount; ++o) {
      labels.push_back("ggd_alpha_s" + std::to_string(s + 1) + "_o" + angle(o));
      labels.push_back("ggd_sigma_s" + std::to_string(s + 1) + "_o" + angle(o));
    }
  for (std::size_t s = 0; s < kScaleCount; ++s)
    for (std::size_t o = 0; o < kOrientationCount; ++o) {
      labels.push_back("kurtosis_s" + std::to_string(s + 1) + "_o" + angle(o));
      labels.push_back("skewness_s" + std::to_string(s + 1) + "_o" + angle(o));
    }
  for (std::size_t s = 0; s < kScaleCount; ++s)
    for (std::size_t i = 0; i < kOrientationCount; ++i)
      for (std::size_t j = i + 1; j < kOrientationCount; ++j)
        labels.push_back("orient_corr_s" + std::to_string(s + 1) + "_o" +
                         angle(i) + "x" + angle(j));
  for (std::size_t o = 0; o < kOrientationCount; ++o)
    labels.push_back("scale_corr_o" + angle(o));
  labels.insert(labels.end(), {"ggd_alpha_hp", "ggd_sigma_hp", "kurtosis_hp",
                               "skewness_hp", "si", "ti"});
  return labels;
}

}  // namespace avq
