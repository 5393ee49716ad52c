#include "avq/audio_features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "avq/error.hpp"

namespace avq {

namespace {

constexpr std::string_view kModule = "audio-features";
constexpr double kLogEpsilon = 1e-12;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

double erb_from_hz(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }

double hz_from_erb(double erb) {
  return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437;
}

std::vector<double> erb_band_centers(double sample_rate) {
  const double lo = 50.0;
  const double hi = std::min(8000.0, sample_rate * 0.5 * 0.9);
  const double erb_lo = erb_from_hz(lo);
  const double erb_hi = erb_from_hz(hi);
  std::vector<double> centers(kAudioBandCount);
  for (std::size_t i = 0; i < kAudioBandCount; ++i) {
    const double e = erb_lo + (erb_hi - erb_lo) * static_cast<double>(i) /
                                  static_cast<double>(kAudioBandCount - 1);
    centers[i] = hz_from_erb(e);
  }
  return centers;
}

std::vector<double> erb_band_edges(const std::vector<double>& centers) {
  std::vector<double> edges(centers.size() + 1);
  for (std::size_t i = 1; i < centers.size(); ++i)
    edges[i] = std::sqrt(centers[i - 1] * centers[i]);
  // outer edges continue the geometric spacing of the first/last gap
  edges.front() = centers.front() * centers.front() / edges[1];
  edges.back() = centers.back() * centers.back() / edges[centers.size() - 1];
  return edges;
}

void fft_pow2(std::vector<std::complex<double>>& buf) {
  const std::size_t n = buf.size();
  if (n < 2) return;
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(buf[i], buf[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = buf[i + k];
        const std::complex<double> v = buf[i + k + len / 2] * w;
        buf[i + k] = u + v;
        buf[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<double> power_spectrum(std::span<const double> frame) {
  const std::size_t w = frame.size();
  const std::size_t bins = w / 2 + 1;
  std::vector<double> power(bins);
  if (is_pow2(w)) {
    std::vector<std::complex<double>> buf(w);
    for (std::size_t i = 0; i < w; ++i) buf[i] = frame[i];
    fft_pow2(buf);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
  } else {
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      const double step = -2.0 * std::numbers::pi * static_cast<double>(k) /
                          static_cast<double>(w);
      for (std::size_t i = 0; i < w; ++i) {
        const double a = step * static_cast<double>(i);
        re += frame[i] * std::cos(a);
        im += frame[i] * std::sin(a);
      }
      power[k] = re * re + im * im;
    }
  }
  return power;
}

AudioFeatureMatrix spectrogram(const AudioSignal& signal) {
  if (signal.sample_rate == 0)
    throw Error(ErrorCode::SignalTooShort, kModule, "zero sample rate");
  const double fs = static_cast<double>(signal.sample_rate);
  const std::size_t window =
      static_cast<std::size_t>(std::lround(kSpectrogramWindowSeconds * fs));
  const std::size_t hop = window / 2;
  const std::size_t n = signal.samples.size();
  if (window < 2 || n < window)
    throw Error(ErrorCode::SignalTooShort, kModule,
                std::to_string(n) + " samples, need one " +
                    std::to_string(window) + "-sample window");
  const std::size_t frames = (n - window) / hop + 1;

  // periodic Hann
  std::vector<double> hann(window);
  for (std::size_t i = 0; i < window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi *
                                   static_cast<double>(i) /
                                   static_cast<double>(window));

  AudioFeatureMatrix out;
  out.band_centers_hz = erb_band_centers(fs);
  const std::vector<double> edges = erb_band_edges(out.band_centers_hz);
  out.data = Matrix(kAudioBandCount, frames);

  // DFT bin k sits at k*fs/window; assign each to its enclosing band
  const std::size_t bins = window / 2 + 1;
  std::vector<int> bin_band(bins, -1);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(window);
    if (f < edges.front() || f >= edges.back()) continue;
    const auto it = std::upper_bound(edges.begin(), edges.end(), f);
    bin_band[k] = static_cast<int>(it - edges.begin()) - 1;
  }

  std::vector<double> windowed(window);
  double max_energy = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = signal.samples.data() + t * hop;
    for (std::size_t i = 0; i < window; ++i) windowed[i] = src[i] * hann[i];
    const std::vector<double> power = power_spectrum(windowed);
    for (std::size_t k = 0; k < bins; ++k)
      if (bin_band[k] >= 0)
        out.data(static_cast<std::size_t>(bin_band[k]), t) += power[k];
    for (std::size_t b = 0; b < kAudioBandCount; ++b)
      max_energy = std::max(max_energy, out.data(b, t));
  }

  if (max_energy <= 0.0) {
    // digital silence: no anchor to normalize against, emit the floor
    for (std::size_t i = 0; i < out.data.size(); ++i)
      out.data.data()[i] = kSpectrogramFloorDb;
    return out;
  }

  const double ref_db = 10.0 * std::log10(max_energy + kLogEpsilon);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double db = 10.0 * std::log10(out.data.data()[i] + kLogEpsilon);
    out.data.data()[i] = std::max(db - ref_db, kSpectrogramFloorDb);
  }
  return out;
}

}  // namespace avq
