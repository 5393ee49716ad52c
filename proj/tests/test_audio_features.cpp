#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "avq/audio_features.hpp"
#include "avq/error.hpp"
#include "test_support.hpp"

using avq::ErrorCode;
using test_support::thrown_code;

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

avq::AudioSignal tone(double freq, double amp, std::uint32_t fs,
                      std::size_t samples) {
  avq::AudioSignal s;
  s.sample_rate = fs;
  s.samples.resize(samples);
  for (std::size_t i = 0; i < samples; ++i)
    s.samples[i] = amp * std::sin(kTau * freq * static_cast<double>(i) / fs);
  return s;
}

}  // namespace

TEST_CASE("erb scale round-trips") {
  for (double hz : {50.0, 440.0, 1000.0, 4000.0, 8000.0}) {
    CHECK(avq::hz_from_erb(avq::erb_from_hz(hz)) ==
          doctest::Approx(hz).epsilon(1e-9));
  }
  CHECK(avq::erb_from_hz(0.0) == doctest::Approx(0.0));
}

TEST_CASE("band layout at 16 kHz") {
  const auto centers = avq::erb_band_centers(16000.0);
  REQUIRE(centers.size() == avq::kAudioBandCount);
  CHECK(centers.front() == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(centers.back() == doctest::Approx(7200.0).epsilon(1e-9));
  CHECK(std::is_sorted(centers.begin(), centers.end()));

  const auto edges = avq::erb_band_edges(centers);
  REQUIRE(edges.size() == centers.size() + 1);
  CHECK(std::is_sorted(edges.begin(), edges.end()));
  for (std::size_t i = 0; i < centers.size(); ++i) {
    CHECK(centers[i] > edges[i]);
    CHECK(centers[i] < edges[i + 1]);
  }
  // interior edges are geometric midpoints
  CHECK(edges[1] == doctest::Approx(std::sqrt(centers[0] * centers[1])));
  // outer edges continue the geometric ratio
  CHECK(edges[0] == doctest::Approx(centers[0] * centers[0] / edges[1]));
}

TEST_CASE("fft of an impulse is flat") {
  std::vector<std::complex<double>> buf(8, 0.0);
  buf[0] = 1.0;
  avq::fft_pow2(buf);
  for (const auto& v : buf) CHECK(std::abs(v) == doctest::Approx(1.0));
}

TEST_CASE("power spectrum concentrates a pure bin tone") {
  // power-of-two length exercises the FFT path
  {
    const std::size_t w = 16, k = 3;
    std::vector<double> frame(w);
    for (std::size_t i = 0; i < w; ++i)
      frame[i] = std::sin(kTau * static_cast<double>(k * i) / w);
    const auto power = avq::power_spectrum(frame);
    REQUIRE(power.size() == w / 2 + 1);
    CHECK(power[k] == doctest::Approx(64.0).epsilon(1e-9));  // (w/2)^2
    for (std::size_t i = 0; i < power.size(); ++i)
      if (i != k) CHECK(power[i] < 1e-18);
  }
  // non-power-of-two exercises the direct path
  {
    const std::size_t w = 12, k = 2;
    std::vector<double> frame(w);
    for (std::size_t i = 0; i < w; ++i)
      frame[i] = std::sin(kTau * static_cast<double>(k * i) / w);
    const auto power = avq::power_spectrum(frame);
    CHECK(power[k] == doctest::Approx(36.0).epsilon(1e-9));
    CHECK(power[0] < 1e-18);
  }
  // DC
  const auto dc = avq::power_spectrum(std::vector<double>(4, 1.0));
  CHECK(dc[0] == doctest::Approx(16.0));
  CHECK(dc[1] < 1e-20);
}

TEST_CASE("spectrogram framing at 16 kHz") {
  const avq::AudioFeatureMatrix out = avq::spectrogram(tone(440.0, 0.5, 16000, 1600));
  // window round(0.032*16000) = 512, hop 256, frames (1600-512)/256+1 = 5
  CHECK(out.data.rows() == avq::kAudioBandCount);
  CHECK(out.data.cols() == 5);
  REQUIRE(out.band_centers_hz.size() == avq::kAudioBandCount);
}

TEST_CASE("loudest cell is the 0 dB anchor and the floor holds") {
  const avq::AudioFeatureMatrix out =
      avq::spectrogram(tone(1000.0, 0.5, 16000, 8000));
  double max_cell = -1e9;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double v = out.data.data()[i];
    CHECK(v <= 0.0);
    CHECK(v >= avq::kSpectrogramFloorDb);
    max_cell = std::max(max_cell, v);
  }
  CHECK(max_cell == doctest::Approx(0.0));
}

TEST_CASE("digital silence maps to the all-floor matrix") {
  avq::AudioSignal s;
  s.sample_rate = 16000;
  s.samples.assign(4000, 0.0);
  const avq::AudioFeatureMatrix out = avq::spectrogram(s);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    CHECK(out.data.data()[i] == avq::kSpectrogramFloorDb);
}

TEST_CASE("a tone peaks in its enclosing band") {
  const auto centers = avq::erb_band_centers(16000.0);
  for (const std::size_t target : {5ul, 12ul, 20ul}) {
    const avq::AudioFeatureMatrix out =
        avq::spectrogram(tone(centers[target], 0.5, 16000, 8000));
    // find the band holding the maximum of the middle column
    const std::size_t t = out.data.cols() / 2;
    std::size_t argmax = 0;
    for (std::size_t b = 1; b < avq::kAudioBandCount; ++b)
      if (out.data(b, t) > out.data(argmax, t)) argmax = b;
    CHECK(argmax == target);
  }
}

TEST_CASE("hop-aligned shift moves columns by one") {
  // burst in the middle anchors the normalization away from the edges
  avq::AudioSignal x;
  x.sample_rate = 16000;
  x.samples.resize(4096);
  for (std::size_t i = 0; i < x.samples.size(); ++i) {
    const double t = static_cast<double>(i);
    double v = 0.05 * std::sin(kTau * 300.0 * t / 16000.0);
    if (i >= 2000 && i < 2400) v += 0.9 * std::sin(kTau * 1500.0 * t / 16000.0);
    x.samples[i] = v;
  }
  avq::AudioSignal y;
  y.sample_rate = 16000;
  y.samples.assign(x.samples.begin() + 256, x.samples.end());  // one hop

  const avq::AudioFeatureMatrix sx = avq::spectrogram(x);
  const avq::AudioFeatureMatrix sy = avq::spectrogram(y);
  REQUIRE(sy.data.cols() == sx.data.cols() - 1);
  for (std::size_t b = 0; b < avq::kAudioBandCount; ++b)
    for (std::size_t t = 0; t < sy.data.cols(); ++t)
      CHECK(sy.data(b, t) == sx.data(b, t + 1));
}

TEST_CASE("short or empty signals are rejected") {
  CHECK(thrown_code([] { avq::spectrogram(tone(440.0, 0.5, 16000, 100)); }) ==
        ErrorCode::SignalTooShort);
  avq::AudioSignal zero_rate;
  zero_rate.samples.assign(1000, 0.1);
  CHECK(thrown_code([&] { avq::spectrogram(zero_rate); }) ==
        ErrorCode::SignalTooShort);
}
