#pragma once

#include <complex>
#include <vector>

#include "avq/matrix.hpp"
#include "avq/media_io.hpp"

namespace avq {

inline constexpr std::size_t kAudioBandCount = 25;
inline constexpr double kSpectrogramFloorDb = -80.0;
inline constexpr double kSpectrogramWindowSeconds = 0.032;

// 25 x m band-energy matrix in dB, normalized so the loudest cell is 0 dB
// and everything is clamped at the -80 dB floor. A fully silent signal maps
// to the all-floor matrix.
struct AudioFeatureMatrix {
  Matrix data;
  std::vector<double> band_centers_hz;  // 25 ERB-spaced centers
};

// Framing: window W = round(0.032*fs), hop W/2, periodic Hann,
// m = floor((N-W)/H)+1 frames.
AudioFeatureMatrix spectrogram(const AudioSignal& signal);

// Band layout for a given sample rate (exposed for dumps and tests):
// 25 centers equally spaced on the ERB scale between 50 Hz and
// min(8000, 0.45*fs) Hz; rectangular edges at geometric midpoints, with the
// outer edges extrapolated at the same geometric ratio.
std::vector<double> erb_band_centers(double sample_rate);
std::vector<double> erb_band_edges(const std::vector<double>& centers);

double erb_from_hz(double hz);
double hz_from_erb(double erb);

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_pow2(std::vector<std::complex<double>>& buf);

// One-sided power spectrum |X_k|^2, k = 0..W/2, of a real windowed frame.
// Radix-2 when the length is a power of two, direct DFT otherwise.
std::vector<double> power_spectrum(std::span<const double> frame);

}  // namespace avq
