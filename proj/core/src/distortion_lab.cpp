#include "avq/distortion_lab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "avq/error.hpp"
#include "avq/log.hpp"

namespace avq {

namespace {

constexpr std::string_view kModule = "distortion-lab";
constexpr std::uint32_t kBlockSize = 16;

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

FrameSequence video_noise(const FrameSequence& frames, double severity,
                          Rng& rng) {
  FrameSequence out = frames;
  const double sigma = 40.0 * severity;
  for (auto& frame : out.frames)
    for (auto& px : frame)
      px = to_byte(static_cast<double>(px) + rng.gaussian() * sigma);
  return out;
}

FrameSequence video_blur(const FrameSequence& frames, double severity) {
  const long radius = std::lround(4.0 * severity);
  if (radius <= 0) return frames;
  FrameSequence out = frames;
  const std::size_t w = frames.width;
  const std::size_t h = frames.height;
  std::vector<double> tmp(w * h);
  for (std::size_t f = 0; f < frames.frame_count(); ++f) {
    const auto& src = frames.frames[f];
    auto& dst = out.frames[f];
    // Horizontal then vertical box mean; windows truncate at the borders.
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t x0 =
            x >= static_cast<std::size_t>(radius) ? x - radius : 0;
        const std::size_t x1 = std::min(w - 1, x + radius);
        double acc = 0.0;
        for (std::size_t k = x0; k <= x1; ++k) acc += src[y * w + k];
        tmp[y * w + x] = acc / static_cast<double>(x1 - x0 + 1);
      }
    }
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t y0 =
          y >= static_cast<std::size_t>(radius) ? y - radius : 0;
      const std::size_t y1 = std::min(h - 1, y + radius);
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t k = y0; k <= y1; ++k) acc += tmp[k * w + x];
        dst[y * w + x] = to_byte(acc / static_cast<double>(y1 - y0 + 1));
      }
    }
  }
  return out;
}

FrameSequence video_freeze(const FrameSequence& frames, double severity) {
  const std::size_t n = frames.frame_count();
  if (n < 2) return frames;
  std::size_t drop =
      static_cast<std::size_t>(std::lround(severity * static_cast<double>(n)));
  drop = std::min(drop, n - 1);
  const std::size_t keep = n - drop;

  // Retain `keep` frames spread across the clip, then stretch them back to n
  // frames; exactly `drop` output frames equal their predecessor bit for bit.
  std::vector<std::size_t> retained(keep);
  for (std::size_t i = 0; i < keep; ++i) retained[i] = (i * n) / keep;

  FrameSequence out = frames;
  for (std::size_t j = 0; j < n; ++j)
    out.frames[j] = frames.frames[retained[(j * keep) / n]];
  return out;
}

FrameSequence video_blockloss(const FrameSequence& frames, double severity,
                              Rng& rng) {
  const std::size_t w = frames.width;
  const std::size_t h = frames.height;
  const std::size_t blocks_x = (w + kBlockSize - 1) / kBlockSize;
  const std::size_t blocks_y = (h + kBlockSize - 1) / kBlockSize;
  const std::size_t block_count = blocks_x * blocks_y;
  const std::size_t corrupt = static_cast<std::size_t>(
      std::lround(severity * static_cast<double>(block_count)));
  if (corrupt == 0) return frames;

  FrameSequence out = frames;
  const std::vector<std::uint8_t> gray(w * h, 128);
  std::vector<std::size_t> ids(block_count);
  for (std::size_t f = 0; f < frames.frame_count(); ++f) {
    // Lost blocks show the co-located content of the previously emitted
    // (already degraded) frame, the way a decoder conceals missing data.
    const std::vector<std::uint8_t>& prev = f == 0 ? gray : out.frames[f - 1];
    auto& dst = out.frames[f];
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    for (std::size_t k = 0; k < corrupt; ++k) {
      std::swap(ids[k], ids[k + rng.below(block_count - k)]);
      const std::size_t bx = (ids[k] % blocks_x) * kBlockSize;
      const std::size_t by = (ids[k] / blocks_x) * kBlockSize;
      for (std::size_t y = by; y < std::min(by + kBlockSize, h); ++y)
        for (std::size_t x = bx; x < std::min(bx + kBlockSize, w); ++x)
          dst[y * w + x] = prev[y * w + x];
    }
  }
  return out;
}

AudioSignal audio_background_noise(const AudioSignal& signal, double severity,
                                   Rng& rng) {
  double power = 0.0;
  for (double s : signal.samples) power += s * s;
  power /= static_cast<double>(std::max<std::size_t>(1, signal.samples.size()));
  if (power <= 0.0) return signal;  // nothing to scale the noise against

  const double snr_db = 40.0 - 35.0 * severity;
  const double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  AudioSignal out = signal;
  for (double& s : out.samples)
    s = std::clamp(s + rng.gaussian() * noise_std, -1.0, 1.0);
  return out;
}

AudioSignal audio_chop(const AudioSignal& signal, double severity) {
  const long segment = std::max(1L, std::lround(0.020 * signal.sample_rate));
  const long period =
      std::max(segment, std::lround(static_cast<double>(segment) / severity));
  AudioSignal out = signal;
  for (std::size_t t = 0; t < out.samples.size(); ++t)
    if (static_cast<long>(t % static_cast<std::size_t>(period)) < segment)
      out.samples[t] = 0.0;
  return out;
}

AudioSignal audio_clip(const AudioSignal& signal, double severity) {
  const double threshold = 1.0 - 0.9 * severity;
  AudioSignal out = signal;
  for (double& s : out.samples) s = std::clamp(s, -threshold, threshold);
  return out;
}

AudioSignal audio_echo(const AudioSignal& signal, double severity) {
  const std::size_t delay = static_cast<std::size_t>(
      std::lround((0.1 + 0.2 * severity) * signal.sample_rate));
  const double gain = 0.8 * severity;
  AudioSignal out = signal;
  for (std::size_t t = delay; t < out.samples.size(); ++t)
    out.samples[t] = std::clamp(
        signal.samples[t] + gain * signal.samples[t - delay], -1.0, 1.0);
  return out;
}

void require_severity(double severity) {
  if (!(severity >= 0.0 && severity <= 1.0))
    throw std::invalid_argument("distortion severity must be in [0, 1]");
}

}  // namespace

FrameSequence degrade_video(const FrameSequence& frames,
                            const DistortionSpec& spec, Rng& rng) {
  require_severity(spec.severity);
  if (spec.severity == 0.0 || spec.kind == "none") return frames;
  if (spec.kind == "noise") return video_noise(frames, spec.severity, rng);
  if (spec.kind == "blur") return video_blur(frames, spec.severity);
  if (spec.kind == "freeze") return video_freeze(frames, spec.severity);
  if (spec.kind == "blockloss")
    return video_blockloss(frames, spec.severity, rng);
  throw Error(ErrorCode::UnknownKind, kModule,
              "video distortion '" + spec.kind + "'");
}

AudioSignal degrade_audio(const AudioSignal& signal, const DistortionSpec& spec,
                          Rng& rng) {
  require_severity(spec.severity);
  if (spec.severity == 0.0 || spec.kind == "none") return signal;
  if (spec.kind == "background_noise")
    return audio_background_noise(signal, spec.severity, rng);
  if (spec.kind == "chop") return audio_chop(signal, spec.severity);
  if (spec.kind == "clip") return audio_clip(signal, spec.severity);
  if (spec.kind == "echo") return audio_echo(signal, spec.severity);
  throw Error(ErrorCode::UnknownKind, kModule,
              "audio distortion '" + spec.kind + "'");
}

double pseudo_mos(double severity_video, double severity_audio) {
  const double combined =
      1.0 - (1.0 - severity_video) * (1.0 - severity_audio);
  return std::clamp(5.0 - 4.0 * combined, 1.0, 5.0);
}

FrameSequence synth_source_video(const SynthConfig& cfg, Rng& rng) {
  FrameSequence video;
  video.width = cfg.width;
  video.height = cfg.height;
  video.fps_num = cfg.fps_num;
  video.fps_den = cfg.fps_den;
  const std::size_t frame_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(
             cfg.duration_seconds * cfg.fps_num / cfg.fps_den)));

  const std::size_t w = cfg.width;
  const std::size_t h = cfg.height;
  const std::size_t pixels = w * h;
  constexpr std::size_t kGratings = 3;
  constexpr double kTau = 2.0 * std::numbers::pi;

  // Canonical drifting-grating family: orientation, frequency, amplitude and
  // drift rate are fixed so every pristine clip shares the same feature
  // statistics; only the phases and the texture realization vary per clip.
  // Distortions then move the features in consistent directions instead of
  // competing with content variation.
  struct GratingSpec {
    double theta_deg, freq, amp, step;
  };
  static constexpr std::array<GratingSpec, kGratings> kFamily{{
      {0.0, 0.05, 30.0, 0.55},
      {60.0, 0.11, 24.0, -0.80},
      {120.0, 0.19, 18.0, 1.05},
  }};

  // Each grating drifts by a fixed phase step per frame. The per-pixel phase
  // is fixed, so sin/cos are precomputed once and rotated per frame.
  struct Grating {
    double amp, step;
    std::vector<double> sin_base, cos_base;
  };
  std::vector<Grating> gratings(kGratings);
  for (std::size_t gi = 0; gi < kGratings; ++gi) {
    Grating& g = gratings[gi];
    const GratingSpec& spec = kFamily[gi];
    const double theta = spec.theta_deg * std::numbers::pi / 180.0;
    const double fx = spec.freq * std::cos(theta);
    const double fy = spec.freq * std::sin(theta);
    g.amp = spec.amp;
    g.step = spec.step;
    const double phase = rng.uniform(0.0, kTau);
    g.sin_base.resize(pixels);
    g.cos_base.resize(pixels);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double a = kTau * (fx * static_cast<double>(x) +
                                 fy * static_cast<double>(y)) +
                         phase;
        g.sin_base[y * w + x] = std::sin(a);
        g.cos_base[y * w + x] = std::cos(a);
      }
  }

  constexpr double texture_amp = 8.0;
  std::vector<double> texture(pixels);
  for (double& t : texture) t = rng.uniform(-texture_amp, texture_amp);

  video.frames.reserve(frame_count);
  std::vector<double> plane(pixels);
  for (std::size_t f = 0; f < frame_count; ++f) {
    std::copy(texture.begin(), texture.end(), plane.begin());
    for (const Grating& g : gratings) {
      const double c = std::cos(g.step * static_cast<double>(f));
      const double s = std::sin(g.step * static_cast<double>(f));
      for (std::size_t i = 0; i < pixels; ++i)
        plane[i] += g.amp * (g.sin_base[i] * c + g.cos_base[i] * s);
    }
    std::vector<std::uint8_t> frame(pixels);
    for (std::size_t i = 0; i < pixels; ++i) frame[i] = to_byte(128.0 + plane[i]);
    video.frames.push_back(std::move(frame));
  }
  return video;
}

AudioSignal synth_source_audio(const SynthConfig& cfg, Rng& rng) {
  AudioSignal audio;
  audio.sample_rate = cfg.sample_rate;
  const std::size_t n = static_cast<std::size_t>(
      std::lround(cfg.duration_seconds * cfg.sample_rate));
  audio.samples.assign(n, 0.0);
  constexpr double kTau = 2.0 * std::numbers::pi;

  // Canonical tone mixture, randomized in phase only (see the video
  // generator for the rationale).
  struct Tone {
    double freq, amp, phase;
  };
  std::array<Tone, 3> tones{{
      {440.0, 1.0, 0.0},
      {1210.0, 0.7, 0.0},
      {2600.0, 0.45, 0.0},
  }};
  for (Tone& t : tones) t.phase = rng.uniform(0.0, kTau);
  constexpr double env_rate = 1.0;  // Hz
  const double env_phase = rng.uniform(0.0, kTau);

  const double dt = 1.0 / cfg.sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    // Burst/gap amplitude modulation: the sharp exponent leaves near-silent
    // spans between bursts so delayed copies land somewhere measurable.
    const double u = 0.5 * (1.0 + std::sin(kTau * env_rate * t + env_phase));
    const double u2 = u * u;
    const double env = 0.02 + 0.98 * u2 * u2 * u2;
    double mix = 0.0;
    for (const Tone& tone : tones)
      mix += tone.amp * std::sin(kTau * tone.freq * t + tone.phase);
    audio.samples[i] = env * mix;
  }

  // Normalize close to full scale so the hard-clip distortion bites at low
  // severities too (its threshold is 1 - 0.9*severity).
  double peak = 0.0;
  for (double s : audio.samples) peak = std::max(peak, std::abs(s));
  const double scale = peak > 0.0 ? 0.95 / peak : 1.0;
  for (double& s : audio.samples) {
    s = s * scale + rng.gaussian() * 0.0005;  // low broadband floor
    s = std::clamp(s, -1.0, 1.0);
  }
  return audio;
}

DatasetManifest synth_dataset(const SynthConfig& cfg,
                              const std::filesystem::path& output_dir) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  if (ec)
    throw Error(ErrorCode::IoFailure, kModule,
                "cannot create '" + output_dir.string() + "': " + ec.message());

  static constexpr std::array<const char*, 4> kVideoKinds{
      "noise", "blur", "freeze", "blockloss"};
  static constexpr std::array<const char*, 4> kAudioKinds{
      "background_noise", "chop", "clip", "echo"};

  DatasetManifest manifest;
  manifest.base_dir = output_dir;
  manifest.entries.reserve(cfg.count);
  const Rng base(cfg.seed);

  // Stratified design: consecutive clips cycle through all 16 kind pairs,
  // and each pass through the cycle draws the target quality from a
  // successive decile-style stratum, so every pair is exercised across the
  // whole severity range even in modest corpora.
  const std::size_t pair_cycle = kVideoKinds.size() * kAudioKinds.size();
  const std::size_t strata = (cfg.count + pair_cycle - 1) / pair_cycle;

  for (std::size_t i = 0; i < cfg.count; ++i) {
    Rng rng = base.fork(i);
    // Target quality q in this clip's stratum, split between the two
    // channels so every combination of impairment levels occurs.  Within
    // each unit MOS band the target sits in the upper half: the
    // index-plus-confidence score saturates toward a band's upper edge, so
    // placing labels there keeps the attainable residual small and leaves a
    // clear margin between adjacent bands.
    const std::size_t stratum = i / pair_cycle;
    const double t = (static_cast<double>(stratum) + rng.uniform()) /
                     static_cast<double>(strata);
    const double band = std::floor(4.0 * t);
    const double q = (band + 0.5 + 0.5 * (4.0 * t - band)) / 4.0;
    const double split = rng.uniform();
    const double sv = 1.0 - std::pow(q, split);
    const double sa = 1.0 - std::pow(q, 1.0 - split);
    const std::size_t pair = i % pair_cycle;
    const std::string video_kind = kVideoKinds[pair % kVideoKinds.size()];
    const std::string audio_kind = kAudioKinds[pair / kVideoKinds.size()];

    const FrameSequence source_video = synth_source_video(cfg, rng);
    const AudioSignal source_audio = synth_source_audio(cfg, rng);
    const FrameSequence degraded_video =
        degrade_video(source_video, {video_kind, sv}, rng);
    const AudioSignal degraded_audio =
        degrade_audio(source_audio, {audio_kind, sa}, rng);

    char idbuf[32];
    std::snprintf(idbuf, sizeof idbuf, "c%03zu", i);
    const std::string id(idbuf);
    save_y4m(output_dir / (id + ".y4m"), degraded_video);
    save_wav(output_dir / (id + ".wav"), degraded_audio);

    ManifestEntry entry;
    entry.id = id;
    entry.video_path = id + ".y4m";
    entry.audio_path = id + ".wav";
    entry.mos = pseudo_mos(sv, sa);
    entry.video_distortion = sv > 0.0 ? video_kind : "none";
    entry.audio_distortion = sa > 0.0 ? audio_kind : "none";
    entry.severity = 1.0 - (1.0 - sv) * (1.0 - sa);
    manifest.entries.push_back(std::move(entry));

    if ((i + 1) % 20 == 0 || i + 1 == cfg.count)
      log_message("synth: wrote " + std::to_string(i + 1) + "/" +
                  std::to_string(cfg.count) + " clips");
  }

  save_manifest(output_dir / "manifest.csv", manifest);
  return manifest;
}

}  // namespace avq
