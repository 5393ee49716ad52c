#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "avq/media_io.hpp"
#include "avq/rng.hpp"

namespace avq {

// Video kinds: noise, blur, freeze, blockloss. Audio kinds: background_noise,
// chop, clip, echo. "none" is accepted as an explicit identity.
struct DistortionSpec {
  std::string kind;
  double severity = 0.0;  // in [0, 1]; 0 is always a bit-exact identity
};

// `rng` is drawn from only by the stochastic kinds (noise, blockloss,
// background_noise), and never when severity is 0.
FrameSequence degrade_video(const FrameSequence& frames,
                            const DistortionSpec& spec, Rng& rng);
AudioSignal degrade_audio(const AudioSignal& signal, const DistortionSpec& spec,
                          Rng& rng);

// Surrogate subjective score: combined = 1 - (1-sv)*(1-sa),
// mos = clamp(5 - 4*combined, 1, 5). Synthetic by construction.
double pseudo_mos(double severity_video, double severity_audio);

struct SynthConfig {
  std::size_t count = 160;
  std::uint64_t seed = 1;
  std::uint32_t width = 160;
  std::uint32_t height = 120;
  std::uint32_t fps_num = 8;
  std::uint32_t fps_den = 1;
  double duration_seconds = 5.0;
  std::uint32_t sample_rate = 16000;
};

// Procedural pristine sources: drifting multi-orientation gratings over a
// static texture field, and amplitude-modulated tone mixtures with a low
// noise floor. Parameters are drawn from `rng`.
FrameSequence synth_source_video(const SynthConfig& cfg, Rng& rng);
AudioSignal synth_source_audio(const SynthConfig& cfg, Rng& rng);

// Writes <id>.y4m / <id>.wav pairs plus manifest.csv into output_dir and
// returns the manifest. Clip i derives its own generator via fork(i), so the
// corpus is byte-identical for a fixed (seed, count) regardless of schedule.
DatasetManifest synth_dataset(const SynthConfig& cfg,
                              const std::filesystem::path& output_dir);

}  // namespace avq
