#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace avq {

// Decoded luma-plane video. Chroma is dropped at parse time; every feature
// downstream is a luminance statistic.
struct FrameSequence {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t fps_num = 0;
  std::uint32_t fps_den = 1;
  // One row-major 8-bit luma plane per frame, all width*height bytes.
  std::vector<std::vector<std::uint8_t>> frames;

  double fps() const { return static_cast<double>(fps_num) / fps_den; }
  std::size_t frame_count() const { return frames.size(); }
  std::size_t pixels_per_frame() const {
    return static_cast<std::size_t>(width) * height;
  }
};

// Mono PCM audio, samples normalized into [-1, 1].
struct AudioSignal {
  std::uint32_t sample_rate = 0;
  std::vector<double> samples;

  double duration_seconds() const {
    return sample_rate ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct ManifestEntry {
  std::string id;
  std::string video_path;
  std::string audio_path;
  double mos = 0.0;  // in [1, 5]
  std::string video_distortion;
  std::string audio_distortion;
  double severity = 0.0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  // Directory the manifest was loaded from; relative media paths resolve
  // against it.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const {
    std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
  }
};

inline constexpr const char* kManifestHeader =
    "id,video_path,audio_path,mos,video_distortion,audio_distortion,severity";

// YUV4MPEG2 reader. Honors W/H/F/C header tags and ignores the rest;
// accepts 4:2:0 variants and mono, keeps only the luma planes.
FrameSequence parse_y4m(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_y4m(const FrameSequence& video);

// RIFF/WAVE reader, PCM-16 mono or stereo. Stereo is downmixed by per-sample
// average; ints scale by 1/32768.
AudioSignal parse_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize_wav(const AudioSignal& audio);

FrameSequence load_y4m(const std::filesystem::path& path);
AudioSignal load_wav(const std::filesystem::path& path);
void save_y4m(const std::filesystem::path& path, const FrameSequence& video);
void save_wav(const std::filesystem::path& path, const AudioSignal& audio);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Atomic: writes to a temp sibling then renames into place.
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace avq
