#include "avq/media_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "avq/error.hpp"

namespace avq {

namespace {

constexpr std::string_view kModule = "media-io";

[[noreturn]] void fail(ErrorCode code, const std::string& detail) {
  throw Error(code, kModule, detail);
}

// --- Y4M ----------------------------------------------------------------

struct Y4mHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t fps_num = 0;
  std::uint32_t fps_den = 0;
  bool mono = false;  // false = 4:2:0
};

std::uint32_t parse_u32(std::string_view text, const char* what) {
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::MalformedHeader, std::string("bad ") + what + " value '" +
                                         std::string(text) + "'");
  return value;
}

Y4mHeader parse_y4m_header(std::string_view line) {
  Y4mHeader h;
  std::size_t pos = 0;
  bool first = true;
  bool have_w = false, have_h = false, have_f = false;
  while (pos < line.size()) {
    std::size_t end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    std::string_view tok = line.substr(pos, end - pos);
    pos = end + 1;
    if (tok.empty()) continue;
    if (first) {
      if (tok != "YUV4MPEG2")
        fail(ErrorCode::MalformedHeader, "missing YUV4MPEG2 magic");
      first = false;
      continue;
    }
    switch (tok[0]) {
      case 'W':
        h.width = parse_u32(tok.substr(1), "W");
        have_w = true;
        break;
      case 'H':
        h.height = parse_u32(tok.substr(1), "H");
        have_h = true;
        break;
      case 'F': {
        std::size_t colon = tok.find(':');
        if (colon == std::string_view::npos)
          fail(ErrorCode::MalformedHeader, "F tag must be num:den");
        h.fps_num = parse_u32(tok.substr(1, colon - 1), "F numerator");
        h.fps_den = parse_u32(tok.substr(colon + 1), "F denominator");
        have_f = true;
        break;
      }
      case 'C': {
        std::string_view cs = tok.substr(1);
        if (cs == "mono") {
          h.mono = true;
        } else if (cs == "420" || cs == "420jpeg" || cs == "420mpeg2" ||
                   cs == "420paldv") {
          h.mono = false;
        } else {
          fail(ErrorCode::UnsupportedPixelFormat,
               "colorspace C" + std::string(cs) + " (supported: 4:2:0, mono)");
        }
        break;
      }
      default:
        break;  // I/A/X and friends are ignored
    }
  }
  if (first) fail(ErrorCode::MalformedHeader, "empty stream");
  if (!have_w || !have_h || !have_f)
    fail(ErrorCode::MalformedHeader, "W, H and F tags are required");
  if (h.width == 0 || h.height == 0)
    fail(ErrorCode::MalformedHeader, "zero frame dimensions");
  if (h.fps_num == 0 || h.fps_den == 0)
    fail(ErrorCode::MalformedHeader, "zero frame rate");
  if (!h.mono && (h.width % 2 != 0 || h.height % 2 != 0))
    fail(ErrorCode::MalformedHeader, "4:2:0 requires even dimensions");
  return h;
}

// --- WAV ----------------------------------------------------------------

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
  out.push_back((v >> 16) & 0xff);
  out.push_back((v >> 24) & 0xff);
}

void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xff);
  out.push_back((v >> 8) & 0xff);
}

// --- CSV ----------------------------------------------------------------

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return fields;
}

double parse_double_field(const std::string& text, std::size_t line_no,
                          const char* what) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": bad " +
                                      what + " '" + text + "'");
  return value;
}

}  // namespace

FrameSequence parse_y4m(std::span<const std::uint8_t> bytes) {
  std::size_t nl = 0;
  while (nl < bytes.size() && bytes[nl] != '\n') ++nl;
  if (nl == bytes.size()) fail(ErrorCode::MalformedHeader, "no header line");
  std::string_view header(reinterpret_cast<const char*>(bytes.data()), nl);
  Y4mHeader h = parse_y4m_header(header);

  FrameSequence video;
  video.width = h.width;
  video.height = h.height;
  video.fps_num = h.fps_num;
  video.fps_den = h.fps_den;

  const std::size_t luma_size = static_cast<std::size_t>(h.width) * h.height;
  const std::size_t chroma_size = h.mono ? 0 : luma_size / 2;

  std::size_t pos = nl + 1;
  while (pos < bytes.size()) {
    // FRAME marker with optional parameters up to newline
    static constexpr std::string_view kMarker = "FRAME";
    if (pos + kMarker.size() > bytes.size() ||
        std::memcmp(bytes.data() + pos, kMarker.data(), kMarker.size()) != 0)
      fail(ErrorCode::MalformedHeader,
           "expected FRAME marker at byte " + std::to_string(pos));
    pos += kMarker.size();
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos == bytes.size())
      fail(ErrorCode::TruncatedFrame, "stream ends inside FRAME marker");
    ++pos;

    if (bytes.size() - pos < luma_size + chroma_size)
      fail(ErrorCode::TruncatedFrame,
           "frame " + std::to_string(video.frames.size()) + ": got " +
               std::to_string(bytes.size() - pos) + " of " +
               std::to_string(luma_size + chroma_size) + " payload bytes");
    video.frames.emplace_back(bytes.begin() + pos, bytes.begin() + pos + luma_size);
    pos += luma_size + chroma_size;
  }

  if (video.frames.empty())
    fail(ErrorCode::TruncatedFrame, "stream contains no frames");
  return video;
}

std::vector<std::uint8_t> serialize_y4m(const FrameSequence& video) {
  std::string header = "YUV4MPEG2 W" + std::to_string(video.width) + " H" +
                       std::to_string(video.height) + " F" +
                       std::to_string(video.fps_num) + ":" +
                       std::to_string(video.fps_den) + " Ip A1:1 Cmono\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() +
              video.frames.size() * (video.pixels_per_frame() + 6));
  for (const auto& frame : video.frames) {
    out.insert(out.end(), {'F', 'R', 'A', 'M', 'E', '\n'});
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

AudioSignal parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorCode::MalformedRiff, "missing RIFF/WAVE magic");

  AudioSignal audio;
  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t chunk_size = le32(bytes.data() + pos + 4);
    pos += 8;
    if (chunk_size > bytes.size() - pos)
      fail(ErrorCode::MalformedRiff, "chunk overruns file");

    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) fail(ErrorCode::MalformedRiff, "fmt chunk too short");
      const std::uint16_t format = le16(bytes.data() + pos);
      channels = le16(bytes.data() + pos + 2);
      audio.sample_rate = le32(bytes.data() + pos + 4);
      const std::uint16_t bits = le16(bytes.data() + pos + 14);
      if (format != 1)
        fail(ErrorCode::UnsupportedEncoding,
             "format tag " + std::to_string(format) + " (PCM only)");
      if (bits != 16)
        fail(ErrorCode::UnsupportedEncoding,
             std::to_string(bits) + "-bit samples (16-bit only)");
      if (channels != 1 && channels != 2)
        fail(ErrorCode::UnsupportedEncoding,
             std::to_string(channels) + " channels (mono or stereo only)");
      if (audio.sample_rate == 0)
        fail(ErrorCode::MalformedRiff, "zero sample rate");
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) fail(ErrorCode::MalformedRiff, "data chunk before fmt");
      const std::size_t bytes_per_frame = 2u * channels;
      const std::size_t n = chunk_size / bytes_per_frame;
      if (n == 0) fail(ErrorCode::EmptyData, "data chunk holds no samples");
      audio.samples.resize(n);
      const std::uint8_t* p = bytes.data() + pos;
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t a =
            static_cast<std::int16_t>(le16(p + i * bytes_per_frame));
        if (channels == 1) {
          audio.samples[i] = a / 32768.0;
        } else {
          const std::int16_t b =
              static_cast<std::int16_t>(le16(p + i * bytes_per_frame + 2));
          audio.samples[i] = (a + b) * 0.5 / 32768.0;
        }
      }
      return audio;
    }
    pos += chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }
  fail(ErrorCode::EmptyData, "no data chunk");
}

std::vector<std::uint8_t> serialize_wav(const AudioSignal& audio) {
  const std::uint32_t n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_size = n * 2;
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  auto put_tag = [&out](const char* tag) {
    out.insert(out.end(), tag, tag + 4);
  };
  put_tag("RIFF");
  put_le32(out, 36 + data_size);
  put_tag("WAVE");
  put_tag("fmt ");
  put_le32(out, 16);
  put_le16(out, 1);  // PCM
  put_le16(out, 1);  // mono
  put_le32(out, audio.sample_rate);
  put_le32(out, audio.sample_rate * 2);  // byte rate
  put_le16(out, 2);                      // block align
  put_le16(out, 16);                     // bits per sample
  put_tag("data");
  put_le32(out, data_size);
  for (double s : audio.samples) {
    double clamped = std::clamp(s, -1.0, 1.0);
    int v = static_cast<int>(std::lround(clamped * 32768.0));
    v = std::clamp(v, -32768, 32767);
    put_le16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

FrameSequence load_y4m(const std::filesystem::path& path) {
  return parse_y4m(read_file(path));
}

AudioSignal load_wav(const std::filesystem::path& path) {
  return parse_wav(read_file(path));
}

void save_y4m(const std::filesystem::path& path, const FrameSequence& video) {
  write_file(path, serialize_y4m(video));
}

void save_wav(const std::filesystem::path& path, const AudioSignal& audio) {
  write_file(path, serialize_wav(audio));
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());

  DatasetManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path()
                                             : std::filesystem::path(".");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MissingColumn, "empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    fail(ErrorCode::MissingColumn,
         "header must be exactly '" + std::string(kManifestHeader) + "'");

  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 7)
      fail(ErrorCode::MalformedRow,
           "line " + std::to_string(line_no) + ": expected 7 fields, got " +
               std::to_string(fields.size()) +
               " (paths containing commas are not supported)");
    ManifestEntry e;
    e.id = fields[0];
    e.video_path = fields[1];
    e.audio_path = fields[2];
    e.mos = parse_double_field(fields[3], line_no, "mos");
    e.video_distortion = fields[4];
    e.audio_distortion = fields[5];
    e.severity = parse_double_field(fields[6], line_no, "severity");
    if (e.id.empty())
      fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": empty id");
    if (e.mos < 1.0 || e.mos > 5.0)
      fail(ErrorCode::MosOutOfRange, "line " + std::to_string(line_no) + ": mos " +
                                         fields[3] + " outside [1,5]");
    if (e.severity < 0.0)
      fail(ErrorCode::MalformedRow,
           "line " + std::to_string(line_no) + ": negative severity");
    if (!seen.insert(e.id).second)
      fail(ErrorCode::DuplicateId,
           "line " + std::to_string(line_no) + ": id '" + e.id + "' repeated");
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ostringstream out;
  out << kManifestHeader << "\n";
  for (const auto& e : m.entries) {
    char mos[32], sev[32];
    std::snprintf(mos, sizeof mos, "%.4f", e.mos);
    std::snprintf(sev, sizeof sev, "%.6f", e.severity);
    out << e.id << ',' << e.video_path << ',' << e.audio_path << ',' << mos
        << ',' << e.video_distortion << ',' << e.audio_distortion << ',' << sev
        << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, kModule, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw Error(ErrorCode::IoFailure, kModule, "short read on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error(ErrorCode::IoFailure, kModule, "cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out)
      throw Error(ErrorCode::IoFailure, kModule, "short write on " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw Error(ErrorCode::IoFailure, kModule,
                "rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace avq
