#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vdscan {

/// Carotid acquisition site. Parsing is total: anything unrecognized maps to Unknown.
enum class Site { CcaL, CcaR, EcaL, EcaR, IcaL, IcaR, Unknown };

Site parse_site(std::string_view text);
std::string_view to_string(Site site);

enum class ColorMode { Gray8, Rgb8 };

std::string_view to_string(ColorMode mode);

struct VideoMeta {
  std::string video_id;
  std::string individual_id;
  Site site = Site::Unknown;
  double fps = 30.0;
  std::size_t frame_count = 0;
  int width = 0;
  int height = 0;
  ColorMode color = ColorMode::Gray8;

  int channels() const noexcept { return color == ColorMode::Rgb8 ? 3 : 1; }
  std::size_t frame_bytes() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(channels());
  }

  bool operator==(const VideoMeta&) const = default;
};

/// Smallest frame edge accepted from disk.
inline constexpr int kMinFrameEdge = 64;
inline constexpr double kDefaultFps = 30.0;

/// Frame-major, row-major, channel-interleaved 8-bit pixel stack.
struct FrameVolume {
  VideoMeta meta;
  std::vector<std::uint8_t> pixels;

  /// Allocates a zero-filled volume for the given metadata.
  static FrameVolume zeros(const VideoMeta& meta);

  std::span<const std::uint8_t> frame(std::size_t index) const {
    return {pixels.data() + index * meta.frame_bytes(), meta.frame_bytes()};
  }
  std::span<std::uint8_t> frame(std::size_t index) {
    return {pixels.data() + index * meta.frame_bytes(), meta.frame_bytes()};
  }

  std::uint8_t at(std::size_t f, int y, int x, int c = 0) const {
    return pixels[index_of(f, y, x, c)];
  }
  std::uint8_t& at(std::size_t f, int y, int x, int c = 0) { return pixels[index_of(f, y, x, c)]; }

  std::size_t index_of(std::size_t f, int y, int x, int c) const noexcept {
    return f * meta.frame_bytes() +
           (static_cast<std::size_t>(y) * static_cast<std::size_t>(meta.width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(meta.channels()) +
           static_cast<std::size_t>(c);
  }

  /// Throws ShapeMismatch if the pixel buffer disagrees with the metadata.
  void validate() const;

  bool operator==(const FrameVolume&) const = default;
};

// --- ingest -----------------------------------------------------------------

/// Reads container metadata without decoding pixel data. Accepts a DICOM
/// subset file or a frame-sequence directory holding a `manifest`.
VideoMeta probe_metadata(const std::filesystem::path& path);

/// Fully decodes either supported format.
FrameVolume load_video(const std::filesystem::path& path);

/// True when `path` looks like an ingestible input (a .dcm file or a directory
/// with a manifest); used for input discovery in batch mode.
bool is_video_input(const std::filesystem::path& path);

// --- DICOM subset: uncompressed, explicit VR little endian, 8-bit, multi-frame

namespace dicom {

inline constexpr std::string_view kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";

VideoMeta probe(const std::filesystem::path& path);
FrameVolume load(const std::filesystem::path& path);

struct WriteOptions {
  bool write_fps = true;
  std::string transfer_syntax{kExplicitVrLittleEndian};
};

/// Writes the volume as a multi-frame ultrasound DICOM object. A non-default
/// transfer syntax only changes the declared UID (used to test rejection paths).
void save(const FrameVolume& volume, const std::filesystem::path& path, const WriteOptions& options = {});

}  // namespace dicom

// --- portable frame-sequence directory ----------------------------------------

namespace frame_sequence {

inline constexpr std::string_view kManifestName = "manifest";

VideoMeta probe(const std::filesystem::path& dir);
FrameVolume load(const std::filesystem::path& dir);
void save(const FrameVolume& volume, const std::filesystem::path& dir);

std::string frame_file_name(std::size_t index);

}  // namespace frame_sequence

// --- lossless PNG helpers -----------------------------------------------------

namespace png {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 = gray, 3 = RGB
  std::vector<std::uint8_t> pixels;
};

struct Header {
  int width = 0;
  int height = 0;
  int channels = 1;
};

Header read_header(const std::filesystem::path& path);
Image read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, int width, int height, int channels,
           std::span<const std::uint8_t> pixels);

}  // namespace png

}  // namespace vdscan
