#pragma once

// Shared fixtures for the unit tests.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "vdscan/media.hpp"
#include "vdscan/rng.hpp"

namespace vdscan::testing {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto stamp = derive_seed(reinterpret_cast<std::uintptr_t>(this), {++counter, hash_string(tag)});
    path_ = std::filesystem::temp_directory_path() / ("vdscan_" + tag + "_" + std::to_string(stamp % 1000000007));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline VideoMeta make_meta(int width, int height, std::size_t frames, ColorMode color = ColorMode::Gray8,
                           double fps = 30.0, std::string id = "vid") {
  VideoMeta m;
  m.video_id = std::move(id);
  m.individual_id = "ind";
  m.width = width;
  m.height = height;
  m.frame_count = frames;
  m.color = color;
  m.fps = fps;
  return m;
}

/// Uniform random pixels.
inline FrameVolume random_volume(const VideoMeta& meta, std::uint64_t seed) {
  FrameVolume v = FrameVolume::zeros(meta);
  Rng rng(seed);
  for (auto& p : v.pixels) p = static_cast<std::uint8_t>(rng() >> 56);
  return v;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace vdscan::testing
