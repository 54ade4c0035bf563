#include <spdlog/spdlog.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>

#include "media_internal.hpp"
#include "vdscan/error.hpp"
#include "vdscan/kv.hpp"
#include "vdscan/media.hpp"

namespace vdscan::frame_sequence {
namespace {

std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  kv::Entries entries;
  try {
    entries = kv::read_file(path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UnreadableFile) throw;
    throw Error(ErrorKind::CorruptHeader, e.what());
  }
  std::map<std::string, std::string> out;
  for (auto& [k, v] : entries) {
    if (!out.emplace(k, std::move(v)).second) {
      throw Error(ErrorKind::CorruptHeader, path.string() + ": duplicate key '" + k + "'");
    }
  }
  return out;
}

std::size_t count_frames(const std::filesystem::path& dir) {
  std::size_t n = 0;
  while (std::filesystem::is_regular_file(dir / frame_file_name(n))) ++n;
  return n;
}

double parse_positive(const std::string& text, const std::filesystem::path& dir, std::string_view key) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !(value > 0.0)) {
    throw Error(ErrorKind::CorruptHeader, dir.string() + ": manifest " + std::string(key) + " '" + text + "' is invalid");
  }
  return value;
}

}  // namespace

std::string frame_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.png", index);
  return buf;
}

VideoMeta probe(const std::filesystem::path& dir) {
  const auto manifest = read_manifest(dir);
  const auto get = [&](const std::string& key) -> std::string {
    const auto it = manifest.find(key);
    return it == manifest.end() ? std::string{} : it->second;
  };

  VideoMeta meta;
  meta.video_id = get("video_id");
  if (meta.video_id.empty()) meta.video_id = dir.filename().string();
  meta.individual_id = get("individual_id");
  meta.site = parse_site(get("site"));
  if (const auto fps = get("fps"); !fps.empty()) {
    meta.fps = parse_positive(fps, dir, "fps");
  } else {
    spdlog::warn("{}: manifest has no fps, assuming {} fps", dir.string(), kDefaultFps);
    meta.fps = kDefaultFps;
  }

  meta.frame_count = count_frames(dir);
  if (meta.frame_count == 0) throw Error(ErrorKind::CorruptHeader, dir.string() + ": no frame files");
  if (const auto declared = get("frame_count"); !declared.empty()) {
    if (parse_positive(declared, dir, "frame_count") != static_cast<double>(meta.frame_count)) {
      throw Error(ErrorKind::CorruptHeader, dir.string() + ": manifest declares " + declared + " frames, found " +
                                                std::to_string(meta.frame_count));
    }
  }

  const png::Header first = png::read_header(dir / frame_file_name(0));
  meta.width = first.width;
  meta.height = first.height;
  meta.color = first.channels == 3 ? ColorMode::Rgb8 : ColorMode::Gray8;
  detail::validate_disk_meta(meta, dir);
  return meta;
}

FrameVolume load(const std::filesystem::path& dir) {
  const VideoMeta meta = probe(dir);
  FrameVolume volume = FrameVolume::zeros(meta);
  for (std::size_t f = 0; f < meta.frame_count; ++f) {
    const auto path = dir / frame_file_name(f);
    const png::Image image = png::read(path);
    if (image.width != meta.width || image.height != meta.height || image.channels != meta.channels()) {
      throw Error(ErrorKind::CorruptHeader, path.string() + ": frame geometry differs from the first frame");
    }
    std::copy(image.pixels.begin(), image.pixels.end(), volume.frame(f).begin());
  }
  return volume;
}

void save(const FrameVolume& volume, const std::filesystem::path& dir) {
  volume.validate();
  std::filesystem::create_directories(dir);
  const VideoMeta& meta = volume.meta;
  for (std::size_t f = 0; f < meta.frame_count; ++f) {
    png::write(dir / frame_file_name(f), meta.width, meta.height, meta.channels(), volume.frame(f));
  }
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write manifest in " + dir.string());
  std::array<char, 32> fps{};
  const auto [ptr, ec] = std::to_chars(fps.data(), fps.data() + fps.size(), meta.fps);
  (void)ec;
  out << "video_id = " << meta.video_id << "\n"
      << "individual_id = " << meta.individual_id << "\n"
      << "site = " << to_string(meta.site) << "\n"
      << "fps = " << std::string_view(fps.data(), static_cast<std::size_t>(ptr - fps.data())) << "\n"
      << "frame_count = " << meta.frame_count << "\n";
  if (!out) throw Error(ErrorKind::IoError, "short write of manifest in " + dir.string());
}

}  // namespace vdscan::frame_sequence
