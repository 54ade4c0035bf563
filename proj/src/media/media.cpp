#include <array>
#include <cmath>
#include <cctype>
#include <fstream>

#include "media_internal.hpp"
#include "vdscan/error.hpp"
#include "vdscan/media.hpp"

namespace vdscan {

namespace {

constexpr std::array<std::pair<std::string_view, Site>, 6> kSiteNames{{
    {"CCA_L", Site::CcaL},
    {"CCA_R", Site::CcaR},
    {"ECA_L", Site::EcaL},
    {"ECA_R", Site::EcaR},
    {"ICA_L", Site::IcaL},
    {"ICA_R", Site::IcaR},
}};

enum class Container { Dicom, FrameSequence };

Container sniff(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw Error(ErrorKind::UnreadableFile, path.string() + " does not exist");
  if (std::filesystem::is_directory(path, ec)) {
    if (std::filesystem::is_regular_file(path / frame_sequence::kManifestName, ec)) return Container::FrameSequence;
    throw Error(ErrorKind::UnsupportedFormat, path.string() + " is a directory without a manifest");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
  std::array<char, 132> head{};
  in.read(head.data(), head.size());
  if (in.gcount() < static_cast<std::streamsize>(head.size())) {
    throw Error(ErrorKind::CorruptHeader, path.string() + " is too short to hold a header");
  }
  if (std::string_view(head.data() + 128, 4) == "DICM") return Container::Dicom;
  throw Error(ErrorKind::UnsupportedFormat, path.string() + " is neither DICOM nor a frame-sequence directory");
}

}  // namespace

Site parse_site(std::string_view text) {
  std::string norm;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    norm.push_back(ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
  }
  for (const auto& [name, site] : kSiteNames) {
    if (norm == name) return site;
  }
  return Site::Unknown;
}

std::string_view to_string(Site site) {
  for (const auto& [name, s] : kSiteNames) {
    if (s == site) return name;
  }
  return "UNKNOWN";
}

std::string_view to_string(ColorMode mode) { return mode == ColorMode::Rgb8 ? "RGB8" : "GRAY8"; }

FrameVolume FrameVolume::zeros(const VideoMeta& meta) {
  FrameVolume v;
  v.meta = meta;
  v.pixels.assign(meta.frame_bytes() * meta.frame_count, 0);
  return v;
}

void FrameVolume::validate() const {
  if (meta.width <= 0 || meta.height <= 0 || meta.frame_count == 0) {
    throw Error(ErrorKind::ShapeMismatch, "volume " + meta.video_id + " has an empty geometry");
  }
  if (pixels.size() != meta.frame_bytes() * meta.frame_count) {
    throw Error(ErrorKind::ShapeMismatch, "volume " + meta.video_id + " pixel buffer does not match its metadata");
  }
}

namespace detail {

void validate_disk_meta(const VideoMeta& meta, const std::filesystem::path& source) {
  if (!(meta.fps > 0.0) || !std::isfinite(meta.fps)) {
    throw Error(ErrorKind::CorruptHeader, source.string() + ": frame rate must be positive");
  }
  if (meta.frame_count < 1) throw Error(ErrorKind::CorruptHeader, source.string() + ": no frames");
  if (meta.width < kMinFrameEdge || meta.height < kMinFrameEdge) {
    throw Error(ErrorKind::CorruptHeader, source.string() + ": frame smaller than " +
                                              std::to_string(kMinFrameEdge) + " pixels");
  }
}

}  // namespace detail

VideoMeta probe_metadata(const std::filesystem::path& path) {
  return sniff(path) == Container::Dicom ? dicom::probe(path) : frame_sequence::probe(path);
}

FrameVolume load_video(const std::filesystem::path& path) {
  return sniff(path) == Container::Dicom ? dicom::load(path) : frame_sequence::load(path);
}

bool is_video_input(const std::filesystem::path& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) {
    return std::filesystem::is_regular_file(path / frame_sequence::kManifestName, ec);
  }
  return std::filesystem::is_regular_file(path, ec) && path.extension() == ".dcm";
}

}  // namespace vdscan
