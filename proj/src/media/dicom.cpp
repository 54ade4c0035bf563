#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>

#include "media_internal.hpp"
#include "vdscan/error.hpp"
#include "vdscan/media.hpp"
#include "vdscan/rng.hpp"

namespace vdscan::dicom {
namespace {

using Tag = std::uint32_t;

constexpr Tag tag(std::uint16_t group, std::uint16_t element) {
  return (static_cast<Tag>(group) << 16) | element;
}

constexpr Tag kTransferSyntax = tag(0x0002, 0x0010);
constexpr Tag kSeriesDescription = tag(0x0008, 0x103E);
constexpr Tag kRecommendedFrameRate = tag(0x0008, 0x2144);
constexpr Tag kPatientId = tag(0x0010, 0x0020);
constexpr Tag kBodyPart = tag(0x0018, 0x0015);
constexpr Tag kCineRate = tag(0x0018, 0x0040);
constexpr Tag kFrameTime = tag(0x0018, 0x1063);
constexpr Tag kSamplesPerPixel = tag(0x0028, 0x0002);
constexpr Tag kPhotometric = tag(0x0028, 0x0004);
constexpr Tag kPlanarConfiguration = tag(0x0028, 0x0006);
constexpr Tag kNumberOfFrames = tag(0x0028, 0x0008);
constexpr Tag kRows = tag(0x0028, 0x0010);
constexpr Tag kColumns = tag(0x0028, 0x0011);
constexpr Tag kBitsAllocated = tag(0x0028, 0x0100);
constexpr Tag kPixelRepresentation = tag(0x0028, 0x0103);
constexpr Tag kPixelData = tag(0x7FE0, 0x0010);
constexpr Tag kItem = tag(0xFFFE, 0xE000);
constexpr Tag kItemDelimiter = tag(0xFFFE, 0xE00D);
constexpr Tag kSequenceDelimiter = tag(0xFFFE, 0xE0DD);

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFFu;

constexpr std::array<Tag, 15> kInterestingTags{
    kTransferSyntax, kSeriesDescription, kRecommendedFrameRate, kPatientId, kBodyPart,
    kCineRate,       kFrameTime,         kSamplesPerPixel,      kPhotometric, kPlanarConfiguration,
    kNumberOfFrames, kRows,              kColumns,              kBitsAllocated, kPixelRepresentation,
};

bool has_long_length(std::string_view vr) {
  static constexpr std::array<std::string_view, 13> kLong{"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                                          "SV", "UC", "UN", "UR", "UT", "UV"};
  return std::find(kLong.begin(), kLong.end(), vr) != kLong.end();
}

std::string trim_value(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  std::size_t first = 0;
  while (first < s.size() && s[first] == ' ') ++first;
  return s.substr(first);
}

/// Header-level view of a file: the elements we care about plus the location
/// of the pixel data.
struct ParsedHeader {
  std::map<Tag, std::string> values;
  std::uint64_t pixel_offset = 0;
  std::uint32_t pixel_length = 0;
  std::uint64_t file_size = 0;
};

class Scanner {
 public:
  explicit Scanner(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
    in_.seekg(0, std::ios::end);
    size_ = static_cast<std::uint64_t>(in_.tellg());
    in_.seekg(0);
  }

  std::uint64_t size() const { return size_; }
  std::uint64_t pos() { return static_cast<std::uint64_t>(in_.tellg()); }
  bool at_end() { return pos() >= size_; }

  void seek(std::uint64_t offset) {
    if (offset > size_) corrupt("element extends past end of file");
    in_.seekg(static_cast<std::streamoff>(offset));
  }
  void skip(std::uint64_t n) { seek(pos() + n); }

  void read(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) corrupt("unexpected end of file");
  }

  std::uint16_t u16() {
    std::array<std::uint8_t, 2> b{};
    read(b.data(), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    std::array<std::uint8_t, 4> b{};
    read(b.data(), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  Tag read_tag() {
    const auto group = u16();
    const auto element = u16();
    return tag(group, element);
  }
  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    if (n > 0) read(s.data(), n);
    return s;
  }

  [[noreturn]] void corrupt(const std::string& why) {
    throw Error(ErrorKind::CorruptHeader, path_.string() + ": " + why);
  }

  /// Reads VR and length of an explicit-VR element whose tag has been consumed.
  std::pair<std::string, std::uint32_t> vr_and_length() {
    std::string vr = bytes(2);
    if (has_long_length(vr)) {
      skip(2);
      return {vr, u32()};
    }
    return {vr, u16()};
  }

  void skip_undefined_sequence() {
    while (true) {
      const Tag t = read_tag();
      const std::uint32_t len = u32();
      if (t == kSequenceDelimiter) return;
      if (t != kItem) corrupt("malformed sequence item");
      if (len == kUndefinedLength) {
        skip_undefined_item();
      } else {
        skip(len);
      }
    }
  }

  void skip_undefined_item() {
    while (true) {
      const Tag t = read_tag();
      if (t == kItemDelimiter) {
        u32();
        return;
      }
      auto [vr, len] = vr_and_length();
      if (len == kUndefinedLength) {
        skip_undefined_sequence();
      } else {
        skip(len);
      }
    }
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::uint64_t size_ = 0;
};

ParsedHeader parse_header(const std::filesystem::path& path) {
  Scanner s(path);
  ParsedHeader h;
  h.file_size = s.size();
  if (s.size() < 132) s.corrupt("file too short for a DICOM preamble");
  s.seek(128);
  if (s.bytes(4) != "DICM") throw Error(ErrorKind::UnsupportedFormat, path.string() + " lacks the DICM marker");

  bool in_meta = true;
  while (!s.at_end()) {
    const Tag t = s.read_tag();
    if (in_meta && (t >> 16) != 0x0002) {
      in_meta = false;
      const auto ts = h.values.find(kTransferSyntax);
      if (ts == h.values.end()) s.corrupt("missing transfer syntax");
      if (ts->second != kExplicitVrLittleEndian) {
        throw Error(ErrorKind::UnsupportedTransferSyntax,
                    path.string() + ": transfer syntax " + ts->second + " is not supported");
      }
    }
    auto [vr, len] = s.vr_and_length();
    if (t == kPixelData) {
      if (len == kUndefinedLength) {
        throw Error(ErrorKind::UnsupportedTransferSyntax, path.string() + ": encapsulated pixel data");
      }
      h.pixel_offset = s.pos();
      h.pixel_length = len;
      return h;
    }
    if (len == kUndefinedLength) {
      s.skip_undefined_sequence();
      continue;
    }
    if (std::find(kInterestingTags.begin(), kInterestingTags.end(), t) != kInterestingTags.end()) {
      std::string raw = s.bytes(len);
      if (vr == "US") {
        if (raw.size() < 2) s.corrupt("short US value");
        const auto v = static_cast<std::uint16_t>(static_cast<std::uint8_t>(raw[0]) |
                                                  (static_cast<std::uint8_t>(raw[1]) << 8));
        h.values[t] = std::to_string(v);
      } else {
        h.values[t] = trim_value(std::move(raw));
      }
    } else {
      s.skip(len);
    }
  }
  if (in_meta) s.corrupt("no dataset after file meta information");
  s.corrupt("no pixel data element");
}

std::optional<std::string> lookup(const ParsedHeader& h, Tag t) {
  const auto it = h.values.find(t);
  if (it == h.values.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

template <typename T>
std::optional<T> lookup_number(const ParsedHeader& h, Tag t, const std::filesystem::path& path) {
  const auto text = lookup(h, t);
  if (!text) return std::nullopt;
  T value{};
  const char* first = text->data();
  const char* last = text->data() + text->size();
  while (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{}) {
    throw Error(ErrorKind::CorruptHeader, path.string() + ": cannot parse numeric value '" + *text + "'");
  }
  (void)ptr;
  return value;
}

struct Layout {
  VideoMeta meta;
  bool planar = false;
  std::uint64_t pixel_offset = 0;
  std::uint64_t pixel_length = 0;
  std::uint64_t file_size = 0;
};

Layout read_layout(const std::filesystem::path& path) {
  const ParsedHeader h = parse_header(path);
  Layout out;
  out.pixel_offset = h.pixel_offset;
  out.pixel_length = h.pixel_length;
  out.file_size = h.file_size;

  VideoMeta& meta = out.meta;
  meta.video_id = lookup(h, kSeriesDescription).value_or(path.stem().string());
  meta.individual_id = lookup(h, kPatientId).value_or("");
  meta.site = parse_site(lookup(h, kBodyPart).value_or(""));

  const auto rows = lookup_number<int>(h, kRows, path);
  const auto cols = lookup_number<int>(h, kColumns, path);
  if (!rows || !cols) throw Error(ErrorKind::CorruptHeader, path.string() + ": missing Rows/Columns");
  meta.height = *rows;
  meta.width = *cols;
  const long frames = lookup_number<long>(h, kNumberOfFrames, path).value_or(1);
  if (frames < 1) throw Error(ErrorKind::CorruptHeader, path.string() + ": NumberOfFrames < 1");
  meta.frame_count = static_cast<std::size_t>(frames);

  if (lookup_number<int>(h, kBitsAllocated, path).value_or(8) != 8) {
    throw Error(ErrorKind::UnsupportedFormat, path.string() + ": only 8-bit pixel data is supported");
  }
  if (lookup_number<int>(h, kPixelRepresentation, path).value_or(0) != 0) {
    throw Error(ErrorKind::UnsupportedFormat, path.string() + ": signed pixel data is not supported");
  }
  const int spp = lookup_number<int>(h, kSamplesPerPixel, path).value_or(1);
  const std::string photometric = lookup(h, kPhotometric).value_or(spp == 3 ? "RGB" : "MONOCHROME2");
  if (spp == 1 && photometric == "MONOCHROME2") {
    meta.color = ColorMode::Gray8;
  } else if (spp == 3 && photometric == "RGB") {
    meta.color = ColorMode::Rgb8;
    out.planar = lookup_number<int>(h, kPlanarConfiguration, path).value_or(0) == 1;
  } else {
    throw Error(ErrorKind::UnsupportedFormat,
                path.string() + ": photometric interpretation " + photometric + " is not supported");
  }

  if (const auto frame_time = lookup_number<double>(h, kFrameTime, path); frame_time && *frame_time > 0.0) {
    meta.fps = 1000.0 / *frame_time;
  } else if (const auto cine = lookup_number<double>(h, kCineRate, path); cine && *cine > 0.0) {
    meta.fps = *cine;
  } else if (const auto rec = lookup_number<double>(h, kRecommendedFrameRate, path); rec && *rec > 0.0) {
    meta.fps = *rec;
  } else {
    spdlog::warn("{}: no frame-rate tag, assuming {} fps", path.string(), kDefaultFps);
    meta.fps = kDefaultFps;
  }
  detail::validate_disk_meta(meta, path);
  return out;
}

// --- writer -----------------------------------------------------------------

class ElementWriter {
 public:
  void u16_value(Tag t, std::uint16_t v) {
    header(t, "US", 2);
    put16(v);
  }
  void u32_value(Tag t, std::uint32_t v) {
    header(t, "UL", 4);
    put32(v);
  }
  void string_value(Tag t, std::string_view vr, std::string value) {
    if (value.size() % 2 == 1) value.push_back(vr == "UI" ? '\0' : ' ');
    header(t, vr, static_cast<std::uint32_t>(value.size()));
    buf_.insert(buf_.end(), value.begin(), value.end());
  }
  void bytes_value(Tag t, std::string_view vr, std::span<const std::uint8_t> data) {
    const bool pad = data.size() % 2 == 1;
    header(t, vr, static_cast<std::uint32_t>(data.size() + (pad ? 1 : 0)));
    buf_.insert(buf_.end(), data.begin(), data.end());
    if (pad) buf_.push_back(0);
  }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  void header(Tag t, std::string_view vr, std::uint32_t length) {
    put16(static_cast<std::uint16_t>(t >> 16));
    put16(static_cast<std::uint16_t>(t & 0xFFFF));
    buf_.push_back(static_cast<std::uint8_t>(vr[0]));
    buf_.push_back(static_cast<std::uint8_t>(vr[1]));
    if (has_long_length(vr)) {
      put16(0);
      put32(length);
    } else {
      put16(static_cast<std::uint16_t>(length));
    }
  }
  void put16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v & 0xFF));
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void put32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }

  std::vector<std::uint8_t> buf_;
};

constexpr std::string_view kUltrasoundMultiframeSopClass = "1.2.840.10008.5.1.4.1.1.3.1";

std::string instance_uid(const VideoMeta& meta) {
  std::uint64_t h = 0;
  for (char c : meta.video_id + "/" + meta.individual_id) h = mix64(h ^ static_cast<std::uint8_t>(c));
  return "2.25." + std::to_string(h);
}

std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + 16, v, std::chars_format::general, 12);
  if (ec != std::errc{}) return "0";
  return std::string(buf.data(), ptr);
}

}  // namespace

VideoMeta probe(const std::filesystem::path& path) { return read_layout(path).meta; }

FrameVolume load(const std::filesystem::path& path) {
  const Layout layout = read_layout(path);
  const VideoMeta& meta = layout.meta;
  const std::uint64_t expected = static_cast<std::uint64_t>(meta.frame_bytes()) * meta.frame_count;
  const std::uint64_t available =
      std::min<std::uint64_t>(layout.pixel_length, layout.file_size - layout.pixel_offset);
  if (available < expected) {
    throw Error(ErrorKind::PixelDataTruncated, path.string() + ": pixel data holds " + std::to_string(available) +
                                                   " of " + std::to_string(expected) + " bytes");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
  in.seekg(static_cast<std::streamoff>(layout.pixel_offset));

  FrameVolume volume = FrameVolume::zeros(meta);
  in.read(reinterpret_cast<char*>(volume.pixels.data()), static_cast<std::streamsize>(expected));
  if (static_cast<std::uint64_t>(in.gcount()) != expected) {
    throw Error(ErrorKind::PixelDataTruncated, path.string() + ": short read of pixel data");
  }

  if (layout.planar) {
    const std::size_t plane = static_cast<std::size_t>(meta.width) * meta.height;
    std::vector<std::uint8_t> interleaved(meta.frame_bytes());
    for (std::size_t f = 0; f < meta.frame_count; ++f) {
      auto frame = volume.frame(f);
      for (std::size_t p = 0; p < plane; ++p) {
        for (std::size_t c = 0; c < 3; ++c) interleaved[p * 3 + c] = frame[c * plane + p];
      }
      std::copy(interleaved.begin(), interleaved.end(), frame.begin());
    }
  }
  return volume;
}

void save(const FrameVolume& volume, const std::filesystem::path& path, const WriteOptions& options) {
  volume.validate();
  const VideoMeta& meta = volume.meta;
  if (meta.width > 0xFFFF || meta.height > 0xFFFF) throw Error(ErrorKind::UnsupportedFormat, "frame too large");
  const std::string uid = instance_uid(meta);

  ElementWriter fmi;
  {
    ElementWriter body;
    const std::array<std::uint8_t, 2> version{0x00, 0x01};
    body.bytes_value(tag(0x0002, 0x0001), "OB", version);
    body.string_value(tag(0x0002, 0x0002), "UI", std::string(kUltrasoundMultiframeSopClass));
    body.string_value(tag(0x0002, 0x0003), "UI", uid);
    body.string_value(kTransferSyntax, "UI", options.transfer_syntax);
    body.string_value(tag(0x0002, 0x0012), "UI", "2.25.1946410563");
    fmi.u32_value(tag(0x0002, 0x0000), static_cast<std::uint32_t>(body.bytes().size()));
    std::vector<std::uint8_t> all = fmi.bytes();
    all.insert(all.end(), body.bytes().begin(), body.bytes().end());

    ElementWriter ds;
    ds.string_value(tag(0x0008, 0x0016), "UI", std::string(kUltrasoundMultiframeSopClass));
    ds.string_value(tag(0x0008, 0x0018), "UI", uid);
    ds.string_value(tag(0x0008, 0x0060), "CS", "US");
    ds.string_value(kSeriesDescription, "LO", meta.video_id);
    ds.string_value(kPatientId, "LO", meta.individual_id);
    ds.string_value(kBodyPart, "CS", std::string(to_string(meta.site)));
    if (options.write_fps) {
      if (meta.fps == std::round(meta.fps)) {
        ds.string_value(kCineRate, "IS", std::to_string(static_cast<long>(meta.fps)));
      } else {
        ds.string_value(kFrameTime, "DS", format_number(1000.0 / meta.fps));
      }
    }
    ds.u16_value(kSamplesPerPixel, static_cast<std::uint16_t>(meta.channels()));
    ds.string_value(kPhotometric, "CS", meta.color == ColorMode::Rgb8 ? "RGB" : "MONOCHROME2");
    if (meta.color == ColorMode::Rgb8) ds.u16_value(kPlanarConfiguration, 0);
    ds.string_value(kNumberOfFrames, "IS", std::to_string(meta.frame_count));
    ds.u16_value(kRows, static_cast<std::uint16_t>(meta.height));
    ds.u16_value(kColumns, static_cast<std::uint16_t>(meta.width));
    ds.u16_value(kBitsAllocated, 8);
    ds.u16_value(tag(0x0028, 0x0101), 8);
    ds.u16_value(tag(0x0028, 0x0102), 7);
    ds.u16_value(kPixelRepresentation, 0);
    ds.bytes_value(kPixelData, "OB", volume.pixels);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    const std::array<char, 128> preamble{};
    out.write(preamble.data(), preamble.size());
    out.write("DICM", 4);
    out.write(reinterpret_cast<const char*>(all.data()), static_cast<std::streamsize>(all.size()));
    out.write(reinterpret_cast<const char*>(ds.bytes().data()), static_cast<std::streamsize>(ds.bytes().size()));
    if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
  }
}

}  // namespace vdscan::dicom
