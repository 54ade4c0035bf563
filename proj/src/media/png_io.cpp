#include <png.h>

#include <cstring>

#include "vdscan/error.hpp"
#include "vdscan/media.hpp"

namespace vdscan::png {
namespace {

struct ImageGuard {
  png_image image{};
  ImageGuard() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~ImageGuard() { png_image_free(&image); }
  ImageGuard(const ImageGuard&) = delete;
  ImageGuard& operator=(const ImageGuard&) = delete;
};

void begin(ImageGuard& guard, const std::filesystem::path& path) {
  if (!png_image_begin_read_from_file(&guard.image, path.c_str())) {
    throw Error(ErrorKind::CorruptHeader, "cannot read PNG " + path.string() + ": " + guard.image.message);
  }
}

int channels_of(png_uint_32 format) { return (format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1; }

}  // namespace

Header read_header(const std::filesystem::path& path) {
  ImageGuard guard;
  begin(guard, path);
  return {static_cast<int>(guard.image.width), static_cast<int>(guard.image.height), channels_of(guard.image.format)};
}

Image read(const std::filesystem::path& path) {
  ImageGuard guard;
  begin(guard, path);
  Image out;
  out.width = static_cast<int>(guard.image.width);
  out.height = static_cast<int>(guard.image.height);
  out.channels = channels_of(guard.image.format);
  guard.image.format = out.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  out.pixels.resize(PNG_IMAGE_SIZE(guard.image));
  if (!png_image_finish_read(&guard.image, nullptr, out.pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::PixelDataTruncated, "cannot decode PNG " + path.string() + ": " + guard.image.message);
  }
  return out;
}

void write(const std::filesystem::path& path, int width, int height, int channels,
           std::span<const std::uint8_t> pixels) {
  if (channels != 1 && channels != 3) throw Error(ErrorKind::UnsupportedFormat, "PNG writer supports 1 or 3 channels");
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorKind::ShapeMismatch, "PNG pixel buffer size does not match geometry");
  }
  ImageGuard guard;
  guard.image.width = static_cast<png_uint_32>(width);
  guard.image.height = static_cast<png_uint_32>(height);
  guard.image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&guard.image, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorKind::IoError, "cannot write PNG " + path.string() + ": " + guard.image.message);
  }
}

}  // namespace vdscan::png
