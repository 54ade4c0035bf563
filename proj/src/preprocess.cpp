#include "vdscan/preprocess.hpp"

#include <algorithm>
#include <cstdlib>

#include "vdscan/error.hpp"

namespace vdscan {

std::size_t UiMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double mask_iou(const UiMask& a, const UiMask& b) {
  if (a.width != b.width || a.height != b.height || a.mask.size() != b.mask.size()) {
    throw Error(ErrorKind::ShapeMismatch, "masks differ in shape");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.mask.size(); ++i) {
    inter += (a.mask[i] && b.mask[i]) ? 1 : 0;
    uni += (a.mask[i] || b.mask[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

UiMask compute_ui_mask(const FrameVolume& volume, double var_threshold, PixelChangeStatistic statistic) {
  volume.validate();
  const VideoMeta& meta = volume.meta;
  if (meta.frame_count < 2) {
    throw Error(ErrorKind::SingleFrameVideo, meta.video_id + ": temporal change needs at least two frames");
  }
  const std::size_t n_pixels = static_cast<std::size_t>(meta.width) * meta.height;
  const int channels = meta.channels();

  // Work on integer channel sums s in [0, 3*255]; the channel-mean intensity is s / channels.
  auto channel_sum = [&](std::size_t f, std::size_t p) {
    const std::uint8_t* px = volume.pixels.data() + f * meta.frame_bytes() + p * channels;
    int s = 0;
    for (int c = 0; c < channels; ++c) s += px[c];
    return s;
  };

  UiMask out{meta.width, meta.height, std::vector<std::uint8_t>(n_pixels, 0)};
  const double n = static_cast<double>(meta.frame_count);
  const double scale = static_cast<double>(channels);

  if (statistic == PixelChangeStatistic::Variance) {
    std::vector<std::uint64_t> sum(n_pixels, 0);
    std::vector<std::uint64_t> sum_sq(n_pixels, 0);
    for (std::size_t f = 0; f < meta.frame_count; ++f) {
      for (std::size_t p = 0; p < n_pixels; ++p) {
        const auto s = static_cast<std::uint64_t>(channel_sum(f, p));
        sum[p] += s;
        sum_sq[p] += s * s;
      }
    }
    for (std::size_t p = 0; p < n_pixels; ++p) {
      // n * sum_sq - sum^2 is exact in integers.
      const std::uint64_t num = static_cast<std::uint64_t>(n) * sum_sq[p] - sum[p] * sum[p];
      const double variance = static_cast<double>(num) / (n * n * scale * scale);
      out.mask[p] = variance <= var_threshold ? 1 : 0;
    }
  } else {
    std::vector<int> max_dev(n_pixels, 0);
    for (std::size_t f = 1; f < meta.frame_count; ++f) {
      for (std::size_t p = 0; p < n_pixels; ++p) {
        max_dev[p] = std::max(max_dev[p], std::abs(channel_sum(f, p) - channel_sum(0, p)));
      }
    }
    for (std::size_t p = 0; p < n_pixels; ++p) {
      out.mask[p] = static_cast<double>(max_dev[p]) / scale <= var_threshold ? 1 : 0;
    }
  }
  return out;
}

FrameVolume apply_ui_removal(const FrameVolume& volume, const UiMask& mask) {
  volume.validate();
  if (mask.width != volume.meta.width || mask.height != volume.meta.height ||
      mask.mask.size() != static_cast<std::size_t>(mask.width) * mask.height) {
    throw Error(ErrorKind::ShapeMismatch, volume.meta.video_id + ": mask shape does not match the video");
  }
  FrameVolume out = volume;
  const int channels = volume.meta.channels();
  for (std::size_t f = 0; f < volume.meta.frame_count; ++f) {
    auto frame = out.frame(f);
    for (std::size_t p = 0; p < mask.mask.size(); ++p) {
      if (!mask.mask[p]) continue;
      for (int c = 0; c < channels; ++c) frame[p * channels + c] = 0;
    }
  }
  return out;
}

FrameVolume crop_bottom(const FrameVolume& volume, int rows) {
  volume.validate();
  if (rows < 0 || rows >= volume.meta.height) {
    throw Error(ErrorKind::CropExceedsHeight, volume.meta.video_id + ": cannot crop " + std::to_string(rows) +
                                                  " rows from height " + std::to_string(volume.meta.height));
  }
  if (rows == 0) return volume;
  VideoMeta meta = volume.meta;
  meta.height -= rows;
  FrameVolume out = FrameVolume::zeros(meta);
  for (std::size_t f = 0; f < meta.frame_count; ++f) {
    const auto src = volume.frame(f);
    std::copy_n(src.begin(), meta.frame_bytes(), out.frame(f).begin());
  }
  return out;
}

namespace {

struct Hsv {
  double hue;  // degrees in [0, 360)
  double sat;
  double val;
};

Hsv to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0;
  const double g = g8 / 255.0;
  const double b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out{0.0, mx > 0.0 ? delta / mx : 0.0, mx};
  if (delta > 0.0) {
    if (mx == r) {
      out.hue = 60.0 * (g - b) / delta;
    } else if (mx == g) {
      out.hue = 60.0 * ((b - r) / delta + 2.0);
    } else {
      out.hue = 60.0 * ((r - g) / delta + 4.0);
    }
    if (out.hue < 0.0) out.hue += 360.0;
  }
  return out;
}

}  // namespace

DopplerScore doppler_score(const FrameVolume& volume, const PreprocessConfig& config) {
  volume.validate();
  if (volume.meta.color != ColorMode::Rgb8) return {};
  std::size_t red = 0;
  std::size_t blue = 0;
  const std::size_t total = volume.pixels.size() / 3;
  for (std::size_t i = 0; i < total; ++i) {
    const std::uint8_t* px = volume.pixels.data() + 3 * i;
    if (px[0] == px[1] && px[1] == px[2]) continue;  // gray: zero saturation
    const Hsv hsv = to_hsv(px[0], px[1], px[2]);
    if (hsv.sat < config.sat_min || hsv.val < config.val_min) continue;
    if (hsv.hue < config.red_hue_below || hsv.hue > config.red_hue_above) {
      ++red;
    } else if (hsv.hue >= config.blue_hue_min && hsv.hue <= config.blue_hue_max) {
      ++blue;
    }
  }
  return {static_cast<double>(red) / static_cast<double>(total), static_cast<double>(blue) / static_cast<double>(total)};
}

DopplerVerdict doppler_verdict(const DopplerScore& score, const PreprocessConfig& config) {
  return {score.red_fraction, score.blue_fraction,
          score.red_fraction > config.tau_red || score.blue_fraction > config.tau_blue};
}

PreprocessOutcome preprocess_video(const FrameVolume& volume, const PreprocessConfig& config) {
  const DopplerVerdict verdict = doppler_verdict(doppler_score(volume, config), config);
  if (verdict.excluded) return Excluded{verdict};
  const UiMask mask = compute_ui_mask(volume, config.var_threshold, config.statistic);
  return crop_bottom(apply_ui_removal(volume, mask), config.crop_px);
}

}  // namespace vdscan
