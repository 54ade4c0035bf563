#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "vdscan/media.hpp"

namespace vdscan {

/// Per-pixel static-overlay mask; true marks device UI or other content that
/// does not change over time.
struct UiMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> mask;  // 0/1, row-major

  bool at(int y, int x) const { return mask[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const;

  bool operator==(const UiMask&) const = default;
};

/// Intersection-over-union of two equally shaped masks (1.0 when both are empty).
double mask_iou(const UiMask& a, const UiMask& b);

struct DopplerScore {
  double red_fraction = 0.0;
  double blue_fraction = 0.0;
};

struct DopplerVerdict {
  double red_fraction = 0.0;
  double blue_fraction = 0.0;
  bool excluded = false;
};

/// Statistic used to decide whether a pixel changes over time.
enum class PixelChangeStatistic {
  Variance,        // population variance of the channel-mean intensity
  MaxAbsDeviation  // max |I_t - I_0| of the channel-mean intensity
};

struct PreprocessConfig {
  double var_threshold = 2.0;
  PixelChangeStatistic statistic = PixelChangeStatistic::Variance;
  int crop_px = 45;
  // Hue in degrees. Red wraps around 0: hue < red_hue_below or hue > red_hue_above.
  double red_hue_below = 20.0;
  double red_hue_above = 340.0;
  double blue_hue_min = 200.0;
  double blue_hue_max = 260.0;
  double sat_min = 0.3;
  double val_min = 0.2;
  double tau_red = 0.02;
  double tau_blue = 0.02;
};

UiMask compute_ui_mask(const FrameVolume& volume, double var_threshold,
                       PixelChangeStatistic statistic = PixelChangeStatistic::Variance);

FrameVolume apply_ui_removal(const FrameVolume& volume, const UiMask& mask);

FrameVolume crop_bottom(const FrameVolume& volume, int rows);

/// Pooled red/blue pixel fractions over every pixel of every frame.
DopplerScore doppler_score(const FrameVolume& volume, const PreprocessConfig& config = {});

DopplerVerdict doppler_verdict(const DopplerScore& score, const PreprocessConfig& config);

struct Excluded {
  DopplerVerdict verdict;
};

using PreprocessOutcome = std::variant<FrameVolume, Excluded>;

/// Doppler check, exclusion, UI mask, UI removal, bottom crop, in that order.
PreprocessOutcome preprocess_video(const FrameVolume& volume, const PreprocessConfig& config);

}  // namespace vdscan
