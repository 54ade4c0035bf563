#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdscan/media.hpp"
#include "vdscan/rng.hpp"

namespace vdscan {

inline constexpr int kClipLength = 16;
inline constexpr int kClipSize = 224;
inline constexpr int kClipChannels = 3;
inline constexpr double kClipDurationSeconds = 2.1;
inline constexpr std::size_t kClipElements =
    static_cast<std::size_t>(kClipLength) * kClipSize * kClipSize * kClipChannels;

struct ClipIndexPlan {
  std::string video_id;
  std::size_t start_frame = 0;
  std::array<std::size_t, kClipLength> frame_indices{};
  std::uint64_t seed = 0;

  bool operator==(const ClipIndexPlan&) const = default;
};

struct NormStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> std{1.0, 1.0, 1.0};

  /// Throws InvalidConfig unless every component is finite and std > 0.
  void validate() const;

  bool operator==(const NormStats&) const = default;
};

/// Fixed-shape T x H x W x C clip of 32-bit reals.
struct ClipTensor {
  std::vector<float> data;  // kClipElements values
  std::optional<NormStats> normalization;  // set once normalized
  ClipIndexPlan plan;

  bool normalized() const noexcept { return normalization.has_value(); }

  float at(int t, int y, int x, int c) const { return data[offset(t, y, x, c)]; }
  float& at(int t, int y, int x, int c) { return data[offset(t, y, x, c)]; }

  static constexpr std::size_t offset(int t, int y, int x, int c) noexcept {
    return ((static_cast<std::size_t>(t) * kClipSize + static_cast<std::size_t>(y)) * kClipSize +
            static_cast<std::size_t>(x)) *
               kClipChannels +
           static_cast<std::size_t>(c);
  }
};

/// Number of frames spanned by one clip window: min(frame_count, round(duration * fps)), at least 1.
std::size_t clip_window_length(const VideoMeta& meta, double duration_s = kClipDurationSeconds);

/// Seeded uniform placement of clip windows; frame indices are the rounded
/// linspace over each window.
std::vector<ClipIndexPlan> plan_clips(const VideoMeta& meta, std::size_t n_clips, std::uint64_t seed,
                                      int clip_len = kClipLength, double duration_s = kClipDurationSeconds);

/// Gathers the planned frames, resizes the short side to out_size (bilinear),
/// center-crops to out_size^2, and replicates gray to three channels.
ClipTensor extract_clip(const FrameVolume& volume, const ClipIndexPlan& plan, int out_size = kClipSize);

/// (x / 255 - mean) / std per channel.
ClipTensor normalize(ClipTensor clip, const NormStats& stats);

struct AugConfig {
  double scale_min = 1.0;
  double scale_max = 1.25;
  double flip_probability = 0.5;
};

/// Training-export augmentation: random short-side upscale, random 224 crop,
/// random horizontal flip. Deterministic for a seed.
ClipTensor augment(const ClipTensor& clip, const AugConfig& config, std::uint64_t seed);

/// Per-sample weights N / (2 N_k); equalizes expected class draw probability.
std::vector<double> class_weights(std::span<const int> labels);

/// Seeded with-replacement sampler over per-sample weights.
class WeightedSampler {
 public:
  WeightedSampler(std::span<const double> weights, std::uint64_t seed);
  std::size_t next();

 private:
  std::discrete_distribution<std::size_t> dist_;
  Rng rng_;
};

// --- clip export for the training harness -------------------------------------

struct ExportRecord {
  std::string clip_file;
  std::string video_id;
  std::string individual_id;
  int label = 0;
  std::uint64_t seed = 0;
  std::array<std::size_t, kClipLength> frame_indices{};

  bool operator==(const ExportRecord&) const = default;
};

inline constexpr std::string_view kExportIndexName = "index.tsv";

/// Raw little-endian float32 in T x H x W x C order.
void write_clip_file(const ClipTensor& clip, const std::filesystem::path& path);
std::vector<float> read_clip_file(const std::filesystem::path& path);

void write_export_index(std::span<const ExportRecord> records, const std::filesystem::path& path);
std::vector<ExportRecord> read_export_index(const std::filesystem::path& path);

}  // namespace vdscan
