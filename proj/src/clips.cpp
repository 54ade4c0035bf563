#include "vdscan/clips.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vdscan/error.hpp"
#include "vdscan/kv.hpp"

namespace vdscan {

void NormStats::validate() const {
  for (int c = 0; c < 3; ++c) {
    if (!std::isfinite(mean[c]) || !std::isfinite(std[c]) || !(std[c] > 0.0)) {
      throw Error(ErrorKind::InvalidConfig, "normalization statistics must be finite with positive std");
    }
  }
}

std::size_t clip_window_length(const VideoMeta& meta, double duration_s) {
  const double span = std::round(duration_s * meta.fps);
  const std::size_t window = span < 1.0 ? 1 : static_cast<std::size_t>(span);
  return std::min(meta.frame_count, window);
}

std::vector<ClipIndexPlan> plan_clips(const VideoMeta& meta, std::size_t n_clips, std::uint64_t seed, int clip_len,
                                      double duration_s) {
  if (clip_len != kClipLength) throw Error(ErrorKind::InvalidConfig, "clip length is fixed at 16 frames");
  if (n_clips < 1) throw Error(ErrorKind::InvalidConfig, "at least one clip per video is required");
  if (meta.frame_count < static_cast<std::size_t>(clip_len)) {
    throw Error(ErrorKind::VideoTooShort, meta.video_id + ": " + std::to_string(meta.frame_count) + " frames < " +
                                              std::to_string(clip_len));
  }
  const std::size_t window = clip_window_length(meta, duration_s);
  const std::size_t last_start = meta.frame_count - window;
  const std::size_t steps = static_cast<std::size_t>(clip_len - 1);

  std::vector<ClipIndexPlan> plans;
  plans.reserve(n_clips);
  for (std::size_t i = 0; i < n_clips; ++i) {
    ClipIndexPlan plan;
    plan.video_id = meta.video_id;
    plan.seed = derive_seed(seed, {hash_string(meta.video_id), i});
    Rng rng(plan.seed);
    plan.start_frame = std::uniform_int_distribution<std::size_t>(0, last_start)(rng);
    for (std::size_t k = 0; k <= steps; ++k) {
      // round(k * (window - 1) / steps), half up, in exact integer arithmetic
      plan.frame_indices[k] = plan.start_frame + (2 * k * (window - 1) + steps) / (2 * steps);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

namespace {

/// Source taps for one output axis of a half-pixel-centred bilinear resize,
/// restricted to the output range [offset, offset + count).
struct AxisMap {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<float> weight;
};

AxisMap axis_map(int src_len, int dst_len, int offset, int count) {
  AxisMap m;
  m.lo.resize(count);
  m.hi.resize(count);
  m.weight.resize(count);
  const double ratio = static_cast<double>(src_len) / dst_len;
  for (int i = 0; i < count; ++i) {
    double s = (i + offset + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src_len - 1));
    const int lo = static_cast<int>(std::floor(s));
    m.lo[i] = lo;
    m.hi[i] = std::min(lo + 1, src_len - 1);
    m.weight[i] = static_cast<float>(s - lo);
  }
  return m;
}

inline float lerp(float a, float b, float w) { return a + w * (b - a); }

/// Bilinear resample of one interleaved frame through precomputed axis maps.
template <typename Sample>
void resample(const AxisMap& ys, const AxisMap& xs, int channels_out, Sample&& sample, float* dst, int dst_stride) {
  const int rows = static_cast<int>(ys.lo.size());
  const int cols = static_cast<int>(xs.lo.size());
  for (int y = 0; y < rows; ++y) {
    for (int x = 0; x < cols; ++x) {
      float* out = dst + (static_cast<std::size_t>(y) * dst_stride + x) * channels_out;
      for (int c = 0; c < channels_out; ++c) {
        const float top = lerp(sample(ys.lo[y], xs.lo[x], c), sample(ys.lo[y], xs.hi[x], c), xs.weight[x]);
        const float bottom = lerp(sample(ys.hi[y], xs.lo[x], c), sample(ys.hi[y], xs.hi[x], c), xs.weight[x]);
        out[c] = lerp(top, bottom, ys.weight[y]);
      }
    }
  }
}

}  // namespace

ClipTensor extract_clip(const FrameVolume& volume, const ClipIndexPlan& plan, int out_size) {
  volume.validate();
  if (out_size != kClipSize) throw Error(ErrorKind::InvalidConfig, "clip output size is fixed at 224");
  const VideoMeta& meta = volume.meta;
  for (auto idx : plan.frame_indices) {
    if (idx >= meta.frame_count) {
      throw Error(ErrorKind::IndexOutOfRange, meta.video_id + ": frame index " + std::to_string(idx) +
                                                  " >= frame count " + std::to_string(meta.frame_count));
    }
  }

  const int short_side = std::min(meta.width, meta.height);
  const auto scaled = [&](int len) {
    return len == short_side ? out_size
                             : static_cast<int>(std::lround(static_cast<double>(len) * out_size / short_side));
  };
  const int new_w = std::max(out_size, scaled(meta.width));
  const int new_h = std::max(out_size, scaled(meta.height));
  const AxisMap xs = axis_map(meta.width, new_w, (new_w - out_size) / 2, out_size);
  const AxisMap ys = axis_map(meta.height, new_h, (new_h - out_size) / 2, out_size);

  ClipTensor clip;
  clip.plan = plan;
  clip.data.assign(kClipElements, 0.0f);
  const int channels = meta.channels();
  const std::size_t row_stride = static_cast<std::size_t>(meta.width) * channels;
  for (int t = 0; t < kClipLength; ++t) {
    const std::uint8_t* frame = volume.frame(plan.frame_indices[t]).data();
    auto sample = [&](int y, int x, int c) {
      return static_cast<float>(frame[y * row_stride + static_cast<std::size_t>(x) * channels + (channels == 1 ? 0 : c)]);
    };
    resample(ys, xs, kClipChannels, sample, clip.data.data() + ClipTensor::offset(t, 0, 0, 0), out_size);
  }
  return clip;
}

ClipTensor normalize(ClipTensor clip, const NormStats& stats) {
  if (clip.normalized()) throw Error(ErrorKind::AlreadyNormalized, clip.plan.video_id + ": clip already normalized");
  stats.validate();
  if (clip.data.size() != kClipElements) throw Error(ErrorKind::ShapeMismatch, "clip has the wrong element count");
  for (std::size_t i = 0; i < clip.data.size(); ++i) {
    const std::size_t c = i % kClipChannels;
    clip.data[i] = static_cast<float>((clip.data[i] / 255.0 - stats.mean[c]) / stats.std[c]);
  }
  clip.normalization = stats;
  return clip;
}

ClipTensor augment(const ClipTensor& clip, const AugConfig& config, std::uint64_t seed) {
  if (!(config.scale_min >= 1.0) || config.scale_max < config.scale_min) {
    throw Error(ErrorKind::InvalidConfig, "augmentation scale range must satisfy 1 <= min <= max");
  }
  Rng rng(seed);
  const double scale = config.scale_min + (config.scale_max - config.scale_min) * uniform01(rng);
  const int side = std::max(kClipSize, static_cast<int>(std::lround(kClipSize * scale)));
  const int off_y = std::uniform_int_distribution<int>(0, side - kClipSize)(rng);
  const int off_x = std::uniform_int_distribution<int>(0, side - kClipSize)(rng);
  const bool flip = uniform01(rng) < config.flip_probability;

  const AxisMap ys = axis_map(kClipSize, side, off_y, kClipSize);
  AxisMap xs = axis_map(kClipSize, side, off_x, kClipSize);
  if (flip) {
    std::reverse(xs.lo.begin(), xs.lo.end());
    std::reverse(xs.hi.begin(), xs.hi.end());
    std::reverse(xs.weight.begin(), xs.weight.end());
  }

  ClipTensor out;
  out.plan = clip.plan;
  out.normalization = clip.normalization;
  out.data.assign(kClipElements, 0.0f);
  for (int t = 0; t < kClipLength; ++t) {
    auto sample = [&](int y, int x, int c) { return clip.at(t, y, x, c); };
    resample(ys, xs, kClipChannels, sample, out.data.data() + ClipTensor::offset(t, 0, 0, 0), kClipSize);
  }
  return out;
}

std::vector<double> class_weights(std::span<const int> labels) {
  std::array<std::size_t, 2> counts{0, 0};
  for (int label : labels) {
    if (label != 0 && label != 1) throw Error(ErrorKind::InvalidSpec, "class labels must be 0 or 1");
    ++counts[static_cast<std::size_t>(label)];
  }
  if (counts[0] == 0 || counts[1] == 0) {
    throw Error(ErrorKind::SingleClassDataset, "both classes must be present to balance sampling");
  }
  const double n = static_cast<double>(labels.size());
  std::vector<double> weights;
  weights.reserve(labels.size());
  for (int label : labels) weights.push_back(n / (2.0 * static_cast<double>(counts[static_cast<std::size_t>(label)])));
  return weights;
}

WeightedSampler::WeightedSampler(std::span<const double> weights, std::uint64_t seed)
    : dist_(weights.begin(), weights.end()), rng_(seed) {
  if (weights.empty()) throw Error(ErrorKind::EmptyInput, "weighted sampler needs at least one weight");
}

std::size_t WeightedSampler::next() { return dist_(rng_); }

// --- export -------------------------------------------------------------------

void write_clip_file(const ClipTensor& clip, const std::filesystem::path& path) {
  if (clip.data.size() != kClipElements) throw Error(ErrorKind::ShapeMismatch, "clip has the wrong element count");
  std::vector<std::uint32_t> words(clip.data.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::uint32_t w = std::bit_cast<std::uint32_t>(clip.data[i]);
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    words[i] = w;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) throw Error(ErrorKind::IoError, "cannot write clip " + path.string());
}

std::vector<float> read_clip_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open clip " + path.string());
  std::vector<std::uint32_t> words(kClipElements + 1);
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (static_cast<std::size_t>(in.gcount()) != kClipElements * 4) {
    throw Error(ErrorKind::ShapeMismatch, path.string() + " is not a 16x224x224x3 float32 clip");
  }
  std::vector<float> data(kClipElements);
  for (std::size_t i = 0; i < kClipElements; ++i) {
    std::uint32_t w = words[i];
    if constexpr (std::endian::native == std::endian::big) w = __builtin_bswap32(w);
    data[i] = std::bit_cast<float>(w);
  }
  return data;
}

namespace {
constexpr std::string_view kIndexHeader = "clip_file\tvideo_id\tindividual_id\tlabel\tseed\tframe_indices";
}

void write_export_index(std::span<const ExportRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << kIndexHeader << "\n";
  for (const auto& r : records) {
    out << r.clip_file << '\t' << r.video_id << '\t' << r.individual_id << '\t' << r.label << '\t' << r.seed << '\t';
    for (std::size_t k = 0; k < r.frame_indices.size(); ++k) out << (k ? "," : "") << r.frame_indices[k];
    out << "\n";
  }
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

std::vector<ExportRecord> read_export_index(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || kv::trim(line) != kIndexHeader) {
    throw Error(ErrorKind::CorruptHeader, path.string() + ": unexpected index header");
  }
  std::vector<ExportRecord> out;
  while (std::getline(in, line)) {
    if (kv::trim(line).empty()) continue;
    const auto cols = kv::split(kv::trim(line), '\t');
    const auto indices = cols.size() == 6 ? kv::split(cols[5], ',') : std::vector<std::string>{};
    if (indices.size() != kClipLength) throw Error(ErrorKind::CorruptHeader, path.string() + ": malformed record");
    ExportRecord r;
    r.clip_file = cols[0];
    r.video_id = cols[1];
    r.individual_id = cols[2];
    r.label = std::stoi(cols[3]);
    r.seed = std::stoull(cols[4]);
    for (int k = 0; k < kClipLength; ++k) r.frame_indices[k] = std::stoull(indices[k]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace vdscan
