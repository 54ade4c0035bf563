#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vdscan/clips.hpp"

namespace vdscan {

/// Model output class. Index 1 is the hypertensive / high visual damage class.
enum class VdLabel { Low = 0, High = 1 };

std::string_view to_string(VdLabel label);
VdLabel parse_vd_label(std::string_view text);

/// Every level thresholds at 0.5 with ">= is High".
inline VdLabel label_for(double prob_high) { return prob_high >= 0.5 ? VdLabel::High : VdLabel::Low; }

struct ClipPrediction {
  ClipIndexPlan plan;
  std::string individual_id;
  std::size_t clip_index = 0;  // position of the plan within its video
  double prob_high_vd = 0.0;
  VdLabel label = VdLabel::Low;
  std::string model_id;

  std::string clip_id() const { return plan.video_id + "#" + std::to_string(clip_index); }
};

struct VideoPrediction {
  std::string video_id;
  std::string individual_id;
  std::size_t n_clips = 0;
  std::size_t votes_high = 0;
  double mean_prob = 0.0;
  VdLabel label = VdLabel::Low;
};

struct IndividualPrediction {
  std::string individual_id;
  std::size_t n_videos = 0;
  std::size_t votes_high = 0;
  double mean_prob = 0.0;
  VdLabel label = VdLabel::Low;
};

enum class AggregationPolicy {
  MajorityVote,    // majority of labels, tie broken by mean probability >= 0.5
  MeanProbability  // mean probability >= 0.5
};

/// Strict majority of clip labels; a tie falls back to mean probability >= 0.5.
VideoPrediction vote_video(std::span<const ClipPrediction> clips);

IndividualPrediction aggregate_individual(std::span<const VideoPrediction> videos,
                                          AggregationPolicy policy = AggregationPolicy::MajorityVote);

/// Groups clip predictions by video (sorted by video id) and votes each group.
std::vector<VideoPrediction> vote_all_videos(std::span<const ClipPrediction> clips);

/// Groups video predictions by individual (sorted by id) and aggregates each.
std::vector<IndividualPrediction> aggregate_all_individuals(std::span<const VideoPrediction> videos,
                                                            AggregationPolicy policy = AggregationPolicy::MajorityVote);

// --- prediction dumps (JSON lines) ------------------------------------------------

void write_clip_dump(std::span<const ClipPrediction> clips, const std::filesystem::path& path);
std::vector<ClipPrediction> read_clip_dump(const std::filesystem::path& path);

void write_video_dump(std::span<const VideoPrediction> videos, const std::filesystem::path& path);
void write_individual_dump(std::span<const IndividualPrediction> individuals, const std::filesystem::path& path);

}  // namespace vdscan
