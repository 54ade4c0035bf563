#include "vdscan/voting.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>

#include "vdscan/error.hpp"

namespace vdscan {

std::string_view to_string(VdLabel label) { return label == VdLabel::High ? "HighVD" : "LowVD"; }

VdLabel parse_vd_label(std::string_view text) {
  if (text == "HighVD") return VdLabel::High;
  if (text == "LowVD") return VdLabel::Low;
  throw Error(ErrorKind::InvalidSpec, "unknown label '" + std::string(text) + "'");
}

namespace {

/// Mean of values summed in sorted order, so the result (and any tie decision
/// taken on it) does not depend on input order.
double order_free_mean(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

VdLabel majority(std::size_t votes_high, std::size_t n, double mean_prob) {
  if (2 * votes_high > n) return VdLabel::High;
  if (2 * votes_high < n) return VdLabel::Low;
  return label_for(mean_prob);
}

}  // namespace

VideoPrediction vote_video(std::span<const ClipPrediction> clips) {
  if (clips.empty()) throw Error(ErrorKind::EmptyPredictionSet, "cannot vote on zero clips");
  VideoPrediction out;
  out.video_id = clips.front().plan.video_id;
  out.individual_id = clips.front().individual_id;
  out.n_clips = clips.size();
  std::vector<double> probs;
  probs.reserve(clips.size());
  for (const auto& clip : clips) {
    if (clip.plan.video_id != out.video_id) {
      throw Error(ErrorKind::MixedVideoIds, "clips from " + out.video_id + " and " + clip.plan.video_id);
    }
    out.votes_high += clip.label == VdLabel::High ? 1 : 0;
    probs.push_back(clip.prob_high_vd);
  }
  out.mean_prob = order_free_mean(std::move(probs));
  out.label = majority(out.votes_high, out.n_clips, out.mean_prob);
  return out;
}

IndividualPrediction aggregate_individual(std::span<const VideoPrediction> videos, AggregationPolicy policy) {
  if (videos.empty()) throw Error(ErrorKind::EmptyPredictionSet, "cannot aggregate zero videos");
  IndividualPrediction out;
  out.individual_id = videos.front().individual_id;
  out.n_videos = videos.size();
  std::vector<double> probs;
  for (const auto& v : videos) {
    if (v.individual_id != out.individual_id) {
      throw Error(ErrorKind::MixedIndividualIds, "videos from " + out.individual_id + " and " + v.individual_id);
    }
    out.votes_high += v.label == VdLabel::High ? 1 : 0;
    probs.push_back(v.mean_prob);
  }
  out.mean_prob = order_free_mean(std::move(probs));
  out.label = policy == AggregationPolicy::MajorityVote ? majority(out.votes_high, out.n_videos, out.mean_prob)
                                                        : label_for(out.mean_prob);
  return out;
}

std::vector<VideoPrediction> vote_all_videos(std::span<const ClipPrediction> clips) {
  std::map<std::string, std::vector<ClipPrediction>> by_video;
  for (const auto& clip : clips) by_video[clip.plan.video_id].push_back(clip);
  std::vector<VideoPrediction> out;
  out.reserve(by_video.size());
  for (const auto& [id, group] : by_video) out.push_back(vote_video(group));
  return out;
}

std::vector<IndividualPrediction> aggregate_all_individuals(std::span<const VideoPrediction> videos,
                                                            AggregationPolicy policy) {
  std::map<std::string, std::vector<VideoPrediction>> by_individual;
  for (const auto& v : videos) by_individual[v.individual_id].push_back(v);
  std::vector<IndividualPrediction> out;
  out.reserve(by_individual.size());
  for (const auto& [id, group] : by_individual) out.push_back(aggregate_individual(group, policy));
  return out;
}

// --- dumps ----------------------------------------------------------------------

namespace {

template <typename Range, typename ToJson>
void write_lines(const Range& records, const std::filesystem::path& path, ToJson&& to_json) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << "\n";
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

}  // namespace

void write_clip_dump(std::span<const ClipPrediction> clips, const std::filesystem::path& path) {
  write_lines(clips, path, [](const ClipPrediction& c) {
    return nlohmann::ordered_json{
        {"clip_id", c.clip_id()},
        {"video_id", c.plan.video_id},
        {"individual_id", c.individual_id},
        {"clip_index", c.clip_index},
        {"prob", c.prob_high_vd},
        {"label", to_string(c.label)},
        {"model_id", c.model_id},
        {"seed", c.plan.seed},
        {"start_frame", c.plan.start_frame},
        {"frame_indices", c.plan.frame_indices},
    };
  });
}

std::vector<ClipPrediction> read_clip_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
  std::vector<ClipPrediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ClipPrediction c;
      c.plan.video_id = j.at("video_id").get<std::string>();
      c.individual_id = j.at("individual_id").get<std::string>();
      c.clip_index = j.at("clip_index").get<std::size_t>();
      c.prob_high_vd = j.at("prob").get<double>();
      c.label = parse_vd_label(j.at("label").get<std::string>());
      c.model_id = j.value("model_id", std::string{});
      c.plan.seed = j.value("seed", std::uint64_t{0});
      c.plan.start_frame = j.value("start_frame", std::size_t{0});
      if (j.contains("frame_indices")) c.plan.frame_indices = j.at("frame_indices").get<std::array<std::size_t, kClipLength>>();
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::CorruptHeader, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_video_dump(std::span<const VideoPrediction> videos, const std::filesystem::path& path) {
  write_lines(videos, path, [](const VideoPrediction& v) {
    return nlohmann::ordered_json{{"video_id", v.video_id},     {"individual_id", v.individual_id},
                                  {"n_clips", v.n_clips},       {"votes_high", v.votes_high},
                                  {"mean_prob", v.mean_prob},   {"label", to_string(v.label)}};
  });
}

void write_individual_dump(std::span<const IndividualPrediction> individuals, const std::filesystem::path& path) {
  write_lines(individuals, path, [](const IndividualPrediction& p) {
    return nlohmann::ordered_json{{"individual_id", p.individual_id}, {"n_videos", p.n_videos},
                                  {"votes_high", p.votes_high},       {"mean_prob", p.mean_prob},
                                  {"label", to_string(p.label)}};
  });
}

}  // namespace vdscan
