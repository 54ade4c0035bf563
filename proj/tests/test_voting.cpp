#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "support.hpp"
#include "vdscan/error.hpp"
#include "vdscan/voting.hpp"

using namespace vdscan;
using vdscan::testing::TempDir;

namespace {

ClipPrediction clip(double p, std::string video = "v1", std::string ind = "p1", std::size_t index = 0) {
  ClipPrediction c;
  c.plan.video_id = std::move(video);
  c.individual_id = std::move(ind);
  c.clip_index = index;
  c.prob_high_vd = p;
  c.label = label_for(p);
  c.model_id = "m";
  return c;
}

VideoPrediction video(VdLabel label, double mean, std::string id = "v", std::string ind = "p1") {
  VideoPrediction v;
  v.video_id = std::move(id);
  v.individual_id = std::move(ind);
  v.n_clips = 1;
  v.votes_high = label == VdLabel::High;
  v.mean_prob = mean;
  v.label = label;
  return v;
}

}  // namespace

TEST_CASE("threshold 0.5 is inclusive") {
  CHECK(label_for(0.5) == VdLabel::High);
  CHECK(label_for(0.4999999) == VdLabel::Low);
  CHECK(parse_vd_label(to_string(VdLabel::High)) == VdLabel::High);
  CHECK(parse_vd_label(to_string(VdLabel::Low)) == VdLabel::Low);
  CHECK_THROWS_AS(parse_vd_label("maybe"), Error);
}

TEST_CASE("video voting examples") {
  const std::vector<ClipPrediction> a{clip(0.9), clip(0.8), clip(0.1)};
  const VideoPrediction va = vote_video(a);
  CHECK(va.label == VdLabel::High);
  CHECK(va.votes_high == 2);
  CHECK(va.n_clips == 3);
  CHECK(va.mean_prob == doctest::Approx(0.6));

  // A tie falls back to the mean probability.
  const std::vector<ClipPrediction> b{clip(0.9), clip(0.2)};
  CHECK(vote_video(b).label == VdLabel::High);
  const std::vector<ClipPrediction> c{clip(0.6), clip(0.1)};
  CHECK(vote_video(c).label == VdLabel::Low);

  const std::vector<ClipPrediction> d{clip(0.3)};
  CHECK(vote_video(d).label == VdLabel::Low);

  // Majority beats the mean: two weak highs against one confident low.
  const std::vector<ClipPrediction> e{clip(0.51), clip(0.52), clip(0.0)};
  CHECK(vote_video(e).label == VdLabel::High);
  CHECK(vote_video(e).mean_prob < 0.5);
}

TEST_CASE("voting errors") {
  const std::vector<ClipPrediction> none;
  CHECK_THROWS_AS(vote_video(none), Error);
  const std::vector<ClipPrediction> mixed{clip(0.9, "a"), clip(0.9, "b")};
  try {
    vote_video(mixed);
    FAIL("expected MixedVideoIds");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MixedVideoIds);
  }
  const std::vector<VideoPrediction> people{video(VdLabel::High, 0.9, "a", "p1"), video(VdLabel::High, 0.9, "b", "p2")};
  try {
    aggregate_individual(people);
    FAIL("expected MixedIndividualIds");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MixedIndividualIds);
  }
  const std::vector<VideoPrediction> no_videos;
  CHECK_THROWS_AS(aggregate_individual(no_videos), Error);
}

TEST_CASE("individual aggregation") {
  const std::vector<VideoPrediction> two_high{video(VdLabel::High, 0.7, "a"), video(VdLabel::High, 0.6, "b"),
                                              video(VdLabel::Low, 0.1, "c")};
  const IndividualPrediction i = aggregate_individual(two_high);
  CHECK(i.label == VdLabel::High);
  CHECK(i.n_videos == 3);
  CHECK(i.votes_high == 2);

  const std::vector<VideoPrediction> tie{video(VdLabel::High, 0.55, "a"), video(VdLabel::Low, 0.35, "b")};
  CHECK(aggregate_individual(tie).label == VdLabel::Low);  // mean 0.45
  CHECK(aggregate_individual(tie, AggregationPolicy::MeanProbability).label == VdLabel::Low);

  const std::vector<VideoPrediction> mean_only{video(VdLabel::High, 0.51, "a"), video(VdLabel::High, 0.52, "b"),
                                               video(VdLabel::Low, 0.0, "c")};
  CHECK(aggregate_individual(mean_only).label == VdLabel::High);
  CHECK(aggregate_individual(mean_only, AggregationPolicy::MeanProbability).label == VdLabel::Low);
}

TEST_CASE("grouping sorts by id") {
  const std::vector<ClipPrediction> clips{clip(0.9, "v2", "p2"), clip(0.1, "v1", "p1"), clip(0.8, "v2", "p2", 1),
                                          clip(0.7, "v3", "p1")};
  const auto videos = vote_all_videos(clips);
  REQUIRE(videos.size() == 3);
  CHECK(videos[0].video_id == "v1");
  CHECK(videos[1].n_clips == 2);
  const auto people = aggregate_all_individuals(videos);
  REQUIRE(people.size() == 2);
  CHECK(people[0].individual_id == "p1");
  CHECK(people[0].n_videos == 2);
  CHECK(people[1].label == VdLabel::High);
}

TEST_CASE("permutation invariance and monotonicity, exhaustive to n = 7") {
  const double probs_high[] = {0.5, 0.75, 0.99};
  const double probs_low[] = {0.0, 0.3, 0.49};
  for (int n = 1; n <= 7; ++n) {
    for (unsigned bits = 0; bits < (1u << n); ++bits) {
      std::vector<ClipPrediction> clips;
      for (int k = 0; k < n; ++k) {
        const bool high = (bits >> k) & 1u;
        clips.push_back(clip(high ? probs_high[k % 3] : probs_low[(k + bits) % 3], "v", "p", static_cast<std::size_t>(k)));
      }
      const VdLabel base = vote_video(clips).label;

      std::vector<ClipPrediction> perm = clips;
      std::reverse(perm.begin(), perm.end());
      REQUIRE(vote_video(perm).label == base);
      std::rotate(perm.begin(), perm.begin() + n / 2, perm.end());
      REQUIRE(vote_video(perm).label == base);

      if (base == VdLabel::High) {
        for (int k = 0; k < n; ++k) {
          if (clips[static_cast<std::size_t>(k)].label == VdLabel::High) continue;
          std::vector<ClipPrediction> up = clips;
          up[static_cast<std::size_t>(k)] = clip(0.9, "v", "p", static_cast<std::size_t>(k));
          REQUIRE(vote_video(up).label == VdLabel::High);
        }
      }
    }
  }
}

TEST_CASE("clip dump round trip") {
  TempDir dir("dump");
  std::vector<ClipPrediction> clips;
  for (std::size_t i = 0; i < 5; ++i) {
    ClipPrediction c = clip(0.1 + 0.2 * static_cast<double>(i), "v" + std::to_string(i / 2), "p", i % 2);
    c.plan.start_frame = 3 * i;
    c.plan.seed = 0xabcdef0123456789ULL + i;
    for (std::size_t k = 0; k < kClipLength; ++k) c.plan.frame_indices[k] = c.plan.start_frame + k;
    clips.push_back(c);
  }
  write_clip_dump(clips, dir / "clips.jsonl");
  const auto back = read_clip_dump(dir / "clips.jsonl");
  REQUIRE(back.size() == clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    CHECK(back[i].plan == clips[i].plan);
    CHECK(back[i].individual_id == clips[i].individual_id);
    CHECK(back[i].clip_index == clips[i].clip_index);
    CHECK(back[i].prob_high_vd == clips[i].prob_high_vd);
    CHECK(back[i].label == clips[i].label);
    CHECK(back[i].model_id == clips[i].model_id);
  }

  testing::spit(dir / "broken.jsonl", "{\"video_id\": 3\n");
  CHECK_THROWS_AS(read_clip_dump(dir / "broken.jsonl"), Error);
}
