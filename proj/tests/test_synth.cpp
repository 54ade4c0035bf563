#include <doctest.h>

#include <cmath>
#include <variant>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "vdscan/clips.hpp"
#include "vdscan/error.hpp"
#include "vdscan/model.hpp"
#include "vdscan/synth.hpp"

using namespace vdscan;
using vdscan::testing::TempDir;

namespace {

synth::SynthVideoSpec small(ColorMode color = ColorMode::Gray8) {
  synth::SynthVideoSpec s;
  s.width = 96;
  s.height = 96;
  s.frame_count = 32;
  s.color = color;
  s.overlay = {10, 12, 24};
  return s;
}

double channel_mean_variance(const FrameVolume& v, int y, int x) {
  double sum = 0, sq = 0;
  for (std::size_t f = 0; f < v.meta.frame_count; ++f) {
    double s = 0;
    for (int c = 0; c < v.meta.channels(); ++c) s += v.at(f, y, x, c);
    s /= v.meta.channels();
    sum += s;
    sq += s * s;
  }
  const double n = static_cast<double>(v.meta.frame_count);
  return sq / n - (sum / n) * (sum / n);
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto a = synth::gen_video(small(ColorMode::Rgb8), 5);
  const auto b = synth::gen_video(small(ColorMode::Rgb8), 5);
  const auto c = synth::gen_video(small(ColorMode::Rgb8), 6);
  CHECK(a.volume == b.volume);
  CHECK(a.truth.ui_mask == b.truth.ui_mask);
  CHECK(a.volume != c.volume);
  CHECK(a.truth.seed == 5);
}

TEST_CASE("overlay pixels are static and the background moves") {
  for (ColorMode color : {ColorMode::Gray8, ColorMode::Rgb8}) {
    auto spec = small(color);
    const auto video = synth::gen_video(spec, 17);
    const FrameVolume& v = video.volume;
    const UiMask& m = video.truth.ui_mask;
    CHECK(m.count() > 0);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        if (m.at(y, x)) {
          for (std::size_t f = 1; f < v.meta.frame_count; ++f)
            for (int c = 0; c < v.meta.channels(); ++c) REQUIRE(v.at(f, y, x, c) == v.at(0, y, x, c));
        } else if (y < spec.height - spec.overlay.heartline_rows) {
          REQUIRE(channel_mean_variance(v, y, x) >= spec.variance_floor - 1e-9);
        }
      }
    }
  }
}

TEST_CASE("no overlay and no Doppler") {
  auto spec = small();
  spec.overlay = {};
  const auto video = synth::gen_video(spec, 1);
  CHECK(video.truth.ui_mask.count() == 0);
  CHECK_FALSE(video.truth.doppler_flag);
  CHECK(video.truth.doppler_fraction == 0.0);
}

TEST_CASE("Doppler patch covers its realized fraction in the hue band") {
  for (auto hue : {synth::DopplerHue::Red, synth::DopplerHue::Blue}) {
    auto spec = small(ColorMode::Rgb8);
    spec.doppler = synth::DopplerPatch{0.08, hue};
    const auto video = synth::gen_video(spec, 31);
    CHECK(video.truth.doppler_flag);
    CHECK(video.truth.doppler_hue == hue);
    CHECK(video.truth.doppler_fraction == doctest::Approx(0.08).epsilon(0.25));
    const DopplerScore s = doppler_score(video.volume);
    const double got = hue == synth::DopplerHue::Red ? s.red_fraction : s.blue_fraction;
    const double other = hue == synth::DopplerHue::Red ? s.blue_fraction : s.red_fraction;
    CHECK(got == doctest::Approx(video.truth.doppler_fraction).epsilon(1e-12));
    CHECK(other == 0.0);
  }
}

TEST_CASE("invalid video specs") {
  auto expect_invalid = [](synth::SynthVideoSpec s) {
    try {
      synth::gen_video(s, 1);
      FAIL("expected InvalidSpec");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidSpec);
    }
  };
  auto s = small(ColorMode::Rgb8);
  s.doppler = synth::DopplerPatch{1.0, synth::DopplerHue::Red};
  expect_invalid(s);
  s = small(ColorMode::Gray8);
  s.doppler = synth::DopplerPatch{0.1, synth::DopplerHue::Red};
  expect_invalid(s);
  s = small();
  s.mu1 = s.mu0;
  expect_invalid(s);
  s = small();
  s.width = 32;
  expect_invalid(s);
  s = small();
  s.frame_count = 1;
  expect_invalid(s);
  s = small();
  s.overlay.right_cols = 60;
  expect_invalid(s);
  // Without the separability requirement equal contrasts are allowed.
  s = small();
  s.mu1 = s.mu0;
  s.separable = false;
  CHECK_NOTHROW(synth::gen_video(s, 1));
}

TEST_CASE("ground-truth sidecars") {
  TempDir dir("truth");
  auto spec = small(ColorMode::Rgb8);
  spec.doppler = synth::DopplerPatch{0.05, synth::DopplerHue::Blue};
  spec.texture_class = 1;
  const auto video = synth::gen_video(spec, 9);
  synth::write_ground_truth(video.truth, dir.path(), "v");
  const png::Image mask = png::read(dir / "v.mask.png");
  REQUIRE(mask.width == spec.width);
  REQUIRE(mask.height == spec.height);
  REQUIRE(mask.channels == 1);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
    REQUIRE(mask.pixels[i] == (video.truth.ui_mask.mask[i] ? 255 : 0));
  }
  const auto j = nlohmann::json::parse(testing::slurp(dir / "v.truth.json"));
  CHECK(j.at("doppler_flag").get<bool>());
  CHECK(j.at("texture_class").get<int>() == 1);
}

TEST_CASE("texture classes separate in the builtin feature space") {
  const NormStats stats{{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};
  std::vector<ClipTensor> clips;
  std::vector<int> labels;
  for (int i = 0; i < 16; ++i) {
    auto spec = small(i % 3 ? ColorMode::Gray8 : ColorMode::Rgb8);
    spec.texture_class = i % 2;
    const auto video = synth::gen_video(spec, 100 + static_cast<std::uint64_t>(i));
    const auto out = preprocess_video(video.volume, PreprocessConfig{});
    REQUIRE(std::holds_alternative<FrameVolume>(out));
    const FrameVolume& v = std::get<FrameVolume>(out);
    for (const auto& plan : plan_clips(v.meta, 2, 7)) {
      clips.push_back(normalize(extract_clip(v, plan), stats));
      labels.push_back(spec.texture_class);
    }
  }
  TrainOptions opt;
  opt.seed = 4;
  const ModelHandle m = train_builtin(clips, labels, stats, opt);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) correct += (predict_clip(m, clips[i]).label == VdLabel::High) == (labels[i] == 1);
  CHECK(correct == clips.size());
}

TEST_CASE("cohort generation basics") {
  auto spec = synth::SynthCohortSpec::defaults();
  spec.n_individuals = 1;
  const auto one = synth::gen_cohort(spec, 3);
  REQUIRE(one.records.size() == 1);
  CHECK(one.videos.size() == spec.videos_per_individual);
  CHECK(one.records[0].individual_id == "S00001");

  spec.n_individuals = 60;
  const auto a = synth::gen_cohort(spec, 3);
  const auto b = synth::gen_cohort(spec, 3);
  CHECK(a.records == b.records);
  CHECK(a.texture_class == b.texture_class);
  for (const auto& r : a.records) {
    CHECK(r.age >= spec.age_min);
    CHECK(r.age <= spec.age_max);
    if (r.score2) {
      CHECK(r.age >= 40.0);
      CHECK(r.age <= 69.0);
      CHECK_FALSE(r.has(Condition::Cvd));
      CHECK_FALSE(r.has(Condition::DiabetesT2));
    }
    if (r.had(Event::CardiacDeath5y)) CHECK(r.had(Event::CardiacDeath10y));
  }

  spec.discordance = 0.0;
  const auto aligned = synth::gen_cohort(spec, 5);
  for (std::size_t i = 0; i < aligned.records.size(); ++i) {
    CHECK(aligned.texture_class[i] == (aligned.records[i].hypertension_dx ? 1 : 0));
  }

  spec.n_individuals = 0;
  CHECK_THROWS_AS(synth::gen_cohort(spec, 1), Error);
}

TEST_CASE("planted diabetes ratio is recovered at large n") {
  auto spec = synth::SynthCohortSpec::defaults();
  spec.n_individuals = 40000;
  spec.videos_per_individual = 1;
  const auto diabetes = static_cast<std::size_t>(Condition::DiabetesT2);
  spec.conditions[diabetes] = {0.098, 0.098, 0.02, 0.02};
  const auto cohort = synth::gen_cohort(spec, 77);
  std::vector<VdLabel> vd;
  for (int t : cohort.texture_class) vd.push_back(t ? VdLabel::High : VdLabel::Low);
  const StratReport rep = stratify(cohort.records, vd);
  const auto& pos = rep.group(CohortGroup::DxPosHighVd).conditions[diabetes];
  const auto& base = rep.group(CohortGroup::DxNegLowVd).conditions[diabetes];
  const Interval ci = prevalence_ratio_interval(pos.count, pos.n, base.count, base.n, 0.99);
  CHECK(ci.contains(4.9));
  CHECK(pos.ratio.value() == doctest::Approx(4.9).epsilon(0.15));
}

TEST_CASE("planted group rates fall inside 99% intervals across seeds") {
  auto spec = synth::SynthCohortSpec::defaults();
  spec.n_individuals = 400;
  spec.videos_per_individual = 1;
  std::size_t intervals = 0, misses = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto cohort = synth::gen_cohort(spec, 1000 + seed);
    std::vector<VdLabel> vd;
    for (int t : cohort.texture_class) vd.push_back(t ? VdLabel::High : VdLabel::Low);
    const StratReport rep = stratify(cohort.records, vd);
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      const auto& s = rep.groups[g].antihypertensive;
      if (s.n == 0) continue;
      ++intervals;
      misses += !wilson_interval(s.count, s.n, 0.99).contains(spec.antihypertensive[g]);
    }
  }
  CHECK(intervals >= 190);
  // Expected about 1% misses; 8 of 200 is far in the binomial tail.
  CHECK(misses <= 8);
}
