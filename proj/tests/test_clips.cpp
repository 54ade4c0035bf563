#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "support.hpp"
#include "vdscan/clips.hpp"
#include "vdscan/error.hpp"

using namespace vdscan;
using vdscan::testing::make_meta;
using vdscan::testing::random_volume;
using vdscan::testing::TempDir;

namespace {

ClipIndexPlan straight_plan(std::string id = "vid") {
  ClipIndexPlan p;
  p.video_id = std::move(id);
  for (std::size_t k = 0; k < kClipLength; ++k) p.frame_indices[k] = k;
  return p;
}

const NormStats kImageNet{{0.485, 0.456, 0.406}, {0.229, 0.224, 0.225}};

}  // namespace

TEST_CASE("window length is min(frames, round(2.1 fps))") {
  CHECK(clip_window_length(make_meta(64, 64, 300, ColorMode::Gray8, 30.0)) == 63);
  CHECK(clip_window_length(make_meta(64, 64, 300, ColorMode::Gray8, 25.0)) == 53);  // 52.5 rounds up
  CHECK(clip_window_length(make_meta(64, 64, 40, ColorMode::Gray8, 30.0)) == 40);
  CHECK(clip_window_length(make_meta(64, 64, 300, ColorMode::Gray8, 0.1)) == 1);
}

TEST_CASE("plans stay in range and span the window") {
  const VideoMeta meta = make_meta(64, 64, 300, ColorMode::Gray8, 30.0, "a");
  const auto plans = plan_clips(meta, 8, 42);
  REQUIRE(plans.size() == 8);
  for (const auto& p : plans) {
    CHECK(p.frame_indices.front() == p.start_frame);
    CHECK(p.frame_indices.back() - p.frame_indices.front() == 62);
    CHECK(p.frame_indices.back() < 300);
    CHECK(std::is_sorted(p.frame_indices.begin(), p.frame_indices.end()));
    for (std::size_t k = 0; k < kClipLength; ++k) {
      const double lin = static_cast<double>(p.start_frame) + static_cast<double>(k) * 62.0 / 15.0;
      CHECK(p.frame_indices[k] == static_cast<std::size_t>(std::lround(lin)));
    }
  }
  CHECK(plan_clips(meta, 8, 42) == plans);
  CHECK(plan_clips(meta, 8, 43) != plans);
}

TEST_CASE("a 16-frame video takes every frame") {
  const auto plans = plan_clips(make_meta(64, 64, 16, ColorMode::Gray8, 30.0), 3, 1);
  for (const auto& p : plans) {
    CHECK(p.start_frame == 0);
    for (std::size_t k = 0; k < kClipLength; ++k) CHECK(p.frame_indices[k] == k);
  }
}

TEST_CASE("plan_clips rejects short videos and bad arguments") {
  CHECK_THROWS_AS(plan_clips(make_meta(64, 64, 15), 1, 0), Error);
  CHECK_THROWS_AS(plan_clips(make_meta(64, 64, 100), 0, 0), Error);
  CHECK_THROWS_AS(plan_clips(make_meta(64, 64, 100), 1, 0, 8), Error);
  try {
    plan_clips(make_meta(64, 64, 15), 1, 0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::VideoTooShort);
  }
}

TEST_CASE("constant video gives a constant clip") {
  FrameVolume v = FrameVolume::zeros(make_meta(320, 240, 20, ColorMode::Gray8));
  std::fill(v.pixels.begin(), v.pixels.end(), 77);
  const ClipTensor c = extract_clip(v, straight_plan());
  REQUIRE(c.data.size() == kClipElements);
  CHECK(std::all_of(c.data.begin(), c.data.end(), [](float x) { return x == 77.0f; }));
  CHECK_FALSE(c.normalized());
}

TEST_CASE("224x224 RGB frames pass through unchanged") {
  const FrameVolume v = random_volume(make_meta(224, 224, 16, ColorMode::Rgb8), 3);
  const ClipTensor c = extract_clip(v, straight_plan());
  for (int t = 0; t < kClipLength; ++t)
    for (int y = 0; y < kClipSize; y += 7)
      for (int x = 0; x < kClipSize; x += 5)
        for (int ch = 0; ch < 3; ++ch) REQUIRE(c.at(t, y, x, ch) == static_cast<float>(v.at(t, y, x, ch)));
}

TEST_CASE("gray replicates into three equal channels") {
  const FrameVolume v = random_volume(make_meta(224, 224, 16, ColorMode::Gray8), 4);
  const ClipTensor c = extract_clip(v, straight_plan());
  for (std::size_t i = 0; i < kClipElements; i += 3) {
    REQUIRE(c.data[i] == c.data[i + 1]);
    REQUIRE(c.data[i] == c.data[i + 2]);
  }
}

TEST_CASE("a centred white square survives the 2x downscale") {
  FrameVolume v = FrameVolume::zeros(make_meta(448, 448, 16, ColorMode::Gray8));
  for (std::size_t f = 0; f < 16; ++f)
    for (int y = 112; y < 336; ++y)
      for (int x = 112; x < 336; ++x) v.at(f, y, x) = 255;
  const ClipTensor c = extract_clip(v, straight_plan());
  auto white = [&](int y, int x) { return c.at(0, y, x, 0) > 127.5f; };
  // Expected square [56, 168) in both axes, within one pixel.
  for (int y = 0; y < kClipSize; ++y) {
    for (int x = 0; x < kClipSize; ++x) {
      const bool inside = y >= 57 && y < 167 && x >= 57 && x < 167;
      const bool outside = y < 55 || y >= 169 || x < 55 || x >= 169;
      if (inside) REQUIRE(white(y, x));
      if (outside) REQUIRE_FALSE(white(y, x));
    }
  }
}

TEST_CASE("non-square frames crop the centre") {
  // 448 wide, 224 tall: the short side is already 224, so columns 112..335 are kept.
  FrameVolume v = FrameVolume::zeros(make_meta(448, 224, 16, ColorMode::Gray8));
  for (std::size_t f = 0; f < 16; ++f)
    for (int y = 0; y < 224; ++y)
      for (int x = 0; x < 448; ++x) v.at(f, y, x) = static_cast<std::uint8_t>(x / 2);
  const ClipTensor c = extract_clip(v, straight_plan());
  CHECK(c.at(3, 10, 0, 0) == 56.0f);
  CHECK(c.at(3, 10, 223, 0) == 167.0f);
}

TEST_CASE("extract_clip checks indices") {
  const FrameVolume v = random_volume(make_meta(64, 64, 16), 1);
  ClipIndexPlan p = straight_plan();
  p.frame_indices[15] = 16;
  CHECK_THROWS_AS(extract_clip(v, p), Error);
}

TEST_CASE("normalization") {
  const FrameVolume v = random_volume(make_meta(224, 224, 16, ColorMode::Rgb8), 9);
  const ClipTensor raw = extract_clip(v, straight_plan());

  SUBCASE("identity statistics divide by 255") {
    const ClipTensor n = normalize(raw, NormStats{});
    for (std::size_t i = 0; i < kClipElements; i += 101) CHECK(n.data[i] == doctest::Approx(raw.data[i] / 255.0));
  }
  SUBCASE("inverse within 1e-6") {
    const ClipTensor n = normalize(raw, kImageNet);
    double worst = 0;
    for (std::size_t i = 0; i < kClipElements; ++i) {
      const std::size_t c = i % 3;
      const double back = n.data[i] * kImageNet.std[c] + kImageNet.mean[c];
      worst = std::max(worst, std::abs(back - raw.data[i] / 255.0));
    }
    CHECK(worst <= 1e-6);
  }
  SUBCASE("centering: a pixel at the mean maps to zero") {
    ClipTensor c = raw;
    std::fill(c.data.begin(), c.data.end(), 127.5f);
    const ClipTensor n = normalize(c, NormStats{{0.5, 0.5, 0.5}, {0.25, 0.25, 0.25}});
    CHECK(std::all_of(n.data.begin(), n.data.end(), [](float x) { return x == 0.0f; }));
  }
  SUBCASE("twice is an error") {
    const ClipTensor n = normalize(raw, kImageNet);
    CHECK_THROWS_AS(normalize(n, kImageNet), Error);
  }
  SUBCASE("bad statistics") {
    CHECK_THROWS_AS(normalize(raw, NormStats{{0, 0, 0}, {1, 0, 1}}), Error);
    CHECK_THROWS_AS(normalize(raw, NormStats{{0, NAN, 0}, {1, 1, 1}}), Error);
  }
}

TEST_CASE("augmentation") {
  const FrameVolume v = random_volume(make_meta(224, 224, 16, ColorMode::Rgb8), 13);
  const ClipTensor raw = extract_clip(v, straight_plan());

  CHECK(augment(raw, {1.0, 1.0, 0.0}, 5).data == raw.data);
  CHECK(augment(raw, {1.0, 1.25, 0.5}, 5).data == augment(raw, {1.0, 1.25, 0.5}, 5).data);
  CHECK(augment(raw, {1.0, 1.25, 0.5}, 5).data != augment(raw, {1.0, 1.25, 0.5}, 6).data);

  // A forced flip mirrors columns exactly.
  const ClipTensor flipped = augment(raw, {1.0, 1.0, 1.0}, 5);
  for (int y = 0; y < kClipSize; y += 11)
    for (int x = 0; x < kClipSize; ++x) REQUIRE(flipped.at(2, y, x, 1) == raw.at(2, y, kClipSize - 1 - x, 1));

  // Left-right symmetric content is invariant under the flip.
  ClipTensor sym = raw;
  for (int t = 0; t < kClipLength; ++t)
    for (int y = 0; y < kClipSize; ++y)
      for (int x = 0; x < kClipSize / 2; ++x)
        for (int c = 0; c < 3; ++c) sym.at(t, y, kClipSize - 1 - x, c) = sym.at(t, y, x, c);
  CHECK(augment(sym, {1.0, 1.0, 1.0}, 8).data == sym.data);

  // Upscaled crops of a constant clip stay constant.
  ClipTensor flat = raw;
  std::fill(flat.data.begin(), flat.data.end(), 9.0f);
  const ClipTensor up = augment(flat, {1.2, 1.25, 0.5}, 3);
  CHECK(std::all_of(up.data.begin(), up.data.end(), [](float x) { return std::abs(x - 9.0f) < 1e-5f; }));

  CHECK_THROWS_AS(augment(raw, {0.9, 1.0, 0.5}, 1), Error);
  CHECK_THROWS_AS(augment(raw, {1.3, 1.2, 0.5}, 1), Error);
}

TEST_CASE("class weights") {
  const std::vector<int> labels{0, 0, 0, 1};
  const auto w = class_weights(labels);
  CHECK(w[0] == doctest::Approx(4.0 / 6.0));
  CHECK(w[3] == doctest::Approx(2.0));
  const std::vector<int> single{1, 1};
  CHECK_THROWS_AS(class_weights(single), Error);
  const std::vector<int> bad{0, 2};
  CHECK_THROWS_AS(class_weights(bad), Error);
}

TEST_CASE("weighted sampling balances classes up to 1:50") {
  for (int ratio : {1, 3, 10, 50}) {
    std::vector<int> labels(static_cast<std::size_t>(ratio) * 20, 0);
    labels.insert(labels.end(), 20, 1);
    const auto w = class_weights(labels);
    WeightedSampler sampler(w, 1000 + static_cast<std::uint64_t>(ratio));
    std::size_t positives = 0;
    const std::size_t draws = 100000;
    for (std::size_t i = 0; i < draws; ++i) positives += labels[sampler.next()] == 1;
    const double share = static_cast<double>(positives) / draws;
    CHECK(share >= 0.48);
    CHECK(share <= 0.52);
  }
}

TEST_CASE("clip files are raw little-endian float32") {
  TempDir dir("clipfile");
  const FrameVolume v = random_volume(make_meta(224, 224, 16, ColorMode::Rgb8), 21);
  const ClipTensor c = extract_clip(v, straight_plan());
  write_clip_file(c, dir / "c.f32");
  CHECK(std::filesystem::file_size(dir / "c.f32") == kClipElements * 4);
  CHECK(read_clip_file(dir / "c.f32") == c.data);

  const std::string bytes = testing::slurp(dir / "c.f32");
  const auto first = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[0])) |
                     static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[1])) << 8 |
                     static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[2])) << 16 |
                     static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[3])) << 24;
  float value;
  std::memcpy(&value, &first, 4);
  CHECK(value == c.data[0]);

  std::filesystem::resize_file(dir / "c.f32", 400);
  CHECK_THROWS_AS(read_clip_file(dir / "c.f32"), Error);
}

TEST_CASE("export index round trip") {
  TempDir dir("index");
  std::vector<ExportRecord> records(3);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].clip_file = "clips/v" + std::to_string(i) + ".f32";
    records[i].video_id = "v" + std::to_string(i);
    records[i].individual_id = "p" + std::to_string(i / 2);
    records[i].label = static_cast<int>(i % 2);
    records[i].seed = 0xfeedfacecafebeefULL + i;
    for (std::size_t k = 0; k < kClipLength; ++k) records[i].frame_indices[k] = 3 * k + i;
  }
  write_export_index(records, dir / "index.tsv");
  CHECK(read_export_index(dir / "index.tsv") == records);
}
