#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vdscan/cohort.hpp"
#include "vdscan/media.hpp"
#include "vdscan/preprocess.hpp"

namespace vdscan::synth {

enum class DopplerHue { Red, Blue };

struct DopplerPatch {
  double area_fraction = 0.1;  // of the full frame, in [0, 1)
  DopplerHue hue = DopplerHue::Red;
};

/// Static device overlay: a top status strip and a right-hand scale strip,
/// both black with white glyph blocks, plus a heartline band at the bottom in
/// which an ECG trace scrolls.
struct OverlaySpec {
  int top_rows = 0;
  int right_cols = 0;
  int heartline_rows = 0;  // keep <= the preprocessing crop so the band is removed
};

/// Speckle contrast multipliers per texture class. The builtin feature space
/// separates the classes when |mu0 - mu1| >= kSeparabilityMargin.
inline constexpr double kSeparabilityMargin = 0.2;

struct SynthVideoSpec {
  std::string video_id = "synth";
  std::string individual_id = "synth";
  Site site = Site::Unknown;
  int width = 192;
  int height = 144;
  double fps = 30.0;
  std::size_t frame_count = 96;
  ColorMode color = ColorMode::Gray8;
  OverlaySpec overlay;
  std::optional<DopplerPatch> doppler;
  int texture_class = 0;
  double mu0 = 0.6;
  double mu1 = 1.0;
  bool separable = true;
  /// Minimum temporal variance (channel-mean intensity) of every background pixel.
  double variance_floor = 20.0;

  /// Throws InvalidSpec.
  void validate() const;
};

struct GroundTruth {
  UiMask ui_mask;
  bool doppler_flag = false;
  double doppler_fraction = 0.0;  // realized share of frame pixels covered by the patch
  DopplerHue doppler_hue = DopplerHue::Red;
  int texture_class = 0;
  std::uint64_t seed = 0;
};

struct SynthVideo {
  FrameVolume volume;
  GroundTruth truth;
};

SynthVideo gen_video(const SynthVideoSpec& spec, std::uint64_t seed);

/// Writes the mask image (`<stem>.mask.png`, 255 = overlay) and the flags
/// record (`<stem>.truth.json`).
void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir, const std::string& stem);

// --- cohorts ---------------------------------------------------------------------

/// One probability per CohortGroup, where the planted visual-damage class is
/// the texture class (1 = high).
using GroupRates = std::array<double, kGroupCount>;

struct LogNormal {
  double log_mean = 0.0;
  double log_sd = 0.5;
};

struct SynthCohortSpec {
  std::size_t n_individuals = 100;
  std::size_t videos_per_individual = 2;
  double hypertension_prevalence = 0.5;
  /// Probability that the texture class disagrees with the diagnosis.
  double discordance = 0.1;
  double age_mean = 55.5;
  double age_sd = 11.2;
  double age_min = 35.0;
  double age_max = 74.0;
  double female_fraction = 0.492;

  std::array<GroupRates, kConditionCount> conditions{};
  GroupRates antihypertensive{};
  std::array<GroupRates, kEventCount> events{};
  std::array<LogNormal, kGroupCount> troponin_i{};
  std::array<LogNormal, kGroupCount> nt_probnp{};
  std::array<LogNormal, kGroupCount> score2{};
  GroupRates plaque_mean{};
  double lab_missing = 0.02;

  /// Template for every video; ids, texture class, color and seed are set per video.
  SynthVideoSpec video;
  /// Share of RGB8 videos.
  double rgb_fraction = 0.5;

  /// Defaults with high-VD event rates four times the low-VD rates and a
  /// 4.9x diabetes prevalence in both high-VD groups.
  static SynthCohortSpec defaults();

  void validate() const;
};

struct SynthVideoPlan {
  SynthVideoSpec spec;
  std::uint64_t seed = 0;
  bool discordant = false;
};

struct SynthCohort {
  std::vector<IndividualRecord> records;
  std::vector<int> texture_class;  // per record
  std::vector<bool> discordant;    // per record
  std::vector<SynthVideoPlan> videos;
};

SynthCohort gen_cohort(const SynthCohortSpec& spec, std::uint64_t seed);

}  // namespace vdscan::synth
