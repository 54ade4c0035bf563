#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vdscan/stats.hpp"
#include "vdscan/voting.hpp"

namespace vdscan {

enum class Sex { Female, Male };

/// Binary clinical conditions summarized as prevalences (comorbidities, then
/// traditional risk factors).
enum class Condition : std::size_t {
  AtrialFibrillation,
  CongestiveHeartFailure,
  PastMi,
  PastStroke,
  CoronaryArteryDisease,
  Cvd,
  Dyslipidemia,
  DiabetesT2,
  FamilyHistoryMiStroke,
};
inline constexpr std::size_t kConditionCount = 9;

/// Follow-up events with their horizon.
enum class Event : std::size_t { Stroke5y, Mi5y, CardiacDeath5y, CardiacDeath10y };
inline constexpr std::size_t kEventCount = 4;

/// Continuous variables summarized by quartiles.
enum class Measure : std::size_t { Age, TroponinI, NtProBnp, PlaqueCount, Score2 };
inline constexpr std::size_t kMeasureCount = 5;

std::string_view column_name(Condition c);
std::string_view column_name(Event e);
std::string_view column_name(Measure m);

struct IndividualRecord {
  std::string individual_id;
  double age = 0.0;
  Sex sex = Sex::Female;
  bool hypertension_dx = false;
  bool antihypertensive_use = false;
  std::array<bool, kConditionCount> conditions{};
  std::optional<double> troponin_i;
  std::optional<double> nt_probnp;
  int plaque_count = 0;
  std::optional<double> score2;
  std::array<bool, kEventCount> events{};

  bool has(Condition c) const { return conditions[static_cast<std::size_t>(c)]; }
  bool had(Event e) const { return events[static_cast<std::size_t>(e)]; }
  std::optional<double> measure(Measure m) const;

  bool operator==(const IndividualRecord&) const = default;
};

/// Cohort table: comma-separated UTF-8 with a header row naming the columns
/// (any order); an empty cell means missing (optional columns only).
std::vector<IndividualRecord> read_cohort_table(const std::filesystem::path& path);
void write_cohort_table(std::span<const IndividualRecord> records, const std::filesystem::path& path);

// --- split ----------------------------------------------------------------------

struct CohortSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
};

/// Individual-level split: |validation| = round(val_fraction * N), seeded
/// shuffle of the sorted ids; both outputs sorted.
CohortSplit split_cohort(std::span<const std::string> ids, double val_fraction, std::uint64_t seed);

// --- stratification -------------------------------------------------------------

/// Diagnosis x model output. The baseline for ratios is DxNegLowVd.
enum class CohortGroup : std::size_t { DxPosHighVd, DxNegHighVd, DxPosLowVd, DxNegLowVd };
inline constexpr std::size_t kGroupCount = 4;
inline constexpr CohortGroup kBaselineGroup = CohortGroup::DxNegLowVd;

CohortGroup group_of(bool hypertension_dx, VdLabel vd);
std::string_view to_string(CohortGroup g);

struct PrevalenceSummary {
  std::size_t count = 0;
  std::size_t n = 0;
  double prevalence = 0.0;            // 0 when n == 0
  std::optional<double> ratio;        // vs baseline; nullopt = Undefined
};

struct MeasureSummary {
  std::size_t n = 0;                  // non-missing values
  std::optional<Quartiles> quartiles;
  std::optional<double> mean;
  std::optional<double> median_ratio;  // vs baseline median
  std::optional<double> mean_ratio;    // vs baseline mean
};

struct GroupSummary {
  CohortGroup group = CohortGroup::DxPosHighVd;
  std::size_t n = 0;
  std::array<PrevalenceSummary, kConditionCount> conditions{};
  PrevalenceSummary antihypertensive{};
  std::array<PrevalenceSummary, kEventCount> events{};
  std::array<MeasureSummary, kMeasureCount> measures{};
};

struct StratReport {
  std::size_t cohort_size = 0;
  std::array<GroupSummary, kGroupCount> groups{};

  const GroupSummary& group(CohortGroup g) const { return groups[static_cast<std::size_t>(g)]; }
};

/// Labels are aligned with records by index.
StratReport stratify(std::span<const IndividualRecord> records, std::span<const VdLabel> vd);

/// Looks labels up by individual id; throws MissingVdLabel for any gap.
StratReport stratify(std::span<const IndividualRecord> records, const std::map<std::string, VdLabel>& vd);

struct EventTable {
  /// counts[event][group][antihypertensive_use]
  std::array<std::array<std::array<std::size_t, 2>, kGroupCount>, kEventCount> counts{};

  std::size_t total(std::optional<bool> antihypertensive = std::nullopt) const;
  std::size_t high_vd_total(std::optional<bool> antihypertensive = std::nullopt) const;
  /// Share of all events falling in the two high-VD groups; nullopt without events.
  std::optional<double> high_vd_share(std::optional<bool> antihypertensive = std::nullopt) const;
};

EventTable event_table(std::span<const IndividualRecord> records, std::span<const VdLabel> vd);

/// (HighVD and dx+) or (LowVD and dx-).
inline bool is_aligned(bool hypertension_dx, VdLabel vd) { return (vd == VdLabel::High) == hypertension_dx; }

struct AlignmentCurves {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> aligned_density;      // integrates to 1 on the grid (zeros if no aligned ages)
  std::vector<double> non_aligned_density;  // integrates to 1 on the grid (zeros if none)
  std::vector<double> aligned_proportion;   // in [0, 1]
  std::size_t n_aligned = 0;
  std::size_t n_total = 0;
};

inline constexpr std::size_t kKdeGridPoints = 256;

/// Gaussian KDE of aligned vs non-aligned ages over [min - 3h, max + 3h]; the
/// bandwidth defaults to Silverman's rule on all ages.
AlignmentCurves alignment_by_age(std::span<const double> ages, std::span<const bool> aligned,
                                 std::optional<double> bandwidth = std::nullopt);

struct Demographics {
  std::size_t n = 0;
  double mean_age = 0.0;
  double sd_age = 0.0;
  double female_fraction = 0.0;
  std::optional<double> hypertension_rate_female;
  std::optional<double> hypertension_rate_male;
};

Demographics summarize_demographics(std::span<const IndividualRecord> records);

}  // namespace vdscan
