#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vdscan/cohort.hpp"
#include "vdscan/stats.hpp"
#include "vdscan/voting.hpp"

namespace vdscan {

inline constexpr double kReportConfidence = 0.99;

struct LevelMetrics {
  std::string level;  // clip | video | individual
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::optional<double> balanced_accuracy;  // nullopt when one class is absent from the truth
};

/// Metrics of predictions against the hypertension diagnosis.
LevelMetrics level_metrics(std::string level, std::span<const int> predicted, std::span<const int> truth);

struct CohortReport {
  std::vector<LevelMetrics> metrics;  // clip, video, individual
  std::size_t n_metric_individuals = 0;
  StratReport strat;
  EventTable events;
  std::optional<AlignmentCurves> alignment;
  Demographics demographics;  // of the individuals the metrics cover
  std::vector<std::string> without_predictions;  // cohort ids absent from the dump
};

/// Ids referenced by predictions but absent from the cohort table, sorted.
std::vector<std::string> unknown_prediction_ids(std::span<const ClipPrediction> clips,
                                                std::span<const IndividualRecord> records);

/// Votes the clip dump up to individuals, evaluates against diagnoses
/// (restricted to `metric_subset` when given) and stratifies every
/// predicted individual. Throws IdMismatch for unknown ids.
CohortReport build_cohort_report(std::span<const ClipPrediction> clips, std::span<const IndividualRecord> records,
                                 const std::optional<std::set<std::string>>& metric_subset = std::nullopt);

/// report.json, report.txt, *.tsv tables and *.svg figures.
void write_cohort_report(const CohortReport& report, const std::filesystem::path& out_dir);

// --- figures ------------------------------------------------------------------------

std::string confusion_svg(const ConfusionMatrix& m, const std::string& title);
std::string group_ratio_svg(const StratReport& strat);
std::string event_svg(const EventTable& events);
std::string alignment_svg(const AlignmentCurves& curves);

}  // namespace vdscan
