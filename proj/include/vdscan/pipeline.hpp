#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vdscan/config.hpp"

namespace vdscan::pipeline {

struct RunOptions {
  Config config;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// One discovered input and its terminal status:
/// processed | excluded | error | skipped (unchanged since a previous run).
struct InputEntry {
  std::string input;  // relative to the input root
  std::string video_id;
  std::string status;
  std::string previous_status;  // for skipped entries
  std::string error_kind;
  std::string detail;
  std::string input_sha256;
  std::string output;  // relative to the output root
  std::string output_sha256;
  std::optional<double> red_fraction;
  std::optional<double> blue_fraction;
};

struct RunManifest {
  std::string command;
  std::string run_id;
  std::string config_hash;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::vector<InputEntry> entries;
  std::map<std::string, std::size_t> outputs;  // named output counts (clips, individuals, ...)
  double seconds = 0.0;
  double videos_per_second = 0.0;

  std::size_t count(const std::string& status) const;
};

inline constexpr std::string_view kManifestFile = "manifest.json";

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Ingestible inputs under root (recursive), sorted by relative path.
std::vector<std::filesystem::path> discover_inputs(const std::filesystem::path& root);

/// Runs fn(i) for i in [0, n) on a work-stealing pool limited to `workers`
/// threads. Callers write results into index-addressed slots.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Doppler exclusion, UI removal and bottom crop for every input; writes
/// videos/<video_id>.dcm, exclusions.tsv and manifest.json. Inputs whose hash
/// and configuration match a previous run in out_dir are skipped.
RunManifest cmd_preprocess(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                           const RunOptions& options);

/// Individual-level split plus clip export (augmented train clips, plain
/// validation clips) in the harness exchange format.
RunManifest cmd_sample(const std::filesystem::path& videos_dir, const std::filesystem::path& cohort_table,
                       const std::filesystem::path& out_dir, const RunOptions& options);

/// Trains the builtin linear baseline on the training split; writes
/// model.card, its weights and split.tsv.
RunManifest cmd_train(const std::filesystem::path& videos_dir, const std::filesystem::path& cohort_table,
                      const std::filesystem::path& out_dir, const RunOptions& options);

/// Clip, video and individual predictions (clips.jsonl, videos.jsonl,
/// individuals.jsonl). Throws ModelLoadError before touching any video.
RunManifest cmd_infer(const std::filesystem::path& videos_dir, const std::filesystem::path& model_card,
                      const std::filesystem::path& out_dir, const RunOptions& options,
                      const std::optional<std::set<std::string>>& individuals = std::nullopt);

/// Stratified report from a clip dump (file or directory holding clips.jsonl).
/// On unknown ids writes id_mismatch.tsv and throws IdMismatch.
RunManifest cmd_report(const std::filesystem::path& predictions, const std::filesystem::path& cohort_table,
                       const std::filesystem::path& out_dir, const RunOptions& options,
                       const std::optional<std::set<std::string>>& metric_subset = std::nullopt);

/// Synthetic corpus: cohort.csv, videos/ in the configured format, truth/
/// sidecars and synth.json.
RunManifest cmd_synth(const std::filesystem::path& out_dir, const RunOptions& options);

/// Reads one id per line (a header line `individual_id` is ignored); also
/// accepts split.tsv and keeps only ids of the requested split when given.
std::set<std::string> read_id_list(const std::filesystem::path& path, const std::string& split = "");

}  // namespace vdscan::pipeline
