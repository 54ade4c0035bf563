#include "vdscan/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include "vdscan/cohort.hpp"
#include "vdscan/error.hpp"
#include "vdscan/kv.hpp"
#include "vdscan/report.hpp"
#include "vdscan/rng.hpp"

namespace vdscan::pipeline {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

// Stream tags for seeds derived from the run seed.
constexpr std::uint64_t kSplitStream = 0x5b117u;
constexpr std::uint64_t kTrainClipStream = 0x7c11u;
constexpr std::uint64_t kExportClipStream = 0xe4c1u;
constexpr std::uint64_t kInferClipStream = 0x1f3cu;
constexpr std::uint64_t kDopplerStream = 0xd0991u;

std::string safe_name(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                    c == '-' || c == '_';
    if (!ok) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

std::string relative_to(const fs::path& path, const fs::path& root) {
  return fs::relative(path, root).generic_string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunManifest start_manifest(const std::string& command, const RunOptions& options) {
  RunManifest m;
  m.command = command;
  m.seed = options.seed;
  m.workers = options.workers;
  return m;
}

/// Called once every config lookup of the command has happened.
void seal_config(RunManifest& m, const RunOptions& options) {
  m.config = options.config.effective();
  m.config_hash = options.config.hash();
  m.run_id = sha256_hex(m.command + "\n" + m.config_hash + "\n" + std::to_string(m.seed)).substr(0, 16);
  for (const auto& key : options.config.unused_keys()) spdlog::warn("config key '{}' is not used by {}", key, m.command);
}

void finish_manifest(RunManifest& m, Clock::time_point start, std::size_t videos) {
  m.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  m.videos_per_second = m.seconds > 0.0 ? static_cast<double>(videos) / m.seconds : 0.0;
}

void record_error(InputEntry& e, const Error& err) {
  e.status = "error";
  e.error_kind = std::string(to_string(err.kind()));
  e.detail = err.what();
}

void record_error(InputEntry& e, const std::exception& err) {
  e.status = "error";
  e.error_kind = "IoError";
  e.detail = err.what();
}

template <typename Fn>
void guarded(InputEntry& e, Fn&& fn) {
  try {
    fn();
  } catch (const Error& err) {
    record_error(e, err);
  } catch (const std::exception& err) {
    record_error(e, err);
  }
}

void log_summary(const RunManifest& m) {
  spdlog::info("{}: {} inputs, {} processed, {} excluded, {} skipped, {} errors in {:.2f}s ({:.2f} videos/s)",
               m.command, m.entries.size(), m.count("processed"), m.count("excluded"), m.count("skipped"),
               m.count("error"), m.seconds, m.videos_per_second);
  for (const auto& e : m.entries) {
    if (e.status == "error") spdlog::warn("{}: {}", e.input, e.detail);
  }
}

struct CohortIndex {
  std::vector<IndividualRecord> records;
  std::map<std::string, const IndividualRecord*> by_id;
  std::map<std::string, std::string> split;  // id -> train | val
};

CohortIndex load_cohort_with_split(const fs::path& table, const RunOptions& options) {
  CohortIndex c;
  c.records = read_cohort_table(table);
  for (const auto& r : c.records) c.by_id[r.individual_id] = &r;
  std::vector<std::string> ids;
  for (const auto& r : c.records) ids.push_back(r.individual_id);
  const double fraction = options.config.get_double("split.val_fraction", 0.2);
  const CohortSplit s = split_cohort(ids, fraction, derive_seed(options.seed, {kSplitStream}));
  for (const auto& id : s.train) c.split[id] = "train";
  for (const auto& id : s.validation) c.split[id] = "val";
  return c;
}

void write_split(const CohortIndex& c, const fs::path& path) {
  std::ostringstream out;
  out << "individual_id\tsplit\n";
  for (const auto& [id, split] : c.split) out << id << '\t' << split << '\n';
  write_text(path, out.str());
}

ojson entry_json(const InputEntry& e) {
  ojson j;
  j["input"] = e.input;
  j["video_id"] = e.video_id;
  j["status"] = e.status;
  if (!e.previous_status.empty()) j["previous_status"] = e.previous_status;
  if (!e.error_kind.empty()) j["error_kind"] = e.error_kind;
  if (!e.detail.empty()) j["detail"] = e.detail;
  if (!e.input_sha256.empty()) j["input_sha256"] = e.input_sha256;
  if (!e.output.empty()) j["output"] = e.output;
  if (!e.output_sha256.empty()) j["output_sha256"] = e.output_sha256;
  if (e.red_fraction) j["red_fraction"] = *e.red_fraction;
  if (e.blue_fraction) j["blue_fraction"] = *e.blue_fraction;
  return j;
}

InputEntry entry_from_json(const ojson& j) {
  InputEntry e;
  const auto str = [&](const char* key) { return j.contains(key) ? j.at(key).get<std::string>() : std::string{}; };
  e.input = str("input");
  e.video_id = str("video_id");
  e.status = str("status");
  e.previous_status = str("previous_status");
  e.error_kind = str("error_kind");
  e.detail = str("detail");
  e.input_sha256 = str("input_sha256");
  e.output = str("output");
  e.output_sha256 = str("output_sha256");
  if (j.contains("red_fraction")) e.red_fraction = j.at("red_fraction").get<double>();
  if (j.contains("blue_fraction")) e.blue_fraction = j.at("blue_fraction").get<double>();
  return e;
}

}  // namespace

std::size_t RunManifest::count(const std::string& status) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const InputEntry& e) { return e.status == status; }));
}

void write_manifest(const RunManifest& m, const fs::path& path) {
  ojson j;
  j["run_id"] = m.run_id;
  j["command"] = m.command;
  j["seed"] = m.seed;
  j["workers"] = m.workers;
  j["config_hash"] = m.config_hash;
  j["config"] = m.config;
  ojson counts;
  for (const char* s : {"processed", "excluded", "error", "skipped", "filtered"}) counts[s] = m.count(s);
  j["counts"] = counts;
  j["outputs"] = m.outputs;
  j["timing"] = {{"seconds", m.seconds}, {"videos_per_second", m.videos_per_second}};
  j["inputs"] = ojson::array();
  for (const auto& e : m.entries) j["inputs"].push_back(entry_json(e));
  write_text(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
  const std::string text = read_text(path);
  if (text.empty()) throw Error(ErrorKind::UnreadableFile, "cannot read " + path.string());
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptHeader, path.string() + ": " + e.what());
  }
  RunManifest m;
  m.run_id = j.value("run_id", "");
  m.command = j.value("command", "");
  m.seed = j.value("seed", std::uint64_t{0});
  m.workers = j.value("workers", std::size_t{1});
  m.config_hash = j.value("config_hash", "");
  if (j.contains("config")) m.config = j.at("config").get<std::map<std::string, std::string>>();
  if (j.contains("outputs")) m.outputs = j.at("outputs").get<std::map<std::string, std::size_t>>();
  if (j.contains("timing")) {
    m.seconds = j.at("timing").value("seconds", 0.0);
    m.videos_per_second = j.at("timing").value("videos_per_second", 0.0);
  }
  if (j.contains("inputs")) {
    for (const auto& e : j.at("inputs")) m.entries.push_back(entry_from_json(e));
  }
  return m;
}

std::vector<fs::path> discover_inputs(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error(ErrorKind::UnreadableFile, root.string() + " is not a directory");
  std::vector<fs::path> out;
  for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
    if (it->is_directory() && fs::exists(it->path() / frame_sequence::kManifestName)) {
      out.push_back(it->path());
      it.disable_recursion_pending();
    } else if (it->is_regular_file() && it->path().extension() == ".dcm") {
      out.push_back(it->path());
    }
  }
  std::sort(out.begin(), out.end(),
            [&](const fs::path& a, const fs::path& b) { return relative_to(a, root) < relative_to(b, root); });
  return out;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  tbb::task_arena arena(static_cast<int>(workers));
  arena.execute([&] {
    tbb::parallel_for(std::size_t{0}, n, [&](std::size_t i) { fn(i); });
  });
}

// --- preprocess -------------------------------------------------------------------

RunManifest cmd_preprocess(const fs::path& in_dir, const fs::path& out_dir, const RunOptions& options) {
  const auto start = Clock::now();
  const PreprocessConfig config = preprocess_config(options.config);
  RunManifest m = start_manifest("preprocess", options);
  seal_config(m, options);

  const fs::path videos_dir = out_dir / "videos";
  fs::create_directories(videos_dir);
  std::map<std::string, InputEntry> prior;
  if (fs::exists(out_dir / kManifestFile)) {
    try {
      const RunManifest previous = read_manifest(out_dir / kManifestFile);
      if (previous.command == m.command && previous.config_hash == m.config_hash) {
        for (const auto& e : previous.entries) prior[e.input] = e;
      }
    } catch (const Error& e) {
      spdlog::warn("ignoring unreadable previous manifest: {}", e.what());
    }
  }

  const auto inputs = discover_inputs(in_dir);
  m.entries.resize(inputs.size());
  parallel_for(inputs.size(), options.workers, [&](std::size_t i) {
    InputEntry& e = m.entries[i];
    e.input = relative_to(inputs[i], in_dir);
    guarded(e, [&] {
      e.input_sha256 = sha256_input(inputs[i]);
      e.video_id = probe_metadata(inputs[i]).video_id;
    });
  });

  std::map<std::string, std::size_t> first_use;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    InputEntry& e = m.entries[i];
    if (!e.status.empty()) continue;
    const auto [it, fresh] = first_use.emplace(safe_name(e.video_id), i);
    if (!fresh) {
      record_error(e, Error(ErrorKind::IdMismatch, "video id '" + e.video_id + "' already used by " +
                                                       m.entries[it->second].input));
    }
  }

  parallel_for(inputs.size(), options.workers, [&](std::size_t i) {
    InputEntry& e = m.entries[i];
    if (!e.status.empty()) return;
    const fs::path output = videos_dir / (safe_name(e.video_id) + ".dcm");
    guarded(e, [&] {
      const auto p = prior.find(e.input);
      if (p != prior.end() && p->second.input_sha256 == e.input_sha256) {
        const InputEntry& before = p->second;
        const std::string done = before.status == "skipped" ? before.previous_status : before.status;
        const bool intact = done == "excluded" ||
                            (done == "processed" && fs::exists(out_dir / before.output) &&
                             sha256_file(out_dir / before.output) == before.output_sha256);
        if ((done == "processed" || done == "excluded") && intact) {
          e = before;
          e.status = "skipped";
          e.previous_status = done;
          return;
        }
      }
      const FrameVolume volume = load_video(inputs[i]);
      const DopplerVerdict verdict = doppler_verdict(doppler_score(volume, config), config);
      e.red_fraction = verdict.red_fraction;
      e.blue_fraction = verdict.blue_fraction;
      if (verdict.excluded) {
        e.status = "excluded";
        return;
      }
      const UiMask mask = compute_ui_mask(volume, config.var_threshold, config.statistic);
      const FrameVolume cleaned = crop_bottom(apply_ui_removal(volume, mask), config.crop_px);
      dicom::save(cleaned, output);
      e.output = relative_to(output, out_dir);
      e.output_sha256 = sha256_file(output);
      e.status = "processed";
    });
  });

  std::ostringstream exclusions;
  exclusions << "video_id\tinput\tred_fraction\tblue_fraction\n";
  for (const auto& e : m.entries) {
    const bool excluded = e.status == "excluded" || (e.status == "skipped" && e.previous_status == "excluded");
    if (!excluded) continue;
    exclusions << e.video_id << '\t' << e.input << '\t' << format_number(e.red_fraction.value_or(0.0)) << '\t'
               << format_number(e.blue_fraction.value_or(0.0)) << '\n';
  }
  if (read_text(out_dir / "exclusions.tsv") != exclusions.str()) write_text(out_dir / "exclusions.tsv", exclusions.str());

  std::size_t videos_out = 0;
  for (const auto& e : m.entries) {
    if (e.status == "processed" || (e.status == "skipped" && e.previous_status == "processed")) ++videos_out;
  }
  m.outputs["videos"] = videos_out;
  finish_manifest(m, start, inputs.size());
  write_manifest(m, out_dir / kManifestFile);
  log_summary(m);
  return m;
}

// --- sample (clip export) -----------------------------------------------------------

RunManifest cmd_sample(const fs::path& videos_dir, const fs::path& cohort_table, const fs::path& out_dir,
                       const RunOptions& options) {
  const auto start = Clock::now();
  const auto train_clips = static_cast<std::size_t>(options.config.get_int("sample.train_clips_per_video", 4));
  const auto val_clips = static_cast<std::size_t>(options.config.get_int("sample.eval_clips_per_video", 2));
  const bool augment_train = options.config.get_bool("sample.augment", true);
  const AugConfig aug = aug_config(options.config);
  const NormStats stats = norm_stats_config(options.config, "model");
  const CohortIndex cohort = load_cohort_with_split(cohort_table, options);
  RunManifest m = start_manifest("sample", options);
  seal_config(m, options);

  for (const char* split : {"train", "val"}) fs::create_directories(out_dir / split / "clips");
  const auto inputs = discover_inputs(videos_dir);
  m.entries.resize(inputs.size());
  std::vector<std::vector<ExportRecord>> records(inputs.size());
  std::vector<std::string> video_split(inputs.size());

  parallel_for(inputs.size(), options.workers, [&](std::size_t i) {
    InputEntry& e = m.entries[i];
    e.input = relative_to(inputs[i], videos_dir);
    guarded(e, [&] {
      const FrameVolume volume = load_video(inputs[i]);
      e.video_id = volume.meta.video_id;
      const auto it = cohort.by_id.find(volume.meta.individual_id);
      if (it == cohort.by_id.end()) {
        throw Error(ErrorKind::IdMismatch, "individual '" + volume.meta.individual_id + "' is not in the cohort table");
      }
      const std::string split = cohort.split.at(volume.meta.individual_id);
      const bool train = split == "train";
      const auto plans = plan_clips(volume.meta, train ? train_clips : val_clips,
                                    derive_seed(options.seed, {kExportClipStream}));
      for (std::size_t k = 0; k < plans.size(); ++k) {
        ClipTensor clip = extract_clip(volume, plans[k]);
        if (train && augment_train) clip = augment(clip, aug, plans[k].seed);
        ExportRecord r;
        r.clip_file = "clips/" + safe_name(e.video_id) + "_" + std::to_string(k) + ".f32";
        r.video_id = e.video_id;
        r.individual_id = volume.meta.individual_id;
        r.label = it->second->hypertension_dx ? 1 : 0;
        r.seed = plans[k].seed;
        r.frame_indices = plans[k].frame_indices;
        write_clip_file(clip, out_dir / split / r.clip_file);
        records[i].push_back(std::move(r));
      }
      video_split[i] = split;
      e.status = "processed";
    });
  });

  std::map<std::string, std::vector<ExportRecord>> by_split;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (auto& r : records[i]) by_split[video_split[i]].push_back(std::move(r));
  }
  for (const char* split : {"train", "val"}) {
    write_export_index(by_split[split], out_dir / split / kExportIndexName);
    m.outputs[std::string(split) + "_clips"] = by_split[split].size();
  }
  write_split(cohort, out_dir / "split.tsv");

  ojson info;
  info["clip_shape"] = {kClipLength, kClipSize, kClipSize, kClipChannels};
  info["dtype"] = "float32";
  info["byte_order"] = "little";
  info["layout"] = "THWC";
  info["values"] = "unnormalized 0-255";
  info["class_order"] = {"LowVD", "HighVD"};
  info["norm_mean"] = stats.mean;
  info["norm_std"] = stats.std;
  info["augmented"] = augment_train;
  info["train_clips"] = by_split["train"].size();
  info["val_clips"] = by_split["val"].size();
  write_text(out_dir / "export.json", info.dump(2) + "\n");

  finish_manifest(m, start, inputs.size());
  write_manifest(m, out_dir / kManifestFile);
  log_summary(m);
  return m;
}

// --- train --------------------------------------------------------------------------

RunManifest cmd_train(const fs::path& videos_dir, const fs::path& cohort_table, const fs::path& out_dir,
                      const RunOptions& options) {
  const auto start = Clock::now();
  const auto clips_per_video = static_cast<std::size_t>(options.config.get_int("train.clips_per_video", 4));
  const NormStats stats = norm_stats_config(options.config, "model");
  const TrainOptions train = train_options(options.config, options.seed);
  const std::string model_id = options.config.get_string("train.model_id", "builtin-linear");
  const CohortIndex cohort = load_cohort_with_split(cohort_table, options);
  RunManifest m = start_manifest("train", options);
  seal_config(m, options);

  fs::create_directories(out_dir);
  const auto inputs = discover_inputs(videos_dir);
  m.entries.resize(inputs.size());
  std::vector<std::vector<LabeledFeatures>> features(inputs.size());
  parallel_for(inputs.size(), options.workers, [&](std::size_t i) {
    InputEntry& e = m.entries[i];
    e.input = relative_to(inputs[i], videos_dir);
    guarded(e, [&] {
      const VideoMeta meta = probe_metadata(inputs[i]);
      e.video_id = meta.video_id;
      const auto it = cohort.by_id.find(meta.individual_id);
      if (it == cohort.by_id.end()) {
        throw Error(ErrorKind::IdMismatch, "individual '" + meta.individual_id + "' is not in the cohort table");
      }
      if (cohort.split.at(meta.individual_id) != "train") {
        e.status = "filtered";
        return;
      }
      const FrameVolume volume = load_video(inputs[i]);
      const int label = it->second->hypertension_dx ? 1 : 0;
      for (const auto& plan : plan_clips(meta, clips_per_video, derive_seed(options.seed, {kTrainClipStream}))) {
        features[i].push_back({clip_features(normalize(extract_clip(volume, plan), stats)), label});
      }
      e.status = "processed";
    });
  });

  std::vector<LabeledFeatures> samples;
  for (auto& f : features) samples.insert(samples.end(), f.begin(), f.end());
  if (samples.empty()) throw Error(ErrorKind::EmptyInput, "no training clips");
  const ModelHandle model = make_builtin_model(model_id, stats, train_linear(samples, train));
  save_model(model, out_dir / "model.card");
  write_split(cohort, out_dir / "split.tsv");
  m.outputs["train_clips"] = samples.size();

  finish_manifest(m, start, inputs.size());
  write_manifest(m, out_dir / kManifestFile);
  log_summary(m);
  return m;
}

// --- infer --------------------------------------------------------------------------

RunManifest cmd_infer(const fs::path& videos_dir, const fs::path& model_card, const fs::path& out_dir,
                      const RunOptions& options, const std::optional<std::set<std::string>>& individuals) {
  const auto start = Clock::now();
  const ModelHandle model = load_model(model_card);
  const auto clips_per_video = static_cast<std::size_t>(options.config.get_int("infer.clips_per_video", 2));
  if (clips_per_video < 1) throw Error(ErrorKind::InvalidConfig, "infer.clips_per_video must be at least 1");
  RunManifest m = start_manifest("infer", options);
  seal_config(m, options);

  fs::create_directories(out_dir);
  const auto inputs = discover_inputs(videos_dir);
  m.entries.resize(inputs.size());
  std::vector<std::vector<ClipPrediction>> per_video(inputs.size());
  const std::uint64_t clip_seed = derive_seed(options.seed, {kInferClipStream});
  parallel_for(inputs.size(), options.workers, [&](std::size_t i) {
    InputEntry& e = m.entries[i];
    e.input = relative_to(inputs[i], videos_dir);
    guarded(e, [&] {
      const VideoMeta meta = probe_metadata(inputs[i]);
      e.video_id = meta.video_id;
      if (individuals && !individuals->count(meta.individual_id)) {
        e.status = "filtered";
        return;
      }
      const FrameVolume volume = load_video(inputs[i]);
      const auto plans = plan_clips(volume.meta, clips_per_video, clip_seed);
      for (std::size_t k = 0; k < plans.size(); ++k) {
        ClipPrediction p = predict_clip(model, normalize(extract_clip(volume, plans[k]), model.norm_stats));
        p.individual_id = volume.meta.individual_id;
        p.clip_index = k;
        per_video[i].push_back(std::move(p));
      }
      e.status = "processed";
    });
  });

  std::vector<ClipPrediction> clips;
  for (auto& v : per_video) {
    for (auto& p : v) clips.push_back(std::move(p));
  }
  const auto videos = vote_all_videos(clips);
  const auto people = aggregate_all_individuals(videos);
  write_clip_dump(clips, out_dir / "clips.jsonl");
  write_video_dump(videos, out_dir / "videos.jsonl");
  write_individual_dump(people, out_dir / "individuals.jsonl");
  m.outputs["clips"] = clips.size();
  m.outputs["videos"] = videos.size();
  m.outputs["individuals"] = people.size();

  finish_manifest(m, start, inputs.size());
  write_manifest(m, out_dir / kManifestFile);
  log_summary(m);
  return m;
}

// --- report -------------------------------------------------------------------------

RunManifest cmd_report(const fs::path& predictions, const fs::path& cohort_table, const fs::path& out_dir,
                       const RunOptions& options, const std::optional<std::set<std::string>>& metric_subset) {
  const auto start = Clock::now();
  RunManifest m = start_manifest("report", options);
  seal_config(m, options);
  const fs::path dump = fs::is_directory(predictions) ? predictions / "clips.jsonl" : predictions;
  const auto clips = read_clip_dump(dump);
  const auto records = read_cohort_table(cohort_table);
  fs::create_directories(out_dir);

  const auto unknown = unknown_prediction_ids(clips, records);
  if (!unknown.empty()) {
    std::ostringstream out;
    out << "individual_id\n";
    for (const auto& id : unknown) out << id << '\n';
    write_text(out_dir / "id_mismatch.tsv", out.str());
    throw Error(ErrorKind::IdMismatch, std::to_string(unknown.size()) +
                                           " predicted individual(s) are not in the cohort table; see " +
                                           (out_dir / "id_mismatch.tsv").string());
  }
  const CohortReport report = build_cohort_report(clips, records, metric_subset);
  write_cohort_report(report, out_dir);
  m.outputs["clips"] = clips.size();
  m.outputs["individuals"] = report.strat.cohort_size;
  m.outputs["without_predictions"] = report.without_predictions.size();
  finish_manifest(m, start, 0);
  write_manifest(m, out_dir / kManifestFile);
  for (const auto& metric : report.metrics) {
    spdlog::info("report: {} accuracy {:.3f}, balanced accuracy {}", metric.level, metric.accuracy,
                 metric.balanced_accuracy ? fmt::format("{:.3f}", *metric.balanced_accuracy) : "Undefined");
  }
  if (!report.without_predictions.empty()) {
    spdlog::warn("report: {} cohort individual(s) have no predictions", report.without_predictions.size());
  }
  return m;
}

// --- synth --------------------------------------------------------------------------

RunManifest cmd_synth(const fs::path& out_dir, const RunOptions& options) {
  const auto start = Clock::now();
  const synth::SynthCohortSpec spec = synth_cohort_spec(options.config);
  const std::string format = options.config.get_string("synth.format", "dicom");
  if (format != "dicom" && format != "frames" && format != "mixed") {
    throw Error(ErrorKind::InvalidConfig, "synth.format must be dicom, frames or mixed");
  }
  const auto doppler_videos = static_cast<std::size_t>(options.config.get_int("synth.doppler_videos", 0));
  const double doppler_min = options.config.get_double("synth.doppler_fraction_min", 0.04);
  const double doppler_max = options.config.get_double("synth.doppler_fraction_max", 0.2);
  const bool write_truth = options.config.get_bool("synth.write_truth", true);
  if (!(doppler_min > 0.0 && doppler_max >= doppler_min && doppler_max < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "synth.doppler_fraction_min/max must satisfy 0 < min <= max < 1");
  }
  RunManifest m = start_manifest("synth", options);
  seal_config(m, options);

  synth::SynthCohort cohort = synth::gen_cohort(spec, options.seed);
  if (doppler_videos > cohort.videos.size()) {
    throw Error(ErrorKind::InvalidConfig, "synth.doppler_videos exceeds the number of videos");
  }
  {
    std::vector<std::size_t> order(cohort.videos.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(options.seed, {kDopplerStream});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t k = 0; k < doppler_videos; ++k) {
      auto& v = cohort.videos[order[k]].spec;
      v.color = ColorMode::Rgb8;
      v.doppler = synth::DopplerPatch{doppler_min + (doppler_max - doppler_min) * uniform01(rng),
                                      uniform01(rng) < 0.5 ? synth::DopplerHue::Red : synth::DopplerHue::Blue};
    }
  }

  const fs::path videos_dir = out_dir / "videos";
  const fs::path truth_dir = out_dir / "truth";
  fs::create_directories(videos_dir);
  if (write_truth) fs::create_directories(truth_dir);
  m.entries.resize(cohort.videos.size());
  std::vector<synth::GroundTruth> truths(cohort.videos.size());
  parallel_for(cohort.videos.size(), options.workers, [&](std::size_t i) {
    const synth::SynthVideoPlan& plan = cohort.videos[i];
    InputEntry& e = m.entries[i];
    e.video_id = plan.spec.video_id;
    guarded(e, [&] {
      synth::SynthVideo video = synth::gen_video(plan.spec, plan.seed);
      const bool frames = format == "frames" || (format == "mixed" && i % 2 == 1);
      const std::string name = safe_name(plan.spec.video_id);
      const fs::path output = frames ? videos_dir / name : videos_dir / (name + ".dcm");
      if (frames) {
        frame_sequence::save(video.volume, output);
      } else {
        dicom::save(video.volume, output);
      }
      if (write_truth) synth::write_ground_truth(video.truth, truth_dir, name);
      e.input = relative_to(output, out_dir);
      e.output = e.input;
      truths[i] = std::move(video.truth);
      e.status = "processed";
    });
  });

  write_cohort_table(cohort.records, out_dir / "cohort.csv");
  ojson info;
  info["seed"] = options.seed;
  info["individuals"] = cohort.records.size();
  info["videos"] = ojson::array();
  std::map<std::string, std::size_t> record_of;
  for (std::size_t i = 0; i < cohort.records.size(); ++i) record_of[cohort.records[i].individual_id] = i;
  for (std::size_t i = 0; i < cohort.videos.size(); ++i) {
    const auto& plan = cohort.videos[i];
    const std::size_t r = record_of.at(plan.spec.individual_id);
    ojson v;
    v["video_id"] = plan.spec.video_id;
    v["individual_id"] = plan.spec.individual_id;
    v["file"] = m.entries[i].output;
    v["color"] = std::string(to_string(plan.spec.color));
    v["texture_class"] = plan.spec.texture_class;
    v["hypertension_dx"] = cohort.records[r].hypertension_dx;
    v["discordant"] = plan.discordant;
    v["doppler_flag"] = truths[i].doppler_flag;
    v["doppler_fraction"] = truths[i].doppler_fraction;
    v["seed"] = plan.seed;
    info["videos"].push_back(v);
  }
  write_text(out_dir / "synth.json", info.dump(2) + "\n");
  m.outputs["individuals"] = cohort.records.size();
  m.outputs["videos"] = m.count("processed");
  m.outputs["doppler_videos"] = doppler_videos;

  finish_manifest(m, start, cohort.videos.size());
  write_manifest(m, out_dir / kManifestFile);
  log_summary(m);
  return m;
}

std::set<std::string> read_id_list(const fs::path& path, const std::string& split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = kv::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cols = kv::split(t, '\t');
    const std::string id = kv::trim(cols[0]);
    if (id == "individual_id") continue;
    if (!split.empty() && (cols.size() < 2 || kv::trim(cols[1]) != split)) continue;
    ids.insert(id);
  }
  return ids;
}

}  // namespace vdscan::pipeline
