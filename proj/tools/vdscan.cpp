// vdscan: batch driver for the visual-damage pipeline.
//
//   vdscan synth --out corpus
//   vdscan preprocess corpus/videos --out clean
//   vdscan train clean/videos --cohort corpus/cohort.csv --out model
//   vdscan infer clean/videos --model-card model/model.card --out preds
//   vdscan report preds --cohort corpus/cohort.csv --out report
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 model error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "vdscan/error.hpp"
#include "vdscan/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitModel = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace vdscan;
  CLI::App app{"Ultrasound video visual-damage pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out;
  std::string model_card;
  std::vector<std::string> overrides;
  bool quiet = false;
  app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "root seed");
  app.add_option("--workers", workers, "worker threads (never changes outputs)")->check(CLI::PositiveNumber);
  app.add_option("--set", overrides, "config override key=value (repeatable)");
  app.add_flag("-q,--quiet", quiet, "only log warnings and errors");

  std::string input;
  std::string cohort;
  std::string individuals_file;
  std::string subset_file;
  std::string subset_split;

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with ground truth");
  synth->add_option("--out", out, "output directory")->required();

  auto* preprocess = app.add_subcommand("preprocess", "Doppler exclusion, UI removal and bottom crop");
  preprocess->add_option("input", input, "input tree of .dcm files / frame-sequence directories")
      ->required()
      ->check(CLI::ExistingDirectory);
  preprocess->add_option("--out", out, "output directory")->required();

  auto* sample = app.add_subcommand("sample", "export training/validation clips");
  sample->add_option("input", input, "preprocessed videos")->required()->check(CLI::ExistingDirectory);
  sample->add_option("--cohort", cohort, "cohort table (CSV)")->required()->check(CLI::ExistingFile);
  sample->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the builtin linear baseline");
  train->add_option("input", input, "preprocessed videos")->required()->check(CLI::ExistingDirectory);
  train->add_option("--cohort", cohort, "cohort table (CSV)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "output directory")->required();

  auto* infer = app.add_subcommand("infer", "clip, video and individual predictions");
  infer->add_option("input", input, "preprocessed videos")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--model-card", model_card, "model card")->required();
  infer->add_option("--out", out, "output directory")->required();
  infer->add_option("--individuals", individuals_file, "restrict to ids listed in this file")
      ->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "stratified cohort report and figures");
  report->add_option("input", input, "prediction directory or clips.jsonl")->required()->check(CLI::ExistingPath);
  report->add_option("--cohort", cohort, "cohort table (CSV)")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out, "output directory")->required();
  report->add_option("--subset", subset_file, "evaluate metrics on ids listed in this file (or split.tsv)")
      ->check(CLI::ExistingFile);
  report->add_option("--subset-split", subset_split, "with a split.tsv subset: which split to keep (e.g. val)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    pipeline::RunOptions options;
    if (!config_path.empty()) options.config = Config::load(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        std::cerr << "--set expects key=value, got '" << o << "'\n";
        return kExitUsage;
      }
      options.config.set(o.substr(0, eq), o.substr(eq + 1));
    }
    options.seed = seed;
    options.workers = workers;

    if (synth->parsed()) {
      pipeline::cmd_synth(out, options);
    } else if (preprocess->parsed()) {
      pipeline::cmd_preprocess(input, out, options);
    } else if (sample->parsed()) {
      pipeline::cmd_sample(input, cohort, out, options);
    } else if (train->parsed()) {
      pipeline::cmd_train(input, cohort, out, options);
    } else if (infer->parsed()) {
      std::optional<std::set<std::string>> ids;
      if (!individuals_file.empty()) ids = pipeline::read_id_list(individuals_file);
      pipeline::cmd_infer(input, model_card, out, options, ids);
    } else if (report->parsed()) {
      std::optional<std::set<std::string>> ids;
      if (!subset_file.empty()) ids = pipeline::read_id_list(subset_file, subset_split);
      pipeline::cmd_report(input, cohort, out, options, ids);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.kind() == ErrorKind::ModelLoadError ? kExitModel : kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitOk;
}
