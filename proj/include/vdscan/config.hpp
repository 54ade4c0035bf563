#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "vdscan/clips.hpp"
#include "vdscan/model.hpp"
#include "vdscan/preprocess.hpp"
#include "vdscan/synth.hpp"

namespace vdscan {

/// Flat `key = value` configuration. A line `include = other.cfg` splices in
/// another file (relative to the including file); later keys win. Every typed
/// lookup records the value in effect, defaults included, so runs can print
/// their full configuration.
class Config {
 public:
  Config() = default;

  static Config load(const std::filesystem::path& path);

  /// Later calls override earlier values (used for command-line overrides).
  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  /// Explicit values merged with every default looked up so far.
  const std::map<std::string, std::string>& effective() const { return effective_; }
  const std::map<std::string, std::string>& explicit_values() const { return values_; }

  /// Keys that were set but never looked up (likely typos).
  std::vector<std::string> unused_keys() const;

  /// SHA-256 over the sorted effective `key=value` lines.
  std::string hash() const;

 private:
  std::optional<std::string> lookup(const std::string& key, const std::string& fallback) const;

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> effective_;
};

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Hash of an ingest input: the file itself, or every file of a frame-sequence directory in name order.
std::string sha256_input(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_number(double v);

// --- typed sections --------------------------------------------------------------

PreprocessConfig preprocess_config(const Config& config);
NormStats norm_stats_config(const Config& config, const std::string& prefix);
AugConfig aug_config(const Config& config);
TrainOptions train_options(const Config& config, std::uint64_t seed);
synth::SynthCohortSpec synth_cohort_spec(const Config& config);

}  // namespace vdscan
