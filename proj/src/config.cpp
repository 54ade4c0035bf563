#include "vdscan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include <openssl/evp.h>

#include "vdscan/error.hpp"
#include "vdscan/kv.hpp"

namespace vdscan {

namespace {

void load_into(const std::filesystem::path& path, std::map<std::string, std::string>& values,
               std::set<std::filesystem::path>& stack) {
  const auto canonical = std::filesystem::weakly_canonical(path);
  if (!stack.insert(canonical).second) {
    throw Error(ErrorKind::InvalidConfig, "include cycle through " + path.string());
  }
  for (const auto& [key, value] : kv::read_file(path)) {
    if (key == "include") {
      std::filesystem::path inc(value);
      if (inc.is_relative()) inc = path.parent_path() / inc;
      load_into(inc, values, stack);
    } else {
      values[key] = value;
    }
  }
  stack.erase(canonical);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected) {
  throw Error(ErrorKind::InvalidConfig, key + " = '" + text + "' is not " + expected);
}

}  // namespace

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

Config Config::load(const std::filesystem::path& path) {
  Config c;
  std::set<std::filesystem::path> stack;
  load_into(path, c.values_, stack);
  return c;
}

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw Error(ErrorKind::InvalidConfig, "empty config key");
  values_[key] = value;
}

std::optional<std::string> Config::lookup(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  effective_[key] = it == values_.end() ? fallback : it->second;
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  return lookup(key, fallback).value_or(fallback);
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto text = lookup(key, format_number(fallback));
  if (!text) return fallback;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc{} || ptr != text->data() + text->size() || !std::isfinite(v)) bad_value(key, *text, "a number");
  return v;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const auto text = lookup(key, std::to_string(fallback));
  if (!text) return fallback;
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc{} || ptr != text->data() + text->size()) bad_value(key, *text, "an integer");
  return v;
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto text = lookup(key, std::to_string(fallback));
  if (!text) return fallback;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc{} || ptr != text->data() + text->size()) bad_value(key, *text, "an unsigned integer");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto text = lookup(key, fallback ? "true" : "false");
  if (!text) return fallback;
  if (*text == "true" || *text == "1" || *text == "yes" || *text == "on") return true;
  if (*text == "false" || *text == "0" || *text == "no" || *text == "off") return false;
  bad_value(key, *text, "a boolean");
}

std::vector<std::string> Config::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!effective_.count(key)) out.push_back(key);
  }
  return out;
}

std::string Config::hash() const {
  std::string canonical;
  for (const auto& [key, value] : effective_) canonical += key + "=" + value + "\n";
  return sha256_hex(canonical);
}

// --- hashing ------------------------------------------------------------------------

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error(ErrorKind::IoError, "SHA-256 unavailable");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx_, data, size); }

  void update_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
    std::array<char, 1 << 16> buf{};
    while (in) {
      in.read(buf.data(), buf.size());
      update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, digest.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out += kHex[digest[i] >> 4];
      out += kHex[digest[i] & 15];
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data.data(), data.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  Sha256 h;
  h.update_file(path);
  return h.hex();
}

std::string sha256_input(const std::filesystem::path& path) {
  if (!std::filesystem::is_directory(path)) return sha256_file(path);
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(path)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  Sha256 h;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    h.update(name.data(), name.size() + 1);
    h.update_file(f);
  }
  return h.hex();
}

// --- typed sections --------------------------------------------------------------

PreprocessConfig preprocess_config(const Config& c) {
  PreprocessConfig p;
  p.var_threshold = c.get_double("preprocess.var_threshold", p.var_threshold);
  const std::string statistic = c.get_string("preprocess.statistic", "variance");
  if (statistic == "variance") {
    p.statistic = PixelChangeStatistic::Variance;
  } else if (statistic == "max_abs_deviation") {
    p.statistic = PixelChangeStatistic::MaxAbsDeviation;
  } else {
    bad_value("preprocess.statistic", statistic, "variance or max_abs_deviation");
  }
  p.crop_px = static_cast<int>(c.get_int("preprocess.crop_px", p.crop_px));
  p.red_hue_below = c.get_double("preprocess.red_hue_below", p.red_hue_below);
  p.red_hue_above = c.get_double("preprocess.red_hue_above", p.red_hue_above);
  p.blue_hue_min = c.get_double("preprocess.blue_hue_min", p.blue_hue_min);
  p.blue_hue_max = c.get_double("preprocess.blue_hue_max", p.blue_hue_max);
  p.sat_min = c.get_double("preprocess.sat_min", p.sat_min);
  p.val_min = c.get_double("preprocess.val_min", p.val_min);
  p.tau_red = c.get_double("preprocess.tau_red", p.tau_red);
  p.tau_blue = c.get_double("preprocess.tau_blue", p.tau_blue);
  if (p.crop_px < 0) bad_value("preprocess.crop_px", std::to_string(p.crop_px), "non-negative");
  return p;
}

NormStats norm_stats_config(const Config& c, const std::string& prefix) {
  // ImageNet channel statistics, the usual pretraining default.
  const auto triple = [&](const std::string& key, const std::string& fallback) {
    const std::string text = c.get_string(key, fallback);
    const auto parts = kv::split(text, ',');
    if (parts.size() != 3) bad_value(key, text, "three comma-separated numbers");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string p = kv::trim(parts[i]);
      const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), out[i]);
      if (ec != std::errc{} || ptr != p.data() + p.size()) bad_value(key, text, "three comma-separated numbers");
    }
    return out;
  };
  NormStats s;
  s.mean = triple(prefix + ".norm_mean", "0.485,0.456,0.406");
  s.std = triple(prefix + ".norm_std", "0.229,0.224,0.225");
  s.validate();
  return s;
}

AugConfig aug_config(const Config& c) {
  AugConfig a;
  a.scale_min = c.get_double("sample.scale_min", a.scale_min);
  a.scale_max = c.get_double("sample.scale_max", a.scale_max);
  a.flip_probability = c.get_double("sample.flip_probability", a.flip_probability);
  if (!(a.scale_min >= 1.0 && a.scale_max >= a.scale_min)) {
    throw Error(ErrorKind::InvalidConfig, "sample.scale_min/scale_max must satisfy 1 <= min <= max");
  }
  if (!(a.flip_probability >= 0.0 && a.flip_probability <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "sample.flip_probability must lie in [0, 1]");
  }
  return a;
}

TrainOptions train_options(const Config& c, std::uint64_t seed) {
  TrainOptions t;
  t.epochs = static_cast<int>(c.get_int("train.epochs", t.epochs));
  t.learning_rate = c.get_double("train.learning_rate", t.learning_rate);
  t.batch_size = static_cast<std::size_t>(c.get_int("train.batch_size", static_cast<std::int64_t>(t.batch_size)));
  t.class_weighting = c.get_bool("train.class_weighting", t.class_weighting);
  t.seed = derive_seed(seed, {0x77a1u});
  if (t.epochs < 1 || t.batch_size < 1 || !(t.learning_rate > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "train.epochs, train.batch_size and train.learning_rate must be positive");
  }
  return t;
}

synth::SynthCohortSpec synth_cohort_spec(const Config& c) {
  auto s = synth::SynthCohortSpec::defaults();
  s.n_individuals = c.get_u64("synth.n_individuals", s.n_individuals);
  s.videos_per_individual = c.get_u64("synth.videos_per_individual", s.videos_per_individual);
  s.hypertension_prevalence = c.get_double("synth.hypertension_prevalence", s.hypertension_prevalence);
  s.discordance = c.get_double("synth.discordance", s.discordance);
  s.rgb_fraction = c.get_double("synth.rgb_fraction", s.rgb_fraction);
  s.lab_missing = c.get_double("synth.lab_missing", s.lab_missing);
  auto& v = s.video;
  v.width = static_cast<int>(c.get_int("synth.width", v.width));
  v.height = static_cast<int>(c.get_int("synth.height", v.height));
  v.fps = c.get_double("synth.fps", v.fps);
  v.frame_count = c.get_u64("synth.frame_count", v.frame_count);
  v.overlay.top_rows = static_cast<int>(c.get_int("synth.ui_top_rows", v.overlay.top_rows));
  v.overlay.right_cols = static_cast<int>(c.get_int("synth.ui_right_cols", v.overlay.right_cols));
  v.overlay.heartline_rows = static_cast<int>(c.get_int("synth.heartline_rows", v.overlay.heartline_rows));
  v.mu0 = c.get_double("synth.mu0", v.mu0);
  v.mu1 = c.get_double("synth.mu1", v.mu1);
  v.variance_floor = c.get_double("synth.variance_floor", v.variance_floor);
  const std::size_t diabetes = static_cast<std::size_t>(Condition::DiabetesT2);
  const double base = c.get_double("synth.diabetes_baseline", s.conditions[diabetes][3]);
  const double ratio = c.get_double("synth.diabetes_high_vd_ratio", s.conditions[diabetes][0] / s.conditions[diabetes][3]);
  s.conditions[diabetes] = {base * ratio, base * ratio, s.conditions[diabetes][2] / s.conditions[diabetes][3] * base,
                            base};
  const double event_ratio = c.get_double("synth.event_high_vd_ratio", 4.0);
  for (auto& r : s.events) {
    r[0] = r[3] * event_ratio;
    r[1] = r[3] * event_ratio;
  }
  s.validate();
  return s;
}

}  // namespace vdscan
