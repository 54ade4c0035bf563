#include "vdscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "vdscan/error.hpp"
#include "vdscan/rng.hpp"

namespace vdscan::synth {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorKind::InvalidSpec, what); }

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

constexpr int kWavePeriod = 48;
constexpr int kTraceSpeed = 3;  // columns per frame

// Row offsets of one ECG beat relative to the band's baseline (positive = up).
std::array<int, kWavePeriod> ecg_wave(int amplitude) {
  std::array<int, kWavePeriod> w{};
  const auto scaled = [&](double f) { return static_cast<int>(std::lround(f * amplitude)); };
  w[8] = scaled(0.15);
  w[9] = scaled(0.2);
  w[10] = scaled(0.15);
  w[18] = scaled(-0.2);
  w[19] = scaled(1.0);
  w[20] = scaled(0.5);
  w[21] = scaled(-0.35);
  for (int i = 30; i < 38; ++i) w[i] = scaled(0.3 * std::sin(std::numbers::pi * (i - 30) / 8.0));
  return w;
}

struct Band {
  int top = 0;  // first band row
  int rows = 0;
  int mid = 0;
  std::array<int, kWavePeriod> wave{};
};

// Rows [lo, hi] lit at column x in frame t.
std::pair<int, int> trace_span(const Band& band, int x, std::size_t t) {
  const auto phase = static_cast<int>((static_cast<std::size_t>(x) + kTraceSpeed * t) % kWavePeriod);
  const int prev = (phase + kWavePeriod - 1) % kWavePeriod;
  const int y0 = band.mid - band.wave[static_cast<std::size_t>(phase)];
  const int y1 = band.mid - band.wave[static_cast<std::size_t>(prev)];
  return {std::clamp(std::min(y0, y1), band.top, band.top + band.rows - 1),
          std::clamp(std::max(y0, y1), band.top, band.top + band.rows - 1)};
}

struct Rect {
  int y0 = 0, x0 = 0, h = 0, w = 0;
  bool contains(int y, int x) const { return y >= y0 && y < y0 + h && x >= x0 && x < x0 + w; }
};

}  // namespace

void SynthVideoSpec::validate() const {
  if (width < kMinFrameEdge || height < kMinFrameEdge) invalid("frames must be at least 64x64");
  if (!(fps > 0.0) || !std::isfinite(fps)) invalid("fps must be positive");
  if (frame_count < 2) invalid("synthetic videos need at least two frames");
  if (overlay.top_rows < 0 || overlay.right_cols < 0 || overlay.heartline_rows < 0) {
    invalid("overlay sizes must be non-negative");
  }
  if (overlay.right_cols > width / 2) invalid("right overlay strip wider than half the frame");
  if (overlay.top_rows + overlay.heartline_rows > height / 2) invalid("overlays cover more than half the frame");
  if (texture_class != 0 && texture_class != 1) invalid("texture_class must be 0 or 1");
  if (!(mu0 > 0.0) || !(mu1 > 0.0)) invalid("contrast multipliers must be positive");
  if (separable && mu0 == mu1) invalid("separable texture classes need mu0 != mu1");
  if (!(variance_floor >= 0.0) || variance_floor > 400.0) invalid("variance floor must lie in [0, 400]");
  if (doppler) {
    if (!(doppler->area_fraction >= 0.0 && doppler->area_fraction < 1.0)) {
      invalid("Doppler area fraction must lie in [0, 1)");
    }
    if (color != ColorMode::Rgb8) invalid("Doppler patches need RGB8 videos");
  }
}

SynthVideo gen_video(const SynthVideoSpec& spec, std::uint64_t seed) {
  spec.validate();
  VideoMeta meta;
  meta.video_id = spec.video_id;
  meta.individual_id = spec.individual_id;
  meta.site = spec.site;
  meta.fps = spec.fps;
  meta.frame_count = spec.frame_count;
  meta.width = spec.width;
  meta.height = spec.height;
  meta.color = spec.color;

  const int W = spec.width;
  const int H = spec.height;
  const int C = meta.channels();
  const std::size_t n = spec.frame_count;
  const Rect content{spec.overlay.top_rows, 0, H - spec.overlay.top_rows - spec.overlay.heartline_rows,
                     W - spec.overlay.right_cols};

  Rect patch;
  if (spec.doppler && spec.doppler->area_fraction > 0.0) {
    const double area = spec.doppler->area_fraction * W * H;
    const double aspect = static_cast<double>(content.w) / content.h;
    patch.w = std::max(1, static_cast<int>(std::lround(std::sqrt(area * aspect))));
    patch.h = std::max(1, static_cast<int>(std::lround(area / patch.w)));
    if (patch.w > content.w || patch.h > content.h) invalid("Doppler patch does not fit the image region");
    patch.y0 = content.y0 + (content.h - patch.h) / 2;
    patch.x0 = content.x0 + (content.w - patch.w) / 2;
  }

  // Intensity of every pixel over time before color expansion.
  std::vector<std::uint8_t> gray(n * static_cast<std::size_t>(W) * H, 0);
  const auto gidx = [&](std::size_t t, int y, int x) {
    return (t * static_cast<std::size_t>(H) + static_cast<std::size_t>(y)) * static_cast<std::size_t>(W) +
           static_cast<std::size_t>(x);
  };

  // Tissue-like base pattern plus box-filtered speckle scaled by the class contrast.
  Rng layout = make_rng(seed, {0x1a40u});
  const double phase_y = 2.0 * std::numbers::pi * uniform01(layout);
  const double phase_x = 2.0 * std::numbers::pi * uniform01(layout);
  const double contrast = spec.texture_class == 1 ? spec.mu1 : spec.mu0;
  std::vector<double> base(static_cast<std::size_t>(W) * H, 0.0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      base[static_cast<std::size_t>(y) * W + x] = 125.0 + 30.0 * std::sin(2.0 * std::numbers::pi * y / 37.0 + phase_y) +
                                                  15.0 * std::sin(2.0 * std::numbers::pi * x / 53.0 + phase_x);
    }
  }
  const int nw = content.w + 2;
  const int nh = content.h + 2;
  std::vector<int> noise(static_cast<std::size_t>(nw) * nh);
  for (std::size_t t = 0; t < n; ++t) {
    Rng rng = make_rng(seed, {0x5eedu, t});
    for (auto& v : noise) v = static_cast<int>(rng() >> 56);
    for (int y = 0; y < content.h; ++y) {
      for (int x = 0; x < content.w; ++x) {
        int s = 0;
        for (int dy = 0; dy < 3; ++dy) {
          for (int dx = 0; dx < 3; ++dx) s += noise[static_cast<std::size_t>(y + dy) * nw + x + dx];
        }
        const int gy = content.y0 + y;
        const int gx = content.x0 + x;
        const double v = base[static_cast<std::size_t>(gy) * W + gx] + contrast * (s / 9.0 - 127.5);
        gray[gidx(t, gy, gx)] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }

  // Variance floor: the rare background pixel whose series came out too flat
  // is replaced by an alternating series around its base intensity.
  if (spec.variance_floor > 0.0) {
    const int d = static_cast<int>(std::ceil(std::sqrt(2.0 * spec.variance_floor))) + 1;
    for (int y = content.y0; y < content.y0 + content.h; ++y) {
      for (int x = content.x0; x < content.x0 + content.w; ++x) {
        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double v = gray[gidx(t, y, x)];
          sum += v;
          sum_sq += v * v;
        }
        const double mean = sum / static_cast<double>(n);
        if (sum_sq / static_cast<double>(n) - mean * mean >= spec.variance_floor) continue;
        const long centre = std::clamp(std::lround(base[static_cast<std::size_t>(y) * W + x]), 0L + d, 255L - d);
        for (std::size_t t = 0; t < n; ++t) {
          gray[gidx(t, y, x)] = static_cast<std::uint8_t>(centre + (t % 2 == 0 ? d : -d));
        }
      }
    }
  }

  // Static overlay: glyph blocks in the top strip, tick marks in the right strip.
  std::vector<std::uint8_t> overlay(static_cast<std::size_t>(W) * H, 0);
  std::vector<std::uint8_t> is_overlay(static_cast<std::size_t>(W) * H, 0);
  for (int y = 0; y < spec.overlay.top_rows; ++y) {
    for (int x = 0; x < W; ++x) is_overlay[static_cast<std::size_t>(y) * W + x] = 1;
  }
  for (int y = spec.overlay.top_rows; y < content.y0 + content.h; ++y) {
    for (int x = content.w; x < W; ++x) is_overlay[static_cast<std::size_t>(y) * W + x] = 1;
  }
  Rng glyphs = make_rng(seed, {0x9a7fu});
  if (spec.overlay.top_rows >= 7) {
    const int gy = (spec.overlay.top_rows - 5) / 2;
    for (int gx = 4; gx + 3 <= W; gx += 8) {
      if (uniform01(glyphs) < 0.35) continue;
      for (int dy = 0; dy < 5; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          if (uniform01(glyphs) < 0.6) overlay[static_cast<std::size_t>(gy + dy) * W + gx + dx] = 255;
        }
      }
    }
  }
  if (spec.overlay.right_cols >= 4) {
    for (int y = content.y0 + 4; y < content.y0 + content.h; y += 10) {
      const int len = (y / 10) % 5 == 0 ? spec.overlay.right_cols - 2 : spec.overlay.right_cols / 2;
      for (int x = W - len; x < W; ++x) overlay[static_cast<std::size_t>(y) * W + x] = 255;
    }
  }

  // Heartline band: black with a scrolling trace.
  Band band;
  band.top = H - spec.overlay.heartline_rows;
  band.rows = spec.overlay.heartline_rows;
  band.mid = band.top + band.rows / 2 + band.rows / 6;
  band.wave = ecg_wave(std::max(0, band.rows / 2 - 2));
  std::vector<std::size_t> lit_frames(static_cast<std::size_t>(W) * H, 0);
  std::vector<std::uint8_t> lit(n * static_cast<std::size_t>(W) * H, 0);
  if (band.rows > 0) {
    for (std::size_t t = 0; t < n; ++t) {
      for (int x = 0; x < W; ++x) {
        const auto [lo, hi] = trace_span(band, x, t);
        for (int y = lo; y <= hi; ++y) {
          lit[gidx(t, y, x)] = 1;
          ++lit_frames[static_cast<std::size_t>(y) * W + x];
        }
      }
    }
  }

  SynthVideo out{FrameVolume::zeros(meta), {}};
  GroundTruth& truth = out.truth;
  truth.seed = seed;
  truth.texture_class = spec.texture_class;
  truth.ui_mask = UiMask{W, H, std::vector<std::uint8_t>(static_cast<std::size_t>(W) * H, 0)};
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * W + x;
      const bool in_band = y >= band.top && band.rows > 0;
      const bool steady_trace = lit_frames[p] == 0 || lit_frames[p] == n;
      truth.ui_mask.mask[p] = (is_overlay[p] || (in_band && steady_trace)) ? 1 : 0;
    }
  }
  if (patch.w > 0) {
    truth.doppler_flag = true;
    truth.doppler_hue = spec.doppler->hue;
    truth.doppler_fraction = static_cast<double>(patch.w) * patch.h / (static_cast<double>(W) * H);
  }

  Rng flicker = make_rng(seed, {0xd099u});
  for (std::size_t t = 0; t < n; ++t) {
    const auto doppler_value = static_cast<std::uint8_t>(150 + 70 * static_cast<int>(t % 2) + (flicker() >> 59));
    auto frame = out.volume.frame(t);
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * W + x;
        std::array<std::uint8_t, 3> rgb{};
        if (patch.contains(y, x)) {
          rgb = spec.doppler->hue == DopplerHue::Red ? std::array<std::uint8_t, 3>{doppler_value, 0, 0}
                                                     : std::array<std::uint8_t, 3>{0, 0, doppler_value};
        } else if (band.rows > 0 && y >= band.top) {
          if (lit[gidx(t, y, x)]) rgb = {0, 200, 0};
        } else if (is_overlay[p]) {
          rgb.fill(overlay[p]);
        } else {
          rgb.fill(gray[gidx(t, y, x)]);
        }
        std::uint8_t* px = frame.data() + p * C;
        if (C == 1) {
          // Gray videos draw the trace at the same brightness as the color one.
          px[0] = (band.rows > 0 && y >= band.top) ? (lit[gidx(t, y, x)] ? 200 : 0) : rgb[0];
        } else {
          std::copy(rgb.begin(), rgb.end(), px);
        }
      }
    }
  }
  return out;
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir, const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> mask(truth.ui_mask.mask.size());
  std::transform(truth.ui_mask.mask.begin(), truth.ui_mask.mask.end(), mask.begin(),
                 [](std::uint8_t m) { return static_cast<std::uint8_t>(m ? 255 : 0); });
  png::write(dir / (stem + ".mask.png"), truth.ui_mask.width, truth.ui_mask.height, 1, mask);

  nlohmann::ordered_json j;
  j["doppler_flag"] = truth.doppler_flag;
  j["doppler_fraction"] = truth.doppler_fraction;
  j["doppler_hue"] = truth.doppler_hue == DopplerHue::Red ? "red" : "blue";
  j["texture_class"] = truth.texture_class;
  j["ui_mask_pixels"] = truth.ui_mask.count();
  j["seed"] = truth.seed;
  std::ofstream out(dir / (stem + ".truth.json"), std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorKind::IoError, "cannot write ground truth for " + stem);
}

// --- cohorts ---------------------------------------------------------------------

SynthCohortSpec SynthCohortSpec::defaults() {
  SynthCohortSpec s;
  // Baseline (dx-/lowVD) rate and multipliers for dx+/highVD, dx-/highVD, dx+/lowVD.
  const auto rates = [](double base, double pos_high, double neg_high, double pos_low) {
    return GroupRates{base * pos_high, base * neg_high, base * pos_low, base};
  };
  const auto idx = [](Condition c) { return static_cast<std::size_t>(c); };
  s.conditions[idx(Condition::AtrialFibrillation)] = rates(0.02, 3.0, 2.5, 1.5);
  s.conditions[idx(Condition::CongestiveHeartFailure)] = rates(0.01, 3.0, 2.5, 1.5);
  s.conditions[idx(Condition::PastMi)] = rates(0.015, 3.0, 2.5, 1.5);
  s.conditions[idx(Condition::PastStroke)] = rates(0.01, 3.0, 2.5, 1.5);
  s.conditions[idx(Condition::CoronaryArteryDisease)] = rates(0.03, 3.0, 2.5, 1.5);
  s.conditions[idx(Condition::Cvd)] = rates(0.05, 2.5, 2.2, 1.4);
  s.conditions[idx(Condition::Dyslipidemia)] = rates(0.25, 1.6, 1.4, 1.3);
  s.conditions[idx(Condition::DiabetesT2)] = rates(0.08, 4.9, 4.9, 2.0);
  s.conditions[idx(Condition::FamilyHistoryMiStroke)] = rates(0.2, 1.3, 1.2, 1.1);
  s.antihypertensive = {0.55, 0.05, 0.45, 0.03};

  const auto events = [](double low) { return GroupRates{4.0 * low, 4.0 * low, low, low}; };
  s.events[static_cast<std::size_t>(Event::Stroke5y)] = events(0.03);
  s.events[static_cast<std::size_t>(Event::Mi5y)] = events(0.03);
  s.events[static_cast<std::size_t>(Event::CardiacDeath5y)] = events(0.02);
  s.events[static_cast<std::size_t>(Event::CardiacDeath10y)] = events(0.05);

  const auto labs = [](double low, double high, double sd) {
    return std::array<LogNormal, kGroupCount>{LogNormal{std::log(high), sd}, LogNormal{std::log(high), sd},
                                              LogNormal{std::log(low), sd}, LogNormal{std::log(low), sd}};
  };
  s.troponin_i = labs(3.0, 4.5, 0.6);
  s.nt_probnp = labs(60.0, 110.0, 0.9);
  s.score2 = labs(3.5, 6.0, 0.6);
  s.plaque_mean = {1.5, 1.5, 0.9, 0.6};

  s.video.overlay = OverlaySpec{16, 20, 30};
  return s;
}

void SynthCohortSpec::validate() const {
  if (n_individuals < 1) invalid("cohort needs at least one individual");
  if (videos_per_individual < 1) invalid("each individual needs at least one video");
  for (double p : {hypertension_prevalence, discordance, female_fraction, lab_missing, rgb_fraction}) {
    if (!is_probability(p)) invalid("probabilities must lie in [0, 1]");
  }
  const auto check = [](const GroupRates& r) {
    for (double p : r) {
      if (!is_probability(p)) invalid("group rates must lie in [0, 1]");
    }
  };
  for (const auto& r : conditions) check(r);
  for (const auto& r : events) check(r);
  check(antihypertensive);
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    if (events[static_cast<std::size_t>(Event::CardiacDeath5y)][g] >
        events[static_cast<std::size_t>(Event::CardiacDeath10y)][g]) {
      invalid("5-year cardiac death rate exceeds the 10-year rate");
    }
    if (!(plaque_mean[g] >= 0.0)) invalid("plaque mean must be non-negative");
    for (const auto* lab : {&troponin_i, &nt_probnp, &score2}) {
      if (!((*lab)[g].log_sd >= 0.0) || !std::isfinite((*lab)[g].log_mean)) invalid("bad lognormal parameters");
    }
  }
  if (!(age_sd >= 0.0) || !(age_min > 0.0) || !(age_max >= age_min)) invalid("bad age distribution");
  SynthVideoSpec probe = video;
  probe.texture_class = 0;
  probe.doppler.reset();
  probe.validate();
}

SynthCohort gen_cohort(const SynthCohortSpec& spec, std::uint64_t seed) {
  spec.validate();
  constexpr std::array<Site, 6> kSites{Site::CcaL, Site::CcaR, Site::IcaL, Site::IcaR, Site::EcaL, Site::EcaR};

  SynthCohort out;
  out.records.reserve(spec.n_individuals);
  for (std::size_t i = 0; i < spec.n_individuals; ++i) {
    Rng rng = make_rng(seed, {0xc0407u, i});
    const auto coin = [&](double p) { return uniform01(rng) < p; };
    const auto lognormal = [&](const LogNormal& d) {
      return std::exp(std::normal_distribution<double>(d.log_mean, d.log_sd)(rng));
    };

    IndividualRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "S%05zu", i + 1);
    r.individual_id = id;
    r.sex = coin(spec.female_fraction) ? Sex::Female : Sex::Male;
    const double age = std::normal_distribution<double>(spec.age_mean, spec.age_sd)(rng);
    r.age = std::round(std::clamp(age, spec.age_min, spec.age_max) * 10.0) / 10.0;
    r.hypertension_dx = coin(spec.hypertension_prevalence);
    const bool discordant = coin(spec.discordance);
    const int texture = (r.hypertension_dx != discordant) ? 1 : 0;
    const auto g = static_cast<std::size_t>(group_of(r.hypertension_dx, texture ? VdLabel::High : VdLabel::Low));

    for (std::size_t c = 0; c < kConditionCount; ++c) r.conditions[c] = coin(spec.conditions[c][g]);
    r.antihypertensive_use = coin(spec.antihypertensive[g]);

    const auto lab = [&](const LogNormal& d) -> std::optional<double> {
      const bool missing = coin(spec.lab_missing);
      const double v = std::round(lognormal(d) * 100.0) / 100.0;
      return missing ? std::nullopt : std::optional<double>(v);
    };
    r.troponin_i = lab(spec.troponin_i[g]);
    r.nt_probnp = lab(spec.nt_probnp[g]);
    const auto score = lab(spec.score2[g]);
    const bool score2_eligible =
        r.age >= 40.0 && r.age <= 69.0 && !r.has(Condition::Cvd) && !r.has(Condition::DiabetesT2);
    if (score2_eligible) r.score2 = score;
    r.plaque_count = std::poisson_distribution<int>(spec.plaque_mean[g])(rng);

    // Cardiac death within 5 years implies cardiac death within 10 years; both
    // marginal rates stay as planted.
    const auto ev = [&](Event e) { return spec.events[static_cast<std::size_t>(e)][g]; };
    r.events[static_cast<std::size_t>(Event::Stroke5y)] = coin(ev(Event::Stroke5y));
    r.events[static_cast<std::size_t>(Event::Mi5y)] = coin(ev(Event::Mi5y));
    const bool cd10 = coin(ev(Event::CardiacDeath10y));
    const double cd5_given_cd10 = ev(Event::CardiacDeath10y) > 0.0 ? ev(Event::CardiacDeath5y) / ev(Event::CardiacDeath10y) : 0.0;
    const bool cd5 = coin(cd5_given_cd10) && cd10;
    r.events[static_cast<std::size_t>(Event::CardiacDeath10y)] = cd10;
    r.events[static_cast<std::size_t>(Event::CardiacDeath5y)] = cd5;

    for (std::size_t v = 0; v < spec.videos_per_individual; ++v) {
      SynthVideoPlan plan;
      plan.spec = spec.video;
      plan.spec.video_id = r.individual_id + "_v" + std::to_string(v + 1);
      plan.spec.individual_id = r.individual_id;
      plan.spec.site = kSites[v % kSites.size()];
      plan.spec.texture_class = texture;
      plan.spec.color = coin(spec.rgb_fraction) ? ColorMode::Rgb8 : ColorMode::Gray8;
      plan.spec.doppler.reset();
      plan.seed = derive_seed(seed, {0x71du, i, v});
      plan.discordant = discordant;
      out.videos.push_back(std::move(plan));
    }
    out.records.push_back(std::move(r));
    out.texture_class.push_back(texture);
    out.discordant.push_back(discordant);
  }
  return out;
}

}  // namespace vdscan::synth
