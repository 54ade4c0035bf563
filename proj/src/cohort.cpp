#include "vdscan/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "vdscan/error.hpp"
#include "vdscan/kv.hpp"
#include "vdscan/rng.hpp"

namespace vdscan {

namespace {

constexpr std::array<std::string_view, kConditionCount> kConditionNames{
    "atrial_fibrillation", "congestive_heart_failure", "past_mi",
    "past_stroke",         "coronary_artery_disease",  "cvd",
    "dyslipidemia",        "diabetes_t2",              "family_history_mi_stroke",
};
constexpr std::array<std::string_view, kEventCount> kEventNames{"stroke_5y", "mi_5y", "cardiac_death_5y",
                                                                "cardiac_death_10y"};
constexpr std::array<std::string_view, kMeasureCount> kMeasureNames{"age", "troponin_i", "nt_probnp", "plaque_count",
                                                                    "score2"};
constexpr std::array<std::string_view, kGroupCount> kGroupNames{"dx+/highVD", "dx-/highVD", "dx+/lowVD",
                                                                "dx-/lowVD"};

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

}  // namespace

std::string_view column_name(Condition c) { return kConditionNames[static_cast<std::size_t>(c)]; }
std::string_view column_name(Event e) { return kEventNames[static_cast<std::size_t>(e)]; }
std::string_view column_name(Measure m) { return kMeasureNames[static_cast<std::size_t>(m)]; }
std::string_view to_string(CohortGroup g) { return kGroupNames[static_cast<std::size_t>(g)]; }

std::optional<double> IndividualRecord::measure(Measure m) const {
  switch (m) {
    case Measure::Age: return age;
    case Measure::TroponinI: return troponin_i;
    case Measure::NtProBnp: return nt_probnp;
    case Measure::PlaqueCount: return static_cast<double>(plaque_count);
    case Measure::Score2: return score2;
  }
  return std::nullopt;
}

// --- table IO ---------------------------------------------------------------------

namespace {

std::vector<std::string> header_columns() {
  std::vector<std::string> cols{"individual_id", "age", "sex", "hypertension_dx", "antihypertensive_use"};
  for (auto n : kConditionNames) cols.emplace_back(n);
  for (auto n : {"troponin_i", "nt_probnp", "plaque_count", "score2"}) cols.emplace_back(n);
  for (auto n : kEventNames) cols.emplace_back(n);
  return cols;
}

class RowReader {
 public:
  RowReader(const std::vector<std::string>& header, const std::filesystem::path& path) : path_(path) {
    for (std::size_t i = 0; i < header.size(); ++i) index_[kv::trim(header[i])] = i;
    for (const auto& col : header_columns()) {
      if (!index_.count(col)) malformed(0, "missing column '" + col + "'");
    }
  }

  void bind(std::vector<std::string> cells, std::size_t line) {
    cells_ = std::move(cells);
    line_ = line;
    if (cells_.size() != index_.size()) malformed(line_, "expected " + std::to_string(index_.size()) + " cells");
  }

  std::string cell(std::string_view col) const { return kv::trim(cells_[index_.at(std::string(col))]); }

  std::optional<double> optional_number(std::string_view col) const {
    const std::string text = cell(col);
    if (text.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
      malformed(line_, std::string(col) + ": '" + text + "' is not a number");
    }
    return v;
  }

  double number(std::string_view col) const {
    const auto v = optional_number(col);
    if (!v) malformed(line_, std::string(col) + " is required");
    return *v;
  }

  bool flag(std::string_view col) const {
    const std::string text = cell(col);
    if (text == "1" || text == "true" || text == "TRUE" || text == "yes") return true;
    if (text == "0" || text == "false" || text == "FALSE" || text == "no") return false;
    malformed(line_, std::string(col) + ": '" + text + "' is not a boolean");
  }

  [[noreturn]] void malformed(std::size_t line, const std::string& why) const {
    throw Error(ErrorKind::MalformedCohortTable, path_.string() + ":" + std::to_string(line) + ": " + why);
  }

 private:
  std::filesystem::path path_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> cells_;
  std::size_t line_ = 0;
};

}  // namespace

std::vector<IndividualRecord> read_cohort_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedCohortTable, path.string() + ": empty table");
  RowReader reader(kv::split(kv::trim(line), ','), path);

  std::vector<IndividualRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (kv::trim(line).empty()) continue;
    reader.bind(kv::split(kv::trim(line), ','), line_no);
    IndividualRecord r;
    r.individual_id = reader.cell("individual_id");
    if (r.individual_id.empty()) reader.malformed(line_no, "empty individual_id");
    if (!seen.insert(r.individual_id).second) reader.malformed(line_no, "duplicate id " + r.individual_id);
    r.age = reader.number("age");
    if (!(r.age > 0.0)) reader.malformed(line_no, "age must be positive");
    const std::string sex = reader.cell("sex");
    if (sex == "F" || sex == "female") {
      r.sex = Sex::Female;
    } else if (sex == "M" || sex == "male") {
      r.sex = Sex::Male;
    } else {
      reader.malformed(line_no, "sex must be F or M");
    }
    r.hypertension_dx = reader.flag("hypertension_dx");
    r.antihypertensive_use = reader.flag("antihypertensive_use");
    for (std::size_t i = 0; i < kConditionCount; ++i) r.conditions[i] = reader.flag(kConditionNames[i]);
    r.troponin_i = reader.optional_number("troponin_i");
    r.nt_probnp = reader.optional_number("nt_probnp");
    const double plaques = reader.number("plaque_count");
    if (plaques < 0 || plaques != std::floor(plaques)) reader.malformed(line_no, "plaque_count must be a count");
    r.plaque_count = static_cast<int>(plaques);
    r.score2 = reader.optional_number("score2");
    for (std::size_t i = 0; i < kEventCount; ++i) r.events[i] = reader.flag(kEventNames[i]);
    out.push_back(std::move(r));
  }
  return out;
}

void write_cohort_table(std::span<const IndividualRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  const auto cols = header_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
  for (const auto& r : records) {
    out << r.individual_id << ',' << format_double(r.age) << ',' << (r.sex == Sex::Female ? "F" : "M") << ','
        << r.hypertension_dx << ',' << r.antihypertensive_use;
    for (bool c : r.conditions) out << ',' << c;
    out << ',' << opt(r.troponin_i) << ',' << opt(r.nt_probnp) << ',' << r.plaque_count << ',' << opt(r.score2);
    for (bool e : r.events) out << ',' << e;
    out << "\n";
  }
  if (!out) throw Error(ErrorKind::IoError, "short write to " + path.string());
}

// --- split --------------------------------------------------------------------------

CohortSplit split_cohort(std::span<const std::string> ids, double val_fraction, std::uint64_t seed) {
  if (ids.empty()) throw Error(ErrorKind::EmptyCohort, "cannot split an empty cohort");
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidSpec, "validation fraction must lie in [0, 1]");
  }
  std::vector<std::string> shuffled(ids.begin(), ids.end());
  std::sort(shuffled.begin(), shuffled.end());
  if (std::adjacent_find(shuffled.begin(), shuffled.end()) != shuffled.end()) {
    throw Error(ErrorKind::InvalidSpec, "individual ids must be unique");
  }
  Rng rng = make_rng(seed, {0x5b117u});
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(shuffled.size())));

  CohortSplit split;
  split.validation.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

// --- stratification -----------------------------------------------------------------

CohortGroup group_of(bool hypertension_dx, VdLabel vd) {
  if (vd == VdLabel::High) return hypertension_dx ? CohortGroup::DxPosHighVd : CohortGroup::DxNegHighVd;
  return hypertension_dx ? CohortGroup::DxPosLowVd : CohortGroup::DxNegLowVd;
}

namespace {

PrevalenceSummary prevalence(std::size_t count, std::size_t n) {
  return {count, n, n == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(n), std::nullopt};
}

void attach_ratio(PrevalenceSummary& s, const PrevalenceSummary& baseline) {
  if (s.n == 0 || baseline.n == 0) return;
  s.ratio = prevalence_ratio(s.prevalence, baseline.prevalence);
}

}  // namespace

StratReport stratify(std::span<const IndividualRecord> records, std::span<const VdLabel> vd) {
  if (records.size() != vd.size()) {
    throw Error(ErrorKind::MissingVdLabel, "every individual needs exactly one visual-damage label");
  }
  std::array<std::vector<const IndividualRecord*>, kGroupCount> members;
  for (std::size_t i = 0; i < records.size(); ++i) {
    members[static_cast<std::size_t>(group_of(records[i].hypertension_dx, vd[i]))].push_back(&records[i]);
  }

  StratReport report;
  report.cohort_size = records.size();
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    GroupSummary& s = report.groups[g];
    const auto& group = members[g];
    s.group = static_cast<CohortGroup>(g);
    s.n = group.size();
    for (std::size_t c = 0; c < kConditionCount; ++c) {
      const auto count = std::count_if(group.begin(), group.end(), [&](auto* r) { return r->conditions[c]; });
      s.conditions[c] = prevalence(static_cast<std::size_t>(count), s.n);
    }
    for (std::size_t e = 0; e < kEventCount; ++e) {
      const auto count = std::count_if(group.begin(), group.end(), [&](auto* r) { return r->events[e]; });
      s.events[e] = prevalence(static_cast<std::size_t>(count), s.n);
    }
    s.antihypertensive = prevalence(
        static_cast<std::size_t>(std::count_if(group.begin(), group.end(), [](auto* r) { return r->antihypertensive_use; })),
        s.n);
    for (std::size_t m = 0; m < kMeasureCount; ++m) {
      std::vector<double> values;
      for (const auto* r : group) {
        if (const auto v = r->measure(static_cast<Measure>(m))) values.push_back(*v);
      }
      MeasureSummary& ms = s.measures[m];
      ms.n = values.size();
      if (!values.empty()) {
        ms.quartiles = quartiles(values);
        double sum = 0.0;
        for (double v : values) sum += v;
        ms.mean = sum / static_cast<double>(values.size());
      }
    }
  }

  const GroupSummary& base = report.group(kBaselineGroup);
  for (auto& s : report.groups) {
    for (std::size_t c = 0; c < kConditionCount; ++c) attach_ratio(s.conditions[c], base.conditions[c]);
    for (std::size_t e = 0; e < kEventCount; ++e) attach_ratio(s.events[e], base.events[e]);
    attach_ratio(s.antihypertensive, base.antihypertensive);
    for (std::size_t m = 0; m < kMeasureCount; ++m) {
      MeasureSummary& ms = s.measures[m];
      const MeasureSummary& bs = base.measures[m];
      if (ms.quartiles && bs.quartiles && bs.quartiles->median > 0.0) {
        ms.median_ratio = ms.quartiles->median / bs.quartiles->median;
      }
      if (ms.mean && bs.mean && *bs.mean > 0.0) ms.mean_ratio = *ms.mean / *bs.mean;
    }
  }
  return report;
}

StratReport stratify(std::span<const IndividualRecord> records, const std::map<std::string, VdLabel>& vd) {
  std::vector<VdLabel> labels;
  labels.reserve(records.size());
  for (const auto& r : records) {
    const auto it = vd.find(r.individual_id);
    if (it == vd.end()) throw Error(ErrorKind::MissingVdLabel, "no visual-damage label for " + r.individual_id);
    labels.push_back(it->second);
  }
  return stratify(records, labels);
}

// --- events -------------------------------------------------------------------------

std::size_t EventTable::total(std::optional<bool> antihypertensive) const {
  std::size_t sum = 0;
  for (const auto& by_group : counts) {
    for (const auto& by_med : by_group) {
      for (std::size_t med = 0; med < 2; ++med) {
        if (!antihypertensive || *antihypertensive == (med == 1)) sum += by_med[med];
      }
    }
  }
  return sum;
}

std::size_t EventTable::high_vd_total(std::optional<bool> antihypertensive) const {
  std::size_t sum = 0;
  for (const auto& by_group : counts) {
    for (auto g : {CohortGroup::DxPosHighVd, CohortGroup::DxNegHighVd}) {
      for (std::size_t med = 0; med < 2; ++med) {
        if (!antihypertensive || *antihypertensive == (med == 1)) sum += by_group[static_cast<std::size_t>(g)][med];
      }
    }
  }
  return sum;
}

std::optional<double> EventTable::high_vd_share(std::optional<bool> antihypertensive) const {
  const std::size_t all = total(antihypertensive);
  if (all == 0) return std::nullopt;
  return static_cast<double>(high_vd_total(antihypertensive)) / static_cast<double>(all);
}

EventTable event_table(std::span<const IndividualRecord> records, std::span<const VdLabel> vd) {
  if (records.size() != vd.size()) {
    throw Error(ErrorKind::MissingVdLabel, "every individual needs exactly one visual-damage label");
  }
  EventTable table;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto g = static_cast<std::size_t>(group_of(records[i].hypertension_dx, vd[i]));
    const std::size_t med = records[i].antihypertensive_use ? 1 : 0;
    for (std::size_t e = 0; e < kEventCount; ++e) {
      if (records[i].events[e]) ++table.counts[e][g][med];
    }
  }
  return table;
}

// --- alignment ----------------------------------------------------------------------

AlignmentCurves alignment_by_age(std::span<const double> ages, std::span<const bool> aligned,
                                 std::optional<double> bandwidth) {
  if (ages.empty()) throw Error(ErrorKind::EmptyInput, "alignment curves need at least one individual");
  if (ages.size() != aligned.size()) throw Error(ErrorKind::LengthMismatch, "one alignment flag per age");

  AlignmentCurves out;
  out.bandwidth = bandwidth.value_or(silverman_bandwidth(ages));
  if (!(out.bandwidth > 0.0)) throw Error(ErrorKind::InvalidSpec, "bandwidth must be positive");
  out.n_total = ages.size();

  std::vector<double> yes;
  std::vector<double> no;
  for (std::size_t i = 0; i < ages.size(); ++i) (aligned[i] ? yes : no).push_back(ages[i]);
  out.n_aligned = yes.size();

  const auto [mn, mx] = std::minmax_element(ages.begin(), ages.end());
  const double lo = *mn - 3.0 * out.bandwidth;
  const double hi = *mx + 3.0 * out.bandwidth;
  out.grid.resize(kKdeGridPoints);
  for (std::size_t i = 0; i < kKdeGridPoints; ++i) {
    out.grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kKdeGridPoints - 1);
  }

  const std::vector<double> raw_yes = gaussian_kde(yes, out.grid, out.bandwidth);
  const std::vector<double> raw_no = gaussian_kde(no, out.grid, out.bandwidth);

  // Truncating the Gaussian tails at +-3h loses ~0.3% of the mass; each
  // reported density is renormalized on the grid.
  const auto renormalized = [&](const std::vector<double>& raw) {
    const double area = trapezoid(out.grid, raw);
    std::vector<double> d(raw.size(), 0.0);
    if (area > 0.0) {
      for (std::size_t i = 0; i < raw.size(); ++i) d[i] = raw[i] / area;
    }
    return d;
  };
  out.aligned_density = renormalized(raw_yes);
  out.non_aligned_density = renormalized(raw_no);

  const double n_yes = static_cast<double>(yes.size());
  const double n_no = static_cast<double>(no.size());
  out.aligned_proportion.resize(kKdeGridPoints);
  for (std::size_t i = 0; i < kKdeGridPoints; ++i) {
    const double a = raw_yes[i] * n_yes;
    const double total = a + raw_no[i] * n_no;
    out.aligned_proportion[i] = total > 0.0 ? std::clamp(a / total, 0.0, 1.0) : n_yes / (n_yes + n_no);
  }
  return out;
}

Demographics summarize_demographics(std::span<const IndividualRecord> records) {
  if (records.empty()) throw Error(ErrorKind::EmptyCohort, "demographics of an empty cohort");
  Demographics d;
  d.n = records.size();
  double sum = 0.0;
  std::size_t female = 0, female_dx = 0, male_dx = 0;
  for (const auto& r : records) {
    sum += r.age;
    if (r.sex == Sex::Female) {
      ++female;
      female_dx += r.hypertension_dx ? 1 : 0;
    } else {
      male_dx += r.hypertension_dx ? 1 : 0;
    }
  }
  const double n = static_cast<double>(d.n);
  d.mean_age = sum / n;
  double ss = 0.0;
  for (const auto& r : records) ss += (r.age - d.mean_age) * (r.age - d.mean_age);
  d.sd_age = d.n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  d.female_fraction = static_cast<double>(female) / n;
  if (female > 0) d.hypertension_rate_female = static_cast<double>(female_dx) / static_cast<double>(female);
  if (d.n > female) d.hypertension_rate_male = static_cast<double>(male_dx) / static_cast<double>(d.n - female);
  return d;
}

}  // namespace vdscan
