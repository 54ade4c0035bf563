#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <set>

#include "support.hpp"
#include "vdscan/cohort.hpp"
#include "vdscan/error.hpp"

using namespace vdscan;
using vdscan::testing::TempDir;

namespace {

std::vector<IndividualRecord> random_records(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<IndividualRecord> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = out[i];
    char id[16];
    std::snprintf(id, sizeof(id), "R%04zu", i);
    r.individual_id = id;
    r.age = 35.0 + std::floor(uniform01(rng) * 40.0);
    r.sex = rng() & 1 ? Sex::Male : Sex::Female;
    r.hypertension_dx = rng() & 1;
    r.antihypertensive_use = rng() % 3 == 0;
    for (auto&& c : r.conditions) c = uniform01(rng) < 0.2;
    for (auto&& e : r.events) e = uniform01(rng) < 0.1;
    if (rng() % 10) r.troponin_i = 1.0 + uniform01(rng) * 8.0;
    if (rng() % 10) r.nt_probnp = 20.0 + uniform01(rng) * 200.0;
    r.plaque_count = static_cast<int>(rng() % 4);
    if (rng() % 2) r.score2 = 0.25 * static_cast<double>(rng() % 40);
  }
  return out;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

std::string csv_with(const std::string& header, const std::string& row) { return header + "\n" + row + "\n"; }

}  // namespace

TEST_CASE("cohort table round trip") {
  TempDir dir("cohort_rt");
  const auto records = random_records(40, 4);
  write_cohort_table(records, dir / "c.csv");
  CHECK(read_cohort_table(dir / "c.csv") == records);
}

TEST_CASE("malformed cohort tables") {
  TempDir dir("cohort_bad");
  const auto records = random_records(2, 4);
  write_cohort_table(records, dir / "good.csv");
  const std::string good = testing::slurp(dir / "good.csv");
  const std::string header = good.substr(0, good.find('\n'));
  const std::string row = good.substr(good.find('\n') + 1, good.find('\n', good.find('\n') + 1) - good.find('\n') - 1);

  auto expect_malformed = [&](const std::string& text) {
    testing::spit(dir / "bad.csv", text);
    CHECK(kind_of([&] { read_cohort_table(dir / "bad.csv"); }) == ErrorKind::MalformedCohortTable);
  };
  expect_malformed("");
  expect_malformed(csv_with(header, row + ",extra"));
  expect_malformed(csv_with(header.substr(header.find(',') + 1), row.substr(row.find(',') + 1)));  // no id column
  expect_malformed(header + "\n" + row + "\n" + row + "\n");                                       // duplicate id

  std::string bad_bool = good;
  const auto pos = header.find("hypertension_dx");
  REQUIRE(pos != std::string::npos);
  // Locate the hypertension_dx cell of the first row and corrupt it.
  std::size_t col = static_cast<std::size_t>(std::count(header.begin(), header.begin() + static_cast<long>(pos), ','));
  std::string cells = row;
  std::size_t start = 0;
  for (std::size_t c = 0; c < col; ++c) start = cells.find(',', start) + 1;
  const std::size_t end = cells.find(',', start);
  cells.replace(start, end - start, "maybe");
  expect_malformed(csv_with(header, cells));

  CHECK(kind_of([&] { read_cohort_table(dir / "none.csv"); }) == ErrorKind::UnreadableFile);
}

TEST_CASE("split of 14245 individuals") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 14245; ++i) ids.push_back("id" + std::to_string(i));
  const CohortSplit s = split_cohort(ids, 0.2, 7);
  CHECK(s.validation.size() == 2849);
  CHECK(s.train.size() == 11396);
  std::set<std::string> all(s.train.begin(), s.train.end());
  for (const auto& v : s.validation) CHECK(all.insert(v).second);
  CHECK(all.size() == ids.size());
  CHECK(std::is_sorted(s.validation.begin(), s.validation.end()));

  // Input order does not matter; the seed does.
  std::vector<std::string> reversed(ids.rbegin(), ids.rend());
  CHECK(split_cohort(reversed, 0.2, 7).validation == s.validation);
  CHECK(split_cohort(ids, 0.2, 8).validation != s.validation);
}

TEST_CASE("split edge cases") {
  const std::vector<std::string> one{"a"};
  CHECK(split_cohort(one, 0.2, 1).validation.empty());
  CHECK(split_cohort(one, 1.0, 1).train.empty());
  const std::vector<std::string> none;
  CHECK(kind_of([&] { split_cohort(none, 0.2, 1); }) == ErrorKind::EmptyCohort);
  const std::vector<std::string> dup{"a", "b", "a"};
  CHECK(kind_of([&] { split_cohort(dup, 0.2, 1); }) == ErrorKind::InvalidSpec);
  CHECK(kind_of([&] { split_cohort(one, 1.5, 1); }) == ErrorKind::InvalidSpec);
}

TEST_CASE("stratification against direct counts") {
  const auto records = random_records(300, 11);
  Rng rng(2);
  std::vector<VdLabel> vd;
  for (std::size_t i = 0; i < records.size(); ++i) vd.push_back(rng() & 1 ? VdLabel::High : VdLabel::Low);
  const StratReport rep = stratify(records, vd);
  CHECK(rep.cohort_size == 300);

  std::size_t total = 0;
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    const GroupSummary& s = rep.groups[g];
    std::vector<const IndividualRecord*> members;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (static_cast<std::size_t>(group_of(records[i].hypertension_dx, vd[i])) == g) members.push_back(&records[i]);
    }
    CHECK(s.n == members.size());
    total += s.n;
    for (std::size_t c = 0; c < kConditionCount; ++c) {
      std::size_t k = 0;
      for (auto* r : members) k += r->conditions[c];
      CHECK(s.conditions[c].count == k);
      CHECK(s.conditions[c].prevalence == doctest::Approx(static_cast<double>(k) / members.size()));
      const auto& base = rep.group(kBaselineGroup).conditions[c];
      if (base.prevalence > 0) {
        CHECK(s.conditions[c].ratio.value() == doctest::Approx(s.conditions[c].prevalence / base.prevalence));
      } else {
        CHECK_FALSE(s.conditions[c].ratio.has_value());
      }
    }
    std::vector<double> trop;
    for (auto* r : members)
      if (r->troponin_i) trop.push_back(*r->troponin_i);
    const auto& m = s.measures[static_cast<std::size_t>(Measure::TroponinI)];
    CHECK(m.n == trop.size());
    if (!trop.empty()) CHECK(m.quartiles.value() == quartiles(trop));
  }
  CHECK(total == 300);
}

TEST_CASE("ratios are Undefined against a zero baseline") {
  auto records = random_records(50, 3);
  std::vector<VdLabel> vd(records.size(), VdLabel::Low);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].hypertension_dx) vd[i] = VdLabel::High;
    else records[i].conditions[static_cast<std::size_t>(Condition::DiabetesT2)] = false;
  }
  const StratReport rep = stratify(records, vd);
  const auto diabetes = static_cast<std::size_t>(Condition::DiabetesT2);
  CHECK(rep.group(CohortGroup::DxNegLowVd).conditions[diabetes].prevalence == 0.0);
  CHECK_FALSE(rep.group(CohortGroup::DxPosHighVd).conditions[diabetes].ratio.has_value());
}

TEST_CASE("perfect alignment leaves the off-diagonal groups empty") {
  const auto records = random_records(80, 5);
  std::vector<VdLabel> vd;
  for (const auto& r : records) vd.push_back(r.hypertension_dx ? VdLabel::High : VdLabel::Low);
  const StratReport rep = stratify(records, vd);
  CHECK(rep.group(CohortGroup::DxNegHighVd).n == 0);
  CHECK(rep.group(CohortGroup::DxPosLowVd).n == 0);
  CHECK_FALSE(rep.group(CohortGroup::DxNegHighVd).conditions[0].ratio.has_value());
}

TEST_CASE("stratify by id needs every label") {
  const auto records = random_records(3, 1);
  std::map<std::string, VdLabel> vd{{records[0].individual_id, VdLabel::High},
                                    {records[1].individual_id, VdLabel::Low}};
  CHECK(kind_of([&] { stratify(records, vd); }) == ErrorKind::MissingVdLabel);
  vd[records[2].individual_id] = VdLabel::Low;
  CHECK(stratify(records, vd).cohort_size == 3);
}

TEST_CASE("event table against a triple loop") {
  const auto records = random_records(200, 9);
  Rng rng(1);
  std::vector<VdLabel> vd;
  for (std::size_t i = 0; i < records.size(); ++i) vd.push_back(rng() % 3 ? VdLabel::High : VdLabel::Low);
  const EventTable t = event_table(records, vd);
  std::size_t all = 0, high = 0;
  for (std::size_t e = 0; e < kEventCount; ++e) {
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      for (int med = 0; med < 2; ++med) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
          k += records[i].events[e] && static_cast<std::size_t>(group_of(records[i].hypertension_dx, vd[i])) == g &&
               records[i].antihypertensive_use == (med == 1);
        }
        CHECK(t.counts[e][g][static_cast<std::size_t>(med)] == k);
        all += k;
        if (g < 2) high += k;
      }
    }
  }
  CHECK(t.total() == all);
  CHECK(t.high_vd_total() == high);
  CHECK(t.high_vd_share().value() == doctest::Approx(static_cast<double>(high) / all));
  CHECK(t.total(true) + t.total(false) == all);
  CHECK_FALSE(EventTable{}.high_vd_share().has_value());
}

TEST_CASE("alignment curves") {
  std::vector<double> ages;
  std::unique_ptr<bool[]> aligned(new bool[60]);
  Rng rng(12);
  for (std::size_t i = 0; i < 60; ++i) {
    ages.push_back(35.0 + uniform01(rng) * 39.0);
    aligned[i] = ages.back() > 50.0 || i % 4 == 0;
  }
  const AlignmentCurves c = alignment_by_age(ages, std::span<const bool>(aligned.get(), 60));
  REQUIRE(c.grid.size() == kKdeGridPoints);
  CHECK(c.bandwidth == silverman_bandwidth(ages));
  CHECK(c.grid.front() == doctest::Approx(*std::min_element(ages.begin(), ages.end()) - 3 * c.bandwidth));
  CHECK(c.grid.back() == doctest::Approx(*std::max_element(ages.begin(), ages.end()) + 3 * c.bandwidth));
  CHECK(trapezoid(c.grid, c.aligned_density) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(trapezoid(c.grid, c.non_aligned_density) == doctest::Approx(1.0).epsilon(1e-3));
  for (double p : c.aligned_proportion) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  // Old ages are all aligned, so the proportion rises towards the right.
  CHECK(c.aligned_proportion.back() > c.aligned_proportion.front());

  std::unique_ptr<bool[]> all(new bool[60]);
  std::fill(all.get(), all.get() + 60, true);
  const AlignmentCurves full = alignment_by_age(ages, std::span<const bool>(all.get(), 60));
  CHECK(full.n_aligned == 60);
  for (double p : full.aligned_proportion) CHECK(p == 1.0);
  for (double d : full.non_aligned_density) CHECK(d == 0.0);
}

TEST_CASE("demographics") {
  auto records = random_records(4, 2);
  records[0].age = 40;
  records[1].age = 50;
  records[2].age = 60;
  records[3].age = 70;
  records[0].sex = records[1].sex = Sex::Female;
  records[2].sex = records[3].sex = Sex::Male;
  records[0].hypertension_dx = true;
  records[1].hypertension_dx = false;
  records[2].hypertension_dx = records[3].hypertension_dx = true;
  const Demographics d = summarize_demographics(records);
  CHECK(d.n == 4);
  CHECK(d.mean_age == 55.0);
  CHECK(d.sd_age == doctest::Approx(std::sqrt(500.0 / 3.0)));
  CHECK(d.female_fraction == 0.5);
  CHECK(d.hypertension_rate_female.value() == 0.5);
  CHECK(d.hypertension_rate_male.value() == 1.0);
}
