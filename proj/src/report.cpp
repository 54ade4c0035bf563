#include "vdscan/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vdscan/error.hpp"

namespace vdscan {

using ojson = nlohmann::ordered_json;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt_fixed(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "Undefined"; }

ojson opt_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr std::array<const char*, kGroupCount> kGroupColors{"#b2182b", "#ef8a62", "#67a9cf", "#2166ac"};

}  // namespace

LevelMetrics level_metrics(std::string level, std::span<const int> predicted, std::span<const int> truth) {
  LevelMetrics m;
  m.level = std::move(level);
  m.confusion = confusion(predicted, truth);
  m.accuracy = accuracy(m.confusion);
  try {
    m.balanced_accuracy = balanced_accuracy(m.confusion);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::UndefinedClassRecall) throw;
  }
  return m;
}

std::vector<std::string> unknown_prediction_ids(std::span<const ClipPrediction> clips,
                                                std::span<const IndividualRecord> records) {
  std::set<std::string> known;
  for (const auto& r : records) known.insert(r.individual_id);
  std::set<std::string> unknown;
  for (const auto& c : clips) {
    if (!known.count(c.individual_id)) unknown.insert(c.individual_id);
  }
  return {unknown.begin(), unknown.end()};
}

CohortReport build_cohort_report(std::span<const ClipPrediction> clips, std::span<const IndividualRecord> records,
                                 const std::optional<std::set<std::string>>& metric_subset) {
  if (clips.empty()) throw Error(ErrorKind::EmptyPredictionSet, "the prediction dump holds no clips");
  const auto unknown = unknown_prediction_ids(clips, records);
  if (!unknown.empty()) {
    throw Error(ErrorKind::IdMismatch, std::to_string(unknown.size()) + " predicted individual(s) missing from the "
                                       "cohort table, first: " + unknown.front());
  }
  std::map<std::string, const IndividualRecord*> by_id;
  for (const auto& r : records) by_id[r.individual_id] = &r;
  const auto dx = [&](const std::string& id) { return by_id.at(id)->hypertension_dx ? 1 : 0; };
  const auto in_metrics = [&](const std::string& id) { return !metric_subset || metric_subset->count(id) != 0; };

  const auto videos = vote_all_videos(clips);
  const auto individuals = aggregate_all_individuals(videos);

  CohortReport report;
  {
    std::vector<int> pred, truth;
    for (const auto& c : clips) {
      if (!in_metrics(c.individual_id)) continue;
      pred.push_back(c.label == VdLabel::High ? 1 : 0);
      truth.push_back(dx(c.individual_id));
    }
    if (pred.empty()) throw Error(ErrorKind::EmptyInput, "no predictions fall in the evaluation subset");
    report.metrics.push_back(level_metrics("clip", pred, truth));
    pred.clear();
    truth.clear();
    for (const auto& v : videos) {
      if (!in_metrics(v.individual_id)) continue;
      pred.push_back(v.label == VdLabel::High ? 1 : 0);
      truth.push_back(dx(v.individual_id));
    }
    report.metrics.push_back(level_metrics("video", pred, truth));
    pred.clear();
    truth.clear();
    std::vector<IndividualRecord> evaluated;
    for (const auto& i : individuals) {
      if (!in_metrics(i.individual_id)) continue;
      pred.push_back(i.label == VdLabel::High ? 1 : 0);
      truth.push_back(dx(i.individual_id));
      evaluated.push_back(*by_id.at(i.individual_id));
    }
    report.metrics.push_back(level_metrics("individual", pred, truth));
    report.n_metric_individuals = evaluated.size();
    report.demographics = summarize_demographics(evaluated);
  }

  std::vector<IndividualRecord> predicted;
  std::vector<VdLabel> labels;
  std::vector<double> ages;
  auto aligned = std::make_unique<bool[]>(individuals.size());
  std::set<std::string> seen;
  for (std::size_t k = 0; k < individuals.size(); ++k) {
    const auto& i = individuals[k];
    const IndividualRecord& r = *by_id.at(i.individual_id);
    predicted.push_back(r);
    labels.push_back(i.label);
    ages.push_back(r.age);
    aligned[k] = is_aligned(r.hypertension_dx, i.label);
    seen.insert(i.individual_id);
  }
  for (const auto& r : records) {
    if (!seen.count(r.individual_id)) report.without_predictions.push_back(r.individual_id);
  }
  std::sort(report.without_predictions.begin(), report.without_predictions.end());

  report.strat = stratify(predicted, labels);
  report.events = event_table(predicted, labels);
  report.alignment = alignment_by_age(ages, std::span<const bool>(aligned.get(), individuals.size()));
  return report;
}

// --- serialization ------------------------------------------------------------------

namespace {

ojson prevalence_json(const PrevalenceSummary& s, const PrevalenceSummary& base) {
  ojson j;
  j["count"] = s.count;
  j["n"] = s.n;
  j["prevalence"] = s.prevalence;
  j["ratio"] = opt_json(s.ratio);
  if (s.n > 0 && base.n > 0) {
    const Interval ci = prevalence_ratio_interval(s.count, s.n, base.count, base.n, kReportConfidence);
    j["ratio_ci"] = {ci.lower, ci.upper};
  } else {
    j["ratio_ci"] = nullptr;
  }
  return j;
}

ojson share_json(const EventTable& t, std::optional<bool> med) {
  ojson j;
  const std::size_t total = t.total(med);
  j["events"] = total;
  j["high_vd_events"] = t.high_vd_total(med);
  j["high_vd_share"] = opt_json(t.high_vd_share(med));
  if (total > 0) {
    const Interval ci = wilson_interval(t.high_vd_total(med), total, kReportConfidence);
    j["high_vd_share_ci"] = {ci.lower, ci.upper};
  } else {
    j["high_vd_share_ci"] = nullptr;
  }
  return j;
}

ojson report_json(const CohortReport& r) {
  ojson j;
  j["confidence"] = kReportConfidence;
  j["metrics"] = ojson::array();
  for (const auto& m : r.metrics) {
    ojson mj;
    mj["level"] = m.level;
    mj["tp"] = m.confusion.tp;
    mj["fp"] = m.confusion.fp;
    mj["tn"] = m.confusion.tn;
    mj["fn"] = m.confusion.fn;
    mj["accuracy"] = m.accuracy;
    mj["balanced_accuracy"] = opt_json(m.balanced_accuracy);
    j["metrics"].push_back(mj);
  }
  j["metric_individuals"] = r.n_metric_individuals;
  // Figures reported for the full-scale model, kept for comparison only.
  j["reference_metrics"] = {{"clip_balanced_accuracy", 0.722},
                            {"voted_accuracy", 0.757},
                            {"voted_balanced_accuracy", 0.728}};
  const Demographics& d = r.demographics;
  j["demographics"] = {{"n", d.n},
                       {"mean_age", d.mean_age},
                       {"sd_age", d.sd_age},
                       {"female_fraction", d.female_fraction},
                       {"hypertension_rate_female", opt_json(d.hypertension_rate_female)},
                       {"hypertension_rate_male", opt_json(d.hypertension_rate_male)}};

  j["cohort_size"] = r.strat.cohort_size;
  j["baseline_group"] = std::string(to_string(kBaselineGroup));
  const GroupSummary& base = r.strat.group(kBaselineGroup);
  j["groups"] = ojson::array();
  for (const auto& g : r.strat.groups) {
    ojson gj;
    gj["group"] = std::string(to_string(g.group));
    gj["n"] = g.n;
    ojson conditions;
    for (std::size_t c = 0; c < kConditionCount; ++c) {
      conditions[std::string(column_name(static_cast<Condition>(c)))] = prevalence_json(g.conditions[c], base.conditions[c]);
    }
    gj["conditions"] = conditions;
    gj["antihypertensive_use"] = prevalence_json(g.antihypertensive, base.antihypertensive);
    ojson events;
    for (std::size_t e = 0; e < kEventCount; ++e) {
      events[std::string(column_name(static_cast<Event>(e)))] = prevalence_json(g.events[e], base.events[e]);
    }
    gj["events"] = events;
    ojson measures;
    for (std::size_t m = 0; m < kMeasureCount; ++m) {
      const MeasureSummary& ms = g.measures[m];
      ojson mj;
      mj["n"] = ms.n;
      mj["q25"] = ms.quartiles ? ojson(ms.quartiles->q25) : ojson(nullptr);
      mj["median"] = ms.quartiles ? ojson(ms.quartiles->median) : ojson(nullptr);
      mj["q75"] = ms.quartiles ? ojson(ms.quartiles->q75) : ojson(nullptr);
      mj["mean"] = opt_json(ms.mean);
      mj["median_ratio"] = opt_json(ms.median_ratio);
      mj["mean_ratio"] = opt_json(ms.mean_ratio);
      measures[std::string(column_name(static_cast<Measure>(m)))] = mj;
    }
    gj["measures"] = measures;
    j["groups"].push_back(gj);
  }

  ojson events;
  events["all"] = share_json(r.events, std::nullopt);
  events["antihypertensive"] = share_json(r.events, true);
  events["no_antihypertensive"] = share_json(r.events, false);
  ojson counts;
  for (std::size_t e = 0; e < kEventCount; ++e) {
    ojson ej;
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      ej[std::string(to_string(static_cast<CohortGroup>(g)))] = {{"no_antihypertensive", r.events.counts[e][g][0]},
                                                                  {"antihypertensive", r.events.counts[e][g][1]}};
    }
    counts[std::string(column_name(static_cast<Event>(e)))] = ej;
  }
  events["counts"] = counts;
  j["events"] = events;

  if (r.alignment) {
    j["alignment"] = {{"bandwidth", r.alignment->bandwidth},
                      {"n_aligned", r.alignment->n_aligned},
                      {"n_total", r.alignment->n_total},
                      {"grid_points", r.alignment->grid.size()}};
  }
  j["individuals_without_predictions"] = r.without_predictions;
  return j;
}

std::string report_text(const CohortReport& r) {
  std::ostringstream out;
  out << "Evaluation (" << r.n_metric_individuals << " individuals)\n";
  for (const auto& m : r.metrics) {
    out << "  " << m.level << ": accuracy " << fixed(m.accuracy, 3) << ", balanced accuracy "
        << opt_fixed(m.balanced_accuracy, 3) << "  [tp " << m.confusion.tp << " fp " << m.confusion.fp << " tn "
        << m.confusion.tn << " fn " << m.confusion.fn << "]\n";
  }
  out << "\nGroups (ratios vs " << to_string(kBaselineGroup) << ")\n";
  out << "  " << std::string(28, ' ');
  for (const auto& g : r.strat.groups) {
    char head[32];
    std::snprintf(head, sizeof head, "%14s", std::string(to_string(g.group)).c_str());
    out << head;
  }
  out << "\n";
  const auto row = [&](const std::string& name, auto&& cell) {
    char label[40];
    std::snprintf(label, sizeof label, "  %-28s", name.c_str());
    out << label;
    for (const auto& g : r.strat.groups) {
      char c[32];
      std::snprintf(c, sizeof c, "%14s", cell(g).c_str());
      out << c;
    }
    out << "\n";
  };
  row("n", [](const GroupSummary& g) { return std::to_string(g.n); });
  for (std::size_t c = 0; c < kConditionCount; ++c) {
    row(std::string(column_name(static_cast<Condition>(c))),
        [&](const GroupSummary& g) { return opt_fixed(g.conditions[c].ratio, 1); });
  }
  row("antihypertensive_use", [](const GroupSummary& g) { return opt_fixed(g.antihypertensive.ratio, 1); });
  for (std::size_t m = 0; m < kMeasureCount; ++m) {
    row(std::string(column_name(static_cast<Measure>(m))) + " (median)",
        [&](const GroupSummary& g) { return opt_fixed(g.measures[m].median_ratio, 1); });
  }
  for (std::size_t e = 0; e < kEventCount; ++e) {
    row(std::string(column_name(static_cast<Event>(e))),
        [&](const GroupSummary& g) { return opt_fixed(g.events[e].ratio, 1); });
  }
  out << "\nEvents in high-VD groups\n";
  for (const auto& [name, med] : {std::pair<const char*, std::optional<bool>>{"all", std::nullopt},
                                  {"antihypertensive", true},
                                  {"no antihypertensive", false}}) {
    out << "  " << name << ": " << r.events.high_vd_total(med) << " / " << r.events.total(med);
    if (const auto share = r.events.high_vd_share(med)) out << " (" << fixed(100.0 * *share, 1) << "%)";
    out << "\n";
  }
  if (!r.without_predictions.empty()) {
    out << "\n" << r.without_predictions.size() << " cohort individual(s) without predictions\n";
  }
  return out.str();
}

}  // namespace

// --- figures ------------------------------------------------------------------------

std::string confusion_svg(const ConfusionMatrix& m, const std::string& title) {
  const std::array<std::array<std::size_t, 2>, 2> cells{{{m.tn, m.fp}, {m.fn, m.tp}}};
  const std::size_t peak = std::max<std::size_t>({1, m.tn, m.fp, m.fn, m.tp});
  std::ostringstream s;
  s << R"(<svg xmlns="http://www.w3.org/2000/svg" width="360" height="340" font-family="sans-serif">)" << "\n";
  s << R"(<text x="180" y="24" text-anchor="middle" font-size="16">)" << xml_escape(title) << "</text>\n";
  const std::array<const char*, 2> names{"LowVD / dx-", "HighVD / dx+"};
  for (int t = 0; t < 2; ++t) {
    for (int p = 0; p < 2; ++p) {
      const double shade = static_cast<double>(cells[t][p]) / static_cast<double>(peak);
      const int level = 255 - static_cast<int>(std::lround(180.0 * shade));
      const int x = 100 + 120 * p;
      const int y = 50 + 120 * t;
      s << "<rect x=\"" << x << "\" y=\"" << y << R"(" width="120" height="120" fill="rgb()" << level << ","
        << level << ",255)\" stroke=\"#333\"/>\n";
      s << "<text x=\"" << x + 60 << "\" y=\"" << y + 66 << R"(" text-anchor="middle" font-size="18">)"
        << cells[t][p] << "</text>\n";
    }
    s << R"(<text x="95" y=")" << 114 + 120 * t << R"(" text-anchor="end" font-size="11">)" << names[t]
      << "</text>\n";
    s << "<text x=\"" << 160 + 120 * t << R"(" y="305" text-anchor="middle" font-size="11">)" << names[t]
      << "</text>\n";
  }
  s << R"(<text x="220" y="328" text-anchor="middle" font-size="12">predicted</text>)" << "\n";
  s << R"svg(<text x="14" y="170" font-size="12" transform="rotate(-90 14 170)" text-anchor="middle">diagnosis</text>)svg"
    << "\n</svg>\n";
  return s.str();
}

std::string group_ratio_svg(const StratReport& strat) {
  std::vector<std::pair<std::string, std::array<std::optional<double>, kGroupCount>>> rows;
  for (std::size_t c = 0; c < kConditionCount; ++c) {
    std::array<std::optional<double>, kGroupCount> v;
    for (std::size_t g = 0; g < kGroupCount; ++g) v[g] = strat.groups[g].conditions[c].ratio;
    rows.emplace_back(std::string(column_name(static_cast<Condition>(c))), v);
  }
  for (std::size_t m = 0; m < kMeasureCount; ++m) {
    std::array<std::optional<double>, kGroupCount> v;
    for (std::size_t g = 0; g < kGroupCount; ++g) v[g] = strat.groups[g].measures[m].median_ratio;
    rows.emplace_back(std::string(column_name(static_cast<Measure>(m))), v);
  }
  double peak = 1.0;
  for (const auto& [name, v] : rows) {
    for (const auto& x : v) {
      if (x) peak = std::max(peak, *x);
    }
  }
  const int bar_w = 8;
  const int group_w = bar_w * static_cast<int>(kGroupCount) + 14;
  const int width = 70 + group_w * static_cast<int>(rows.size());
  const int plot_h = 260;
  std::ostringstream s;
  s << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << width << R"(" height="420" font-family="sans-serif">)"
    << "\n";
  s << R"(<text x="10" y="20" font-size="14">Ratio to )" << xml_escape(std::string(to_string(kBaselineGroup)))
    << "</text>\n";
  const auto y_of = [&](double v) { return 30.0 + plot_h * (1.0 - v / peak); };
  s << R"(<line x1="60" x2=")" << width << "\" y1=\"" << fixed(y_of(1.0), 2) << "\" y2=\"" << fixed(y_of(1.0), 2)
    << R"(" stroke="#999" stroke-dasharray="4 3"/>)" << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int x0 = 66 + group_w * static_cast<int>(i);
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      if (!rows[i].second[g]) continue;
      const double y = y_of(*rows[i].second[g]);
      s << "<rect x=\"" << x0 + bar_w * static_cast<int>(g) << "\" y=\"" << fixed(y, 2) << "\" width=\"" << bar_w - 1
        << "\" height=\"" << fixed(30.0 + plot_h - y, 2) << "\" fill=\"" << kGroupColors[g] << "\"/>\n";
    }
    s << "<text x=\"" << x0 + group_w / 2 << "\" y=\"" << 30 + plot_h + 10 << "\" font-size=\"10\" transform=\"rotate(45 "
      << x0 + group_w / 2 << " " << 30 + plot_h + 10 << ")\">" << xml_escape(rows[i].first) << "</text>\n";
  }
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    s << "<rect x=\"" << 70 + 110 * static_cast<int>(g) << "\" y=\"400\" width=\"10\" height=\"10\" fill=\""
      << kGroupColors[g] << "\"/><text x=\"" << 84 + 110 * static_cast<int>(g) << "\" y=\"409\" font-size=\"11\">"
      << xml_escape(std::string(to_string(static_cast<CohortGroup>(g)))) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string event_svg(const EventTable& events) {
  std::size_t peak = 1;
  for (const auto& by_group : events.counts) {
    for (const auto& by_med : by_group) peak = std::max(peak, by_med[0] + by_med[1]);
  }
  const int plot_h = 220;
  const int bar_w = 18;
  const int group_w = bar_w * static_cast<int>(kGroupCount) + 20;
  const int width = 60 + group_w * static_cast<int>(kEventCount);
  std::ostringstream s;
  s << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << width << R"(" height="320" font-family="sans-serif">)"
    << "\n";
  s << R"(<text x="10" y="20" font-size="14">Events by group (hatched: antihypertensive use)</text>)" << "\n";
  s << R"(<defs><pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse"><path d="M0 4L4 0" stroke="#000" stroke-width="1"/></pattern></defs>)"
    << "\n";
  const auto h_of = [&](std::size_t v) { return plot_h * static_cast<double>(v) / static_cast<double>(peak); };
  for (std::size_t e = 0; e < kEventCount; ++e) {
    const int x0 = 60 + group_w * static_cast<int>(e);
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      const int x = x0 + bar_w * static_cast<int>(g);
      const double h0 = h_of(events.counts[e][g][0]);
      const double h1 = h_of(events.counts[e][g][1]);
      const double base = 30.0 + plot_h;
      s << "<rect x=\"" << x << "\" y=\"" << fixed(base - h0, 2) << "\" width=\"" << bar_w - 2 << "\" height=\""
        << fixed(h0, 2) << "\" fill=\"" << kGroupColors[g] << "\"/>\n";
      s << "<rect x=\"" << x << "\" y=\"" << fixed(base - h0 - h1, 2) << "\" width=\"" << bar_w - 2 << "\" height=\""
        << fixed(h1, 2) << "\" fill=\"" << kGroupColors[g] << "\"/>\n";
      s << "<rect x=\"" << x << "\" y=\"" << fixed(base - h0 - h1, 2) << "\" width=\"" << bar_w - 2 << "\" height=\""
        << fixed(h1, 2) << "\" fill=\"url(#hatch)\"/>\n";
    }
    s << "<text x=\"" << x0 + group_w / 2 - 10 << "\" y=\"" << 30 + plot_h + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << column_name(static_cast<Event>(e)) << "</text>\n";
  }
  for (std::size_t g = 0; g < kGroupCount; ++g) {
    s << "<rect x=\"" << 60 + 110 * static_cast<int>(g) << "\" y=\"300\" width=\"10\" height=\"10\" fill=\""
      << kGroupColors[g] << "\"/><text x=\"" << 74 + 110 * static_cast<int>(g) << "\" y=\"309\" font-size=\"11\">"
      << xml_escape(std::string(to_string(static_cast<CohortGroup>(g)))) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string alignment_svg(const AlignmentCurves& c) {
  const int w = 520;
  const int h = 300;
  const double x_lo = c.grid.front();
  const double x_hi = c.grid.back();
  double peak = 1e-12;
  for (double v : c.aligned_density) peak = std::max(peak, v);
  for (double v : c.non_aligned_density) peak = std::max(peak, v);
  const auto px = [&](double x) { return 50.0 + (w - 70) * (x - x_lo) / std::max(1e-12, x_hi - x_lo); };
  const auto py = [&](double y, double top) { return 30.0 + (h - 80) * (1.0 - y / top); };
  const auto path = [&](const std::vector<double>& ys, double top) {
    std::string d;
    for (std::size_t i = 0; i < ys.size(); ++i) {
      d += (i ? " L" : "M") + fixed(px(c.grid[i]), 2) + " " + fixed(py(ys[i], top), 2);
    }
    return d;
  };
  std::ostringstream s;
  s << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << w << R"(" height=")" << h
    << R"(" font-family="sans-serif">)" << "\n";
  s << R"(<text x="10" y="20" font-size="14">Age density: aligned vs not aligned (dashed: aligned share)</text>)"
    << "\n";
  s << R"(<path d=")" << path(c.aligned_density, peak) << R"(" fill="none" stroke="#1b7837" stroke-width="2"/>)"
    << "\n";
  s << R"(<path d=")" << path(c.non_aligned_density, peak) << R"(" fill="none" stroke="#762a83" stroke-width="2"/>)"
    << "\n";
  s << R"(<path d=")" << path(c.aligned_proportion, 1.0)
    << R"(" fill="none" stroke="#333" stroke-width="1" stroke-dasharray="5 3"/>)" << "\n";
  s << "<line x1=\"50\" x2=\"" << w - 20 << "\" y1=\"" << h - 50 << "\" y2=\"" << h - 50 << "\" stroke=\"#333\"/>\n";
  s << "<text x=\"50\" y=\"" << h - 32 << "\" font-size=\"11\">" << fixed(x_lo, 1) << "</text>\n";
  s << "<text x=\"" << w - 20 << "\" y=\"" << h - 32 << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(x_hi, 1)
    << "</text>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" font-size=\"12\" text-anchor=\"middle\">age</text>\n";
  s << "</svg>\n";
  return s.str();
}

void write_cohort_report(const CohortReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_json(r).dump(2) + "\n");
  write_text(dir / "report.txt", report_text(r));

  std::ostringstream metrics;
  metrics << "level\ttp\tfp\ttn\tfn\taccuracy\tbalanced_accuracy\n";
  for (const auto& m : r.metrics) {
    metrics << m.level << '\t' << m.confusion.tp << '\t' << m.confusion.fp << '\t' << m.confusion.tn << '\t'
            << m.confusion.fn << '\t' << fixed(m.accuracy, 6) << '\t' << opt_fixed(m.balanced_accuracy, 6) << '\n';
  }
  write_text(dir / "metrics.tsv", metrics.str());

  const GroupSummary& base = r.strat.group(kBaselineGroup);
  std::ostringstream groups;
  groups << "group\tvariable\tcount\tn\tprevalence\tratio\tratio_ci_low\tratio_ci_high\n";
  const auto prevalence_row = [&](const GroupSummary& g, const std::string& name, const PrevalenceSummary& s,
                                  const PrevalenceSummary& b) {
    groups << to_string(g.group) << '\t' << name << '\t' << s.count << '\t' << s.n << '\t' << fixed(s.prevalence, 6)
           << '\t' << opt_fixed(s.ratio, 6);
    if (s.n > 0 && b.n > 0) {
      const Interval ci = prevalence_ratio_interval(s.count, s.n, b.count, b.n, kReportConfidence);
      groups << '\t' << fixed(ci.lower, 6) << '\t' << fixed(ci.upper, 6) << '\n';
    } else {
      groups << "\tUndefined\tUndefined\n";
    }
  };
  for (const auto& g : r.strat.groups) {
    for (std::size_t c = 0; c < kConditionCount; ++c) {
      prevalence_row(g, std::string(column_name(static_cast<Condition>(c))), g.conditions[c], base.conditions[c]);
    }
    prevalence_row(g, "antihypertensive_use", g.antihypertensive, base.antihypertensive);
    for (std::size_t e = 0; e < kEventCount; ++e) {
      prevalence_row(g, std::string(column_name(static_cast<Event>(e))), g.events[e], base.events[e]);
    }
  }
  write_text(dir / "groups.tsv", groups.str());

  std::ostringstream measures;
  measures << "group\tmeasure\tn\tq25\tmedian\tq75\tmean\tmedian_ratio\tmean_ratio\n";
  for (const auto& g : r.strat.groups) {
    for (std::size_t m = 0; m < kMeasureCount; ++m) {
      const MeasureSummary& ms = g.measures[m];
      measures << to_string(g.group) << '\t' << column_name(static_cast<Measure>(m)) << '\t' << ms.n << '\t';
      if (ms.quartiles) {
        measures << fixed(ms.quartiles->q25, 6) << '\t' << fixed(ms.quartiles->median, 6) << '\t'
                 << fixed(ms.quartiles->q75, 6);
      } else {
        measures << "Undefined\tUndefined\tUndefined";
      }
      measures << '\t' << opt_fixed(ms.mean, 6) << '\t' << opt_fixed(ms.median_ratio, 6) << '\t'
               << opt_fixed(ms.mean_ratio, 6) << '\n';
    }
  }
  write_text(dir / "measures.tsv", measures.str());

  std::ostringstream events;
  events << "event\tgroup\tantihypertensive_use\tcount\n";
  for (std::size_t e = 0; e < kEventCount; ++e) {
    for (std::size_t g = 0; g < kGroupCount; ++g) {
      for (std::size_t med = 0; med < 2; ++med) {
        events << column_name(static_cast<Event>(e)) << '\t' << to_string(static_cast<CohortGroup>(g)) << '\t' << med
               << '\t' << r.events.counts[e][g][med] << '\n';
      }
    }
  }
  write_text(dir / "events.tsv", events.str());

  std::ostringstream missing;
  missing << "individual_id\n";
  for (const auto& id : r.without_predictions) missing << id << '\n';
  write_text(dir / "without_predictions.tsv", missing.str());

  const auto clip = std::find_if(r.metrics.begin(), r.metrics.end(), [](const auto& m) { return m.level == "clip"; });
  if (clip != r.metrics.end()) write_text(dir / "confusion_clip.svg", confusion_svg(clip->confusion, "Clip-level confusion"));
  write_text(dir / "groups.svg", group_ratio_svg(r.strat));
  write_text(dir / "events.svg", event_svg(r.events));
  if (r.alignment) {
    std::ostringstream kde;
    kde << "age\taligned_density\tnon_aligned_density\taligned_proportion\n";
    for (std::size_t i = 0; i < r.alignment->grid.size(); ++i) {
      kde << fixed(r.alignment->grid[i], 6) << '\t' << fixed(r.alignment->aligned_density[i], 8) << '\t'
          << fixed(r.alignment->non_aligned_density[i], 8) << '\t' << fixed(r.alignment->aligned_proportion[i], 8)
          << '\n';
    }
    write_text(dir / "alignment_kde.tsv", kde.str());
    write_text(dir / "alignment_kde.svg", alignment_svg(*r.alignment));
  }
}

}  // namespace vdscan
