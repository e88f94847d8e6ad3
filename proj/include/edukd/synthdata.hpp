#pragma once

// Synthetic course cohorts with a planted at-risk signal. Every student
// band shares a week-1 activity baseline; at-risk bands decay geometrically
// week over week and drift toward late/absent statuses, so the separation
// between classes grows with the week index. All constants live in a
// versioned profile file; nothing behavioral is hard-coded here.

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "edukd/features.hpp"
#include "edukd/rng.hpp"

namespace edukd {

struct GradeBandModel {
  double decay = 1.0;        // weekly retention of activity means
  double week1_scale = 1.0;  // band's share of the common week-1 baseline
  double late_slope = 0.0;   // added to p(late) per elapsed week
  double absent_slope = 0.0;
  double report_late_slope = 0.0;
  double report_none_slope = 0.0;
};

struct EngagementModel {
  std::array<double, 10> base_means{};  // ranked features, feature order
  double dispersion = 3.0;              // negative-binomial gamma shape
  double base_late = 0.05;
  double base_absent = 0.03;
  double report_base_late = 0.1;
  double report_base_none = 0.05;
  std::vector<std::size_t> assignments_per_week;
  std::map<char, GradeBandModel> bands;
};

struct CourseProfile {
  std::string id;
  std::string modality;
  std::size_t students = 0;
  std::uint64_t seed_offset = 0;
  std::map<char, double> grade_weights;  // counts or probabilities
};

struct CohortProfile {
  std::string version;
  std::size_t weeks = 7;
  std::map<std::string, double> modality_scale;
  EngagementModel engagement;
  std::vector<CourseProfile> courses;
  std::vector<SplitSpec> splits;

  void validate() const {
    if (weeks == 0) throw std::invalid_argument("profile: weeks must be positive");
    if (engagement.assignments_per_week.size() != weeks)
      throw std::invalid_argument("profile: assignments_per_week length must equal weeks");
    for (char g : {'A', 'B', 'C', 'D', 'F'})
      if (!engagement.bands.count(g))
        throw std::invalid_argument(std::string("profile: missing band ") + g);
    double safe_retention = std::min(engagement.bands.at('A').decay,
                                     engagement.bands.at('B').decay);
    for (char g : {'C', 'D', 'F'})
      if (engagement.bands.at(g).decay >= safe_retention)
        throw std::invalid_argument(std::string("profile: at-risk band ") + g +
                                    " must decay strictly faster than A/B");
    for (const auto& c : courses) {
      if (c.students == 0) throw std::invalid_argument("profile: course with zero students");
      if (!modality_scale.count(c.modality))
        throw std::invalid_argument("profile: unknown modality '" + c.modality + "'");
      double total = 0.0;
      for (const auto& [g, wgt] : c.grade_weights) {
        if (wgt < 0.0) throw std::invalid_argument("profile: negative grade weight");
        total += wgt;
      }
      if (total <= 0.0) throw std::invalid_argument("profile: grade weights sum to zero");
    }
  }
};

// ---- profile file -----------------------------------------------------

inline CohortProfile profile_from_json(const nlohmann::json& j) {
  CohortProfile p;
  p.version = j.at("version").get<std::string>();
  p.weeks = j.at("weeks").get<std::size_t>();
  for (const auto& [key, value] : j.at("modality_scale").items())
    p.modality_scale[key] = value.get<double>();

  const auto& je = j.at("engagement");
  const auto& jm = je.at("base_means");
  static const std::array<const char*, 10> ranked_names = {
      "course_accesses", "reading_time", "markers", "memos", "total_actions",
      "open",            "next",         "prev",    "page_jump", "close"};
  for (std::size_t i = 0; i < 10; ++i)
    p.engagement.base_means[i] = jm.at(ranked_names[i]).get<double>();
  p.engagement.dispersion = je.at("dispersion").get<double>();
  p.engagement.base_late = je.at("attendance").at("base_late").get<double>();
  p.engagement.base_absent = je.at("attendance").at("base_absent").get<double>();
  p.engagement.report_base_late = je.at("report").at("base_late").get<double>();
  p.engagement.report_base_none = je.at("report").at("base_none").get<double>();
  p.engagement.assignments_per_week =
      je.at("report").at("assignments_per_week").get<std::vector<std::size_t>>();
  for (const auto& [band, jb] : je.at("bands").items()) {
    if (band.size() != 1) throw std::invalid_argument("profile: bad band name " + band);
    GradeBandModel b;
    b.decay = jb.at("decay").get<double>();
    b.week1_scale = jb.at("week1_scale").get<double>();
    b.late_slope = jb.at("late_slope").get<double>();
    b.absent_slope = jb.at("absent_slope").get<double>();
    b.report_late_slope = jb.at("report_late_slope").get<double>();
    b.report_none_slope = jb.at("report_none_slope").get<double>();
    p.engagement.bands[band[0]] = b;
  }

  for (const auto& jc : j.at("courses")) {
    CourseProfile c;
    c.id = jc.at("id").get<std::string>();
    c.modality = jc.at("modality").get<std::string>();
    c.students = jc.at("students").get<std::size_t>();
    c.seed_offset = jc.at("seed_offset").get<std::uint64_t>();
    for (const auto& [g, w] : jc.at("grade_counts").items()) {
      if (g.size() != 1) throw std::invalid_argument("profile: bad grade " + g);
      c.grade_weights[g[0]] = w.get<double>();
    }
    p.courses.push_back(std::move(c));
  }

  for (const auto& js : j.at("splits")) {
    SplitSpec s;
    s.name = js.at("name").get<std::string>();
    s.train = js.at("train").get<std::vector<std::string>>();
    s.test = js.at("test").get<std::string>();
    p.splits.push_back(std::move(s));
  }
  p.validate();
  return p;
}

inline CohortProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read profile: " + path);
  nlohmann::json j;
  in >> j;
  return profile_from_json(j);
}

// ---- generation ---------------------------------------------------------

struct GeneratedCourse {
  std::string id;
  std::vector<ActivityRecord> records;
  GradeRoster roster;
};

namespace detail {

inline char sample_grade(const std::map<char, double>& weights, Rng& rng) {
  static const std::array<char, 5> order = {'A', 'B', 'C', 'D', 'F'};
  std::vector<double> w;
  for (char g : order) {
    auto it = weights.find(g);
    w.push_back(it == weights.end() ? 0.0 : it->second);
  }
  return order[rng.categorical(w)];
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace detail

// Draw order per student is fixed (grade, then per week: attendance,
// reports, the ten counts), so one seed pins the whole cohort.
inline GeneratedCourse generate_course(const CohortProfile& profile, const CourseProfile& course,
                                       std::uint64_t seed) {
  profile.validate();
  double modality = profile.modality_scale.at(course.modality);
  const EngagementModel& eng = profile.engagement;
  Rng rng(mix_seed(seed, course.seed_offset));

  GeneratedCourse out;
  out.id = course.id;
  char idbuf[16];
  for (std::size_t s = 0; s < course.students; ++s) {
    std::snprintf(idbuf, sizeof(idbuf), "s%03zu", s + 1);
    std::string sid = course.id + "_" + idbuf;
    char grade = detail::sample_grade(course.grade_weights, rng);
    out.roster.emplace_back(sid, grade);
    const GradeBandModel& band = eng.bands.at(grade);

    for (std::size_t w = 0; w < profile.weeks; ++w) {
      ActivityRecord rec;
      rec.student_id = sid;
      rec.week = static_cast<int>(w + 1);
      double elapsed = static_cast<double>(w);

      double p_absent = detail::clamp01(eng.base_absent + band.absent_slope * elapsed);
      double p_late = detail::clamp01(eng.base_late + band.late_slope * elapsed);
      double u = rng.uniform();
      rec.attendance = u < p_absent               ? Attendance::absent
                       : u < p_absent + p_late    ? Attendance::late
                                                  : Attendance::present;

      double p_none = detail::clamp01(eng.report_base_none + band.report_none_slope * elapsed);
      double p_rlate = detail::clamp01(eng.report_base_late + band.report_late_slope * elapsed);
      for (std::size_t a = 0; a < eng.assignments_per_week[w]; ++a) {
        double v = rng.uniform();
        rec.reports.push_back(v < p_none              ? ReportStatus::none
                              : v < p_none + p_rlate  ? ReportStatus::late
                                                      : ReportStatus::on_time);
      }

      double level = modality * band.week1_scale * std::pow(band.decay, elapsed);
      auto draw = [&](std::size_t f) {
        return rng.neg_binomial(eng.base_means[f] * level, eng.dispersion);
      };
      rec.course_accesses = draw(0);
      rec.reading_time = draw(1);
      rec.markers = draw(2);
      rec.memos = draw(3);
      rec.total_actions = draw(4);
      rec.opens = draw(5);
      rec.nexts = draw(6);
      rec.prevs = draw(7);
      rec.page_jumps = draw(8);
      rec.closes = draw(9);
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

// The four frozen cohorts plus the profile's split specs.
inline std::vector<GeneratedCourse> benchmark_suite(const CohortProfile& profile,
                                                    std::uint64_t seed) {
  std::vector<GeneratedCourse> out;
  out.reserve(profile.courses.size());
  for (const auto& course : profile.courses) out.push_back(generate_course(profile, course, seed));
  return out;
}

}  // namespace edukd
