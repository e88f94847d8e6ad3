#pragma once

// Feature engineering: weekly activity logs -> Score Ranking Point
// matrices. Attendance and report map through fixed scores; the ten
// count/time features rank within one course-week, active students only,
// on a 10..1 decile scale. Everything is divided by 10 before modeling.

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "edukd/csv.hpp"
#include "edukd/distill.hpp"

namespace edukd {

constexpr std::size_t kFeatureCount = 12;

inline const std::array<std::string, kFeatureCount>& feature_names() {
  static const std::array<std::string, kFeatureCount> names = {
      "srp_attendance", "srp_report",  "srp_course_accesses", "srp_reading_time",
      "srp_markers",    "srp_memos",   "srp_total_actions",   "srp_open",
      "srp_next",       "srp_prev",    "srp_page_jump",       "srp_close"};
  return names;
}

enum class Attendance { present, late, absent };
enum class ReportStatus { on_time, late, none };

inline Attendance attendance_from_string(const std::string& s) {
  if (s == "present") return Attendance::present;
  if (s == "late") return Attendance::late;
  if (s == "absent") return Attendance::absent;
  throw std::invalid_argument("unknown attendance status: '" + s + "'");
}

inline const char* to_string(Attendance a) {
  switch (a) {
    case Attendance::present: return "present";
    case Attendance::late: return "late";
    case Attendance::absent: return "absent";
  }
  throw std::logic_error("bad attendance");
}

inline ReportStatus report_from_string(const std::string& s) {
  if (s == "on_time") return ReportStatus::on_time;
  if (s == "late") return ReportStatus::late;
  if (s == "none") return ReportStatus::none;
  throw std::invalid_argument("unknown report status: '" + s + "'");
}

inline const char* to_string(ReportStatus r) {
  switch (r) {
    case ReportStatus::on_time: return "on_time";
    case ReportStatus::late: return "late";
    case ReportStatus::none: return "none";
  }
  throw std::logic_error("bad report status");
}

// One student-week of raw activity.
struct ActivityRecord {
  std::string student_id;
  int week = 0;
  Attendance attendance = Attendance::absent;
  std::vector<ReportStatus> reports;  // one entry per assignment due that week
  long long course_accesses = 0;
  long long reading_time = 0;  // seconds
  long long markers = 0;
  long long memos = 0;
  long long total_actions = 0;
  long long opens = 0;
  long long nexts = 0;
  long long prevs = 0;
  long long page_jumps = 0;
  long long closes = 0;

  // The ten rankable features, in feature order 2..11.
  long long ranked(std::size_t i) const {
    switch (i) {
      case 0: return course_accesses;
      case 1: return reading_time;
      case 2: return markers;
      case 3: return memos;
      case 4: return total_actions;
      case 5: return opens;
      case 6: return nexts;
      case 7: return prevs;
      case 8: return page_jumps;
      case 9: return closes;
    }
    throw std::logic_error("bad ranked feature index");
  }
};

struct StudentSequence {
  std::string student_id;
  std::vector<std::array<double, kFeatureCount>> weeks;  // normalized SRPs
  int label = 0;  // 1 = at-risk
  char grade = '?';
};

using Dataset = std::vector<StudentSequence>;

struct SplitSpec {
  std::string name;
  std::vector<std::string> train;
  std::string test;
};

// ---- SRP scores -------------------------------------------------------

inline int srp_attendance(Attendance a) {
  switch (a) {
    case Attendance::present: return 10;
    case Attendance::late: return 5;
    case Attendance::absent: return 0;
  }
  throw std::logic_error("bad attendance");
}

inline int report_score(ReportStatus r) {
  switch (r) {
    case ReportStatus::on_time: return 10;
    case ReportStatus::late: return 5;
    case ReportStatus::none: return 0;
  }
  throw std::logic_error("bad report status");
}

// Arithmetic mean over the week's assignments; a week with no assignment
// scores 0.
inline double srp_report(const std::vector<ReportStatus>& statuses) {
  if (statuses.empty()) return 0.0;
  double total = 0.0;
  for (auto s : statuses) total += report_score(s);
  return total / static_cast<double>(statuses.size());
}

// Decile ranks over students with nonzero activity; zero activity scores
// zero. Tied values share the best (smallest) rank position of the block.
inline std::vector<int> srp_percentile(const std::vector<long long>& values) {
  std::vector<int> scores(values.size(), 0);
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0)
      throw std::invalid_argument("srp_percentile: negative activity value");
    if (values[i] > 0) active.push_back(i);
  }
  if (active.empty()) return scores;
  std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  std::size_t n_active = active.size();
  std::size_t block_rank = 1;
  for (std::size_t j = 0; j < n_active; ++j) {
    if (j > 0 && values[active[j]] != values[active[j - 1]]) block_rank = j + 1;
    scores[active[j]] = 10 - static_cast<int>(10 * (block_rank - 1) / n_active);
  }
  return scores;
}

// Grades C, D, F mark the at-risk (positive) class.
inline int at_risk_label(char grade) {
  switch (grade) {
    case 'A':
    case 'B': return 0;
    case 'C':
    case 'D':
    case 'F': return 1;
  }
  throw std::invalid_argument(std::string("unknown grade: '") + grade + "'");
}

// ---- assembly -----------------------------------------------------------

using GradeRoster = std::vector<std::pair<std::string, char>>;

// Builds one course's feature matrices. Rankings run within each week over
// this course's students; weeks with no record count as zero activity.
inline Dataset build_sequences(const std::vector<ActivityRecord>& records,
                               const GradeRoster& roster, std::size_t weeks) {
  if (weeks == 0) throw std::invalid_argument("build_sequences: course length is zero");
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (!order.emplace(roster[i].first, i).second)
      throw std::invalid_argument("build_sequences: duplicate student id " + roster[i].first);
  }

  // (student, week) -> record
  std::vector<std::vector<const ActivityRecord*>> grid(roster.size(),
                                                       std::vector<const ActivityRecord*>(weeks));
  for (const auto& rec : records) {
    auto it = order.find(rec.student_id);
    if (it == order.end())
      throw std::invalid_argument("build_sequences: student " + rec.student_id +
                                  " has activity but no grade");
    if (rec.week < 1 || static_cast<std::size_t>(rec.week) > weeks)
      throw std::invalid_argument("build_sequences: week " + std::to_string(rec.week) +
                                  " outside course length " + std::to_string(weeks));
    auto& slot = grid[it->second][static_cast<std::size_t>(rec.week - 1)];
    if (slot != nullptr)
      throw std::invalid_argument("build_sequences: duplicate record for " + rec.student_id +
                                  " week " + std::to_string(rec.week));
    slot = &rec;
  }

  Dataset out(roster.size());
  for (std::size_t s = 0; s < roster.size(); ++s) {
    out[s].student_id = roster[s].first;
    out[s].grade = roster[s].second;
    out[s].label = at_risk_label(roster[s].second);
    out[s].weeks.assign(weeks, {});
  }

  for (std::size_t w = 0; w < weeks; ++w) {
    for (std::size_t s = 0; s < roster.size(); ++s) {
      const ActivityRecord* rec = grid[s][w];
      out[s].weeks[w][0] = srp_attendance(rec ? rec->attendance : Attendance::absent) / 10.0;
      out[s].weeks[w][1] = srp_report(rec ? rec->reports : std::vector<ReportStatus>{}) / 10.0;
    }
    for (std::size_t f = 0; f < 10; ++f) {
      std::vector<long long> column(roster.size(), 0);
      for (std::size_t s = 0; s < roster.size(); ++s)
        if (grid[s][w]) column[s] = grid[s][w]->ranked(f);
      std::vector<int> scores = srp_percentile(column);
      for (std::size_t s = 0; s < roster.size(); ++s)
        out[s].weeks[w][2 + f] = scores[s] / 10.0;
    }
  }
  return out;
}

// Train courses concatenate in listed order; the test course is untouched
// by anything fitted on the train side (SRPs rank within each course, so
// there is no cross-course statistic to leak).
inline std::pair<Dataset, Dataset> make_split(const SplitSpec& spec,
                                              const std::map<std::string, Dataset>& courses) {
  auto course = [&](const std::string& id) -> const Dataset& {
    auto it = courses.find(id);
    if (it == courses.end())
      throw std::invalid_argument("make_split: unknown course id '" + id + "'");
    return it->second;
  };
  Dataset train;
  for (const auto& id : spec.train) {
    const Dataset& c = course(id);
    train.insert(train.end(), c.begin(), c.end());
  }
  return {train, course(spec.test)};
}

inline StudentSequence truncate(const StudentSequence& seq, std::size_t n) {
  if (n < 1 || n > seq.weeks.size())
    throw std::invalid_argument("truncate: length " + std::to_string(n) + " outside 1.." +
                                std::to_string(seq.weeks.size()));
  StudentSequence out = seq;
  out.weeks.resize(n);
  return out;
}

// ---- model-facing conversion -------------------------------------------

inline LabeledSequence to_labeled(const StudentSequence& seq, std::size_t n_weeks = 0) {
  if (n_weeks == 0) n_weeks = seq.weeks.size();
  if (n_weeks > seq.weeks.size())
    throw std::invalid_argument("to_labeled: " + std::to_string(n_weeks) + " weeks requested, " +
                                std::to_string(seq.weeks.size()) + " available");
  LabeledSequence out;
  out.id = seq.student_id;
  out.label = seq.label;
  for (std::size_t w = 0; w < n_weeks; ++w) {
    std::vector<double> v(seq.weeks[w].begin(), seq.weeks[w].end());
    out.inputs.push_back(Tensor::column(std::move(v)));
  }
  return out;
}

inline TrainSet to_train_set(const Dataset& data, std::size_t n_weeks = 0) {
  TrainSet out;
  out.reserve(data.size());
  for (const auto& seq : data) out.push_back(to_labeled(seq, n_weeks));
  return out;
}

// ---- csv formats ----------------------------------------------------------

inline std::vector<ActivityRecord> read_activity_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  const std::vector<std::string> expect = {
      "student_id", "week",  "attendance",    "reports", "course_accesses",
      "reading_time", "markers", "memos",     "total_actions", "open",
      "next",       "prev",  "page_jump",     "close"};
  if (table.header != expect) throw std::runtime_error(path + ": unexpected activity header");
  std::vector<ActivityRecord> out;
  for (const auto& row : table.rows) {
    ActivityRecord r;
    r.student_id = row[0];
    r.week = static_cast<int>(parse_int(row[1], "week"));
    r.attendance = attendance_from_string(row[2]);
    if (!row[3].empty())
      for (const auto& s : split_fields(row[3], ';')) r.reports.push_back(report_from_string(s));
    r.course_accesses = parse_int(row[4], "course_accesses");
    r.reading_time = parse_int(row[5], "reading_time");
    r.markers = parse_int(row[6], "markers");
    r.memos = parse_int(row[7], "memos");
    r.total_actions = parse_int(row[8], "total_actions");
    r.opens = parse_int(row[9], "open");
    r.nexts = parse_int(row[10], "next");
    r.prevs = parse_int(row[11], "prev");
    r.page_jumps = parse_int(row[12], "page_jump");
    r.closes = parse_int(row[13], "close");
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_activity_csv(const std::vector<ActivityRecord>& records,
                               const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "student_id,week,attendance,reports,course_accesses,reading_time,markers,memos,"
         "total_actions,open,next,prev,page_jump,close\n";
  for (const auto& r : records) {
    out << r.student_id << "," << r.week << "," << to_string(r.attendance) << ",";
    for (std::size_t i = 0; i < r.reports.size(); ++i)
      out << (i ? ";" : "") << to_string(r.reports[i]);
    out << "," << r.course_accesses << "," << r.reading_time << "," << r.markers << ","
        << r.memos << "," << r.total_actions << "," << r.opens << "," << r.nexts << ","
        << r.prevs << "," << r.page_jumps << "," << r.closes << "\n";
  }
}

inline GradeRoster read_grade_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"student_id", "grade"})
    throw std::runtime_error(path + ": unexpected grade header");
  GradeRoster out;
  for (const auto& row : table.rows) {
    if (row[1].size() != 1) throw std::runtime_error(path + ": bad grade '" + row[1] + "'");
    out.emplace_back(row[0], row[1][0]);
  }
  return out;
}

inline void write_grade_csv(const GradeRoster& roster, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "student_id,grade\n";
  for (const auto& [id, grade] : roster) out << id << "," << grade << "\n";
}

inline void write_features_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "student_id,label,week";
  for (const auto& name : feature_names()) out << "," << name;
  out << "\n";
  for (const auto& seq : data) {
    for (std::size_t w = 0; w < seq.weeks.size(); ++w) {
      out << seq.student_id << "," << seq.label << "," << (w + 1);
      for (double v : seq.weeks[w]) out << "," << format_double(v);
      out << "\n";
    }
  }
}

inline Dataset read_features_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  std::vector<std::string> expect = {"student_id", "label", "week"};
  for (const auto& name : feature_names()) expect.push_back(name);
  if (table.header != expect) throw std::runtime_error(path + ": unexpected features header");
  Dataset out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : table.rows) {
    const std::string& id = row[0];
    auto it = index.find(id);
    if (it == index.end()) {
      it = index.emplace(id, out.size()).first;
      out.push_back(StudentSequence{.student_id = id,
                                    .weeks = {},
                                    .label = static_cast<int>(parse_int(row[1], "label")),
                                    .grade = '?'});
    }
    StudentSequence& seq = out[it->second];
    if (static_cast<std::size_t>(parse_int(row[2], "week")) != seq.weeks.size() + 1)
      throw std::runtime_error(path + ": weeks for " + id + " are not contiguous from 1");
    std::array<double, kFeatureCount> week{};
    for (std::size_t f = 0; f < kFeatureCount; ++f)
      week[f] = parse_double(row[3 + f], feature_names()[f]);
    seq.weeks.push_back(week);
  }
  return out;
}

}  // namespace edukd
