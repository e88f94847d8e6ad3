#pragma once

// A three-student, two-week course worked out by hand. The expected matrix
// below was computed on paper from the scoring rules: attendance 10/5/0,
// report 10/5/0 averaged per week, decile ranks over active students with
// min-rank ties, zero activity scoring zero, everything divided by 10.

#include <array>
#include <vector>

#include "edukd/features.hpp"

namespace fixtures {

struct HandCourse {
  std::vector<edukd::ActivityRecord> records;
  edukd::GradeRoster roster;
  // expected normalized SRP matrices, [student][week][feature]
  std::vector<std::vector<std::array<double, 12>>> expected;
  std::vector<int> expected_labels;
};

inline HandCourse hand_course() {
  using edukd::ActivityRecord;
  using edukd::Attendance;
  using edukd::ReportStatus;

  HandCourse fx;
  fx.roster = {{"alice", 'A'}, {"bob", 'C'}, {"carol", 'F'}};
  fx.expected_labels = {0, 1, 1};

  auto rec = [](const char* id, int week, Attendance att, std::vector<ReportStatus> reports,
                std::vector<long long> counts) {
    ActivityRecord r;
    r.student_id = id;
    r.week = week;
    r.attendance = att;
    r.reports = std::move(reports);
    r.course_accesses = counts[0];
    r.reading_time = counts[1];
    r.markers = counts[2];
    r.memos = counts[3];
    r.total_actions = counts[4];
    r.opens = counts[5];
    r.nexts = counts[6];
    r.prevs = counts[7];
    r.page_jumps = counts[8];
    r.closes = counts[9];
    return r;
  };

  // week 1: carol has no record at all (all-zero activity, absent)
  fx.records.push_back(rec("alice", 1, Attendance::present, {ReportStatus::on_time},
                           {10, 300, 2, 1, 50, 5, 30, 10, 3, 5}));
  fx.records.push_back(rec("bob", 1, Attendance::late, {ReportStatus::late},
                           {5, 300, 0, 0, 20, 2, 10, 5, 1, 2}));
  // week 2: all three active with three-way rankings
  fx.records.push_back(rec("alice", 2, Attendance::present,
                           {ReportStatus::on_time, ReportStatus::late},
                           {9, 100, 1, 2, 40, 4, 20, 8, 2, 4}));
  fx.records.push_back(rec("bob", 2, Attendance::absent, {ReportStatus::none},
                           {6, 200, 0, 1, 30, 3, 15, 6, 1, 3}));
  fx.records.push_back(rec("carol", 2, Attendance::late, {ReportStatus::late},
                           {12, 50, 3, 0, 10, 1, 5, 2, 4, 1}));

  // hand-computed SRP/10 values; feature order:
  // attendance, report, accesses, reading, markers, memos, actions,
  // open, next, prev, page_jump, close
  fx.expected = {
      // alice
      {{1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0},
       {1.0, 0.75, 0.7, 0.7, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.7, 1.0}},
      // bob
      {{0.5, 0.5, 0.5, 1.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
       {0.0, 0.0, 0.4, 1.0, 0.0, 0.5, 0.7, 0.7, 0.7, 0.7, 0.4, 0.7}},
      // carol (week 1 is all zeros: no record)
      {{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
       {0.5, 0.5, 1.0, 0.4, 1.0, 0.0, 0.4, 0.4, 0.4, 0.4, 1.0, 0.4}},
  };
  return fx;
}

}  // namespace fixtures
