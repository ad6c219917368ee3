#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

// Core domain types for centralized admissions: problem instances with a
// common priority order (exam scores), matchings, per-college cutoffs, and
// the stability / efficiency audits built on them. Everything here is
// immutable after construction and all operations are pure functions, so
// instances can be shared freely across threads.

namespace tcdm {

using Score = double;

// Sentinel for "no college": unassigned slots in matchings and applications.
inline constexpr int kUnassigned = -1;

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StudentSpec {
  std::string id;
  Score score = 0;
};

struct CollegeSpec {
  std::string id;
  int capacity = 1;
};

// An admissions problem. Students are kept in descending score order, which
// is the common priority order; scores must be strictly positive and pairwise
// distinct (ties are rejected here; the clearinghouse simulator handles tied
// integer scores with an explicit tie-break instead).
//
// A preference list holds the acceptable colleges in strict order. Colleges
// not on the list rank below the outside option and are never applied to.
// The rank of the outside option is the list length, so shorter lists model
// students who prefer remaining unassigned over their remaining options.
class ProblemInstance {
 public:
  // Validating factory for id-keyed input (the file format path).
  static ProblemInstance create(
      std::vector<StudentSpec> students, std::vector<CollegeSpec> colleges,
      const std::unordered_map<std::string, std::vector<std::string>>&
          preferences) {
    if (students.empty()) throw ValidationError("instance has no students");
    if (colleges.empty()) throw ValidationError("instance has no colleges");

    std::stable_sort(students.begin(), students.end(),
                     [](const StudentSpec& a, const StudentSpec& b) {
                       return a.score > b.score;
                     });

    ProblemInstance inst;
    inst.student_ids_.reserve(students.size());
    inst.scores_.reserve(students.size());
    for (const auto& s : students) {
      if (!(s.score > 0))
        throw ValidationError("student " + s.id + ": score must be > 0");
      if (!inst.student_index_.emplace(s.id, inst.student_ids_.size()).second)
        throw ValidationError("duplicate student id " + s.id);
      inst.student_ids_.push_back(s.id);
      inst.scores_.push_back(s.score);
    }
    for (std::size_t i = 1; i < inst.scores_.size(); ++i)
      if (inst.scores_[i] == inst.scores_[i - 1])
        throw ValidationError("tied scores between " +
                              inst.student_ids_[i - 1] + " and " +
                              inst.student_ids_[i]);

    for (const auto& c : colleges) {
      if (c.capacity < 1)
        throw ValidationError("college " + c.id + ": capacity must be >= 1");
      if (!inst.college_index_.emplace(c.id, inst.college_ids_.size()).second)
        throw ValidationError("duplicate college id " + c.id);
      inst.college_ids_.push_back(c.id);
      inst.capacities_.push_back(c.capacity);
    }

    std::vector<std::vector<int>> lists(students.size());
    for (const auto& [sid, collegeList] : preferences) {
      auto it = inst.student_index_.find(sid);
      if (it == inst.student_index_.end())
        throw ValidationError("preferences for unknown student " + sid);
      std::vector<int>& list = lists[it->second];
      std::unordered_set<int> seen;
      for (const auto& cid : collegeList) {
        auto ct = inst.college_index_.find(cid);
        if (ct == inst.college_index_.end())
          throw ValidationError("student " + sid +
                                " ranks unknown college " + cid);
        if (!seen.insert(ct->second).second)
          throw ValidationError("student " + sid + " ranks " + cid +
                                " twice");
        list.push_back(ct->second);
      }
    }
    inst.adoptPreferences(std::move(lists));
    return inst;
  }

  // Index-based constructor for generated instances (enumeration, random
  // testing). scoresDescending must already be sorted strictly descending.
  ProblemInstance(std::vector<Score> scoresDescending,
                  std::vector<int> capacities,
                  std::vector<std::vector<int>> preferenceLists) {
    if (scoresDescending.empty()) throw ValidationError("no students");
    if (capacities.empty()) throw ValidationError("no colleges");
    if (preferenceLists.size() != scoresDescending.size())
      throw ValidationError("preference list count != student count");
    scores_ = std::move(scoresDescending);
    capacities_ = std::move(capacities);
    for (std::size_t i = 0; i < scores_.size(); ++i) {
      if (!(scores_[i] > 0)) throw ValidationError("score must be > 0");
      if (i > 0 && !(scores_[i - 1] > scores_[i]))
        throw ValidationError("scores must be strictly descending");
      student_ids_.push_back("s" + std::to_string(i + 1));
      student_index_.emplace(student_ids_.back(), i);
    }
    for (std::size_t c = 0; c < capacities_.size(); ++c) {
      if (capacities_[c] < 1) throw ValidationError("capacity must be >= 1");
      college_ids_.push_back("c" + std::to_string(c + 1));
      college_index_.emplace(college_ids_.back(), c);
    }
    for (const auto& list : preferenceLists) {
      std::unordered_set<int> seen;
      for (int c : list)
        if (c < 0 || c >= numColleges() || !seen.insert(c).second)
          throw ValidationError("bad preference list entry");
    }
    adoptPreferences(std::move(preferenceLists));
  }

  int numStudents() const { return static_cast<int>(scores_.size()); }
  int numColleges() const { return static_cast<int>(capacities_.size()); }

  Score score(int student) const { return scores_[student]; }
  int capacity(int college) const { return capacities_[college]; }
  const std::vector<int>& capacities() const { return capacities_; }

  const std::string& studentId(int student) const {
    return student_ids_[student];
  }
  const std::string& collegeId(int college) const {
    return college_ids_[college];
  }
  int studentIndex(const std::string& id) const {
    auto it = student_index_.find(id);
    if (it == student_index_.end())
      throw ValidationError("unknown student id " + id);
    return static_cast<int>(it->second);
  }
  int collegeIndex(const std::string& id) const {
    auto it = college_index_.find(id);
    if (it == college_index_.end())
      throw ValidationError("unknown college id " + id);
    return static_cast<int>(it->second);
  }

  // Acceptable colleges of a student, most preferred first.
  const std::vector<int>& acceptable(int student) const {
    return acceptable_[student];
  }
  // Rank of the outside option: every listed college beats it, every
  // unlisted college loses to it.
  int outsideRank(int student) const {
    return static_cast<int>(acceptable_[student].size());
  }
  // Rank of an assignment option (college index or kUnassigned). Lower is
  // better. Unlisted colleges share outsideRank()+1; they only ever appear
  // in externally supplied matchings and are all "worse than unassigned".
  int prefRank(int student, int option) const {
    if (option == kUnassigned) return outsideRank(student);
    int r = rank_of_[student][option];
    return r >= 0 ? r : outsideRank(student) + 1;
  }
  bool prefers(int student, int optionA, int optionB) const {
    return prefRank(student, optionA) < prefRank(student, optionB);
  }

 private:
  ProblemInstance() = default;

  void adoptPreferences(std::vector<std::vector<int>> lists) {
    lists.resize(scores_.size());
    acceptable_ = std::move(lists);
    rank_of_.assign(numStudents(), std::vector<int>(numColleges(), -1));
    for (int i = 0; i < numStudents(); ++i)
      for (std::size_t r = 0; r < acceptable_[i].size(); ++r)
        rank_of_[i][acceptable_[i][r]] = static_cast<int>(r);
  }

  std::vector<std::string> student_ids_;
  std::vector<Score> scores_;  // strictly descending
  std::vector<std::string> college_ids_;
  std::vector<int> capacities_;
  std::vector<std::vector<int>> acceptable_;  // per student, college indices
  std::vector<std::vector<int>> rank_of_;     // [student][college] or -1
  std::unordered_map<std::string, std::size_t> student_index_;
  std::unordered_map<std::string, std::size_t> college_index_;
};

// Assignment of every student to a college index or kUnassigned.
struct Matching {
  std::vector<int> assignment;

  bool operator==(const Matching&) const = default;
  int of(int student) const { return assignment[student]; }
};

// Per-college cutoffs: the minimum score among assigned students when the
// college is at capacity, 0 when seats remain.
struct CutoffVector {
  std::vector<Score> cutoff;

  bool operator==(const CutoffVector&) const = default;
};

struct AuditReport {
  std::vector<std::pair<int, int>> blockingPairs;  // (student, college)
  std::vector<int> blockingStudents;  // prefer outside option to assignment
  bool isStable = false;
  int justifiedEnvyCount = 0;
};

enum class ParetoOrder { ADominates, BDominates, Equal, Incomparable };
enum class OutcomeDelta { Better, Worse, Same };

inline void validateMatching(const ProblemInstance& inst, const Matching& mu) {
  if (static_cast<int>(mu.assignment.size()) != inst.numStudents())
    throw ValidationError("matching size != student count");
  std::vector<int> fill(inst.numColleges(), 0);
  for (int a : mu.assignment) {
    if (a == kUnassigned) continue;
    if (a < 0 || a >= inst.numColleges())
      throw ValidationError("matching references unknown college");
    if (++fill[a] > inst.capacity(a))
      throw ValidationError("capacity exceeded at " + inst.collegeId(a));
  }
}

inline CutoffVector computeCutoffs(const ProblemInstance& inst,
                                   const Matching& mu) {
  validateMatching(inst, mu);
  std::vector<int> fill(inst.numColleges(), 0);
  std::vector<Score> minScore(inst.numColleges(),
                              std::numeric_limits<Score>::max());
  for (int i = 0; i < inst.numStudents(); ++i) {
    int c = mu.of(i);
    if (c == kUnassigned) continue;
    ++fill[c];
    minScore[c] = std::min(minScore[c], inst.score(i));
  }
  CutoffVector out;
  out.cutoff.resize(inst.numColleges());
  for (int c = 0; c < inst.numColleges(); ++c)
    out.cutoff[c] = fill[c] == inst.capacity(c) ? minScore[c] : 0;
  return out;
}

// Enumerates every blocking student (outside option preferred to own seat)
// and every blocking student-college pair (student prefers c, and c has a
// free seat or holds somebody with a lower score).
inline AuditReport auditStability(const ProblemInstance& inst,
                                  const Matching& mu) {
  validateMatching(inst, mu);
  std::vector<int> fill(inst.numColleges(), 0);
  std::vector<Score> minScore(inst.numColleges(),
                              std::numeric_limits<Score>::max());
  for (int i = 0; i < inst.numStudents(); ++i) {
    int c = mu.of(i);
    if (c == kUnassigned) continue;
    ++fill[c];
    minScore[c] = std::min(minScore[c], inst.score(i));
  }

  AuditReport report;
  std::vector<char> envious(inst.numStudents(), 0);
  for (int i = 0; i < inst.numStudents(); ++i) {
    int own = mu.of(i);
    int ownRank = inst.prefRank(i, own);
    if (own != kUnassigned && ownRank > inst.outsideRank(i))
      report.blockingStudents.push_back(i);
    for (int c : inst.acceptable(i)) {
      if (inst.prefRank(i, c) >= ownRank) break;  // list is in rank order
      bool freeSeat = fill[c] < inst.capacity(c);
      bool beatsWorst = fill[c] > 0 && inst.score(i) > minScore[c] &&
                        fill[c] == inst.capacity(c);
      if (freeSeat || beatsWorst) {
        report.blockingPairs.emplace_back(i, c);
        envious[i] = 1;
      }
    }
  }
  report.justifiedEnvyCount =
      static_cast<int>(std::count(envious.begin(), envious.end(), 1));
  report.isStable =
      report.blockingPairs.empty() && report.blockingStudents.empty();
  return report;
}

inline ParetoOrder paretoCompare(const ProblemInstance& inst,
                                 const Matching& a, const Matching& b) {
  validateMatching(inst, a);
  validateMatching(inst, b);
  bool aBetterSomewhere = false, bBetterSomewhere = false;
  for (int i = 0; i < inst.numStudents(); ++i) {
    int ra = inst.prefRank(i, a.of(i));
    int rb = inst.prefRank(i, b.of(i));
    if (ra < rb) aBetterSomewhere = true;
    if (rb < ra) bBetterSomewhere = true;
  }
  if (aBetterSomewhere && bBetterSomewhere) return ParetoOrder::Incomparable;
  if (aBetterSomewhere) return ParetoOrder::ADominates;
  if (bBetterSomewhere) return ParetoOrder::BDominates;
  return ParetoOrder::Equal;
}

// Per-student view of moving from the DA outcome to the TCDM outcome.
inline std::vector<OutcomeDelta> winnersAndLosers(const ProblemInstance& inst,
                                                  const Matching& tcdm,
                                                  const Matching& da) {
  validateMatching(inst, tcdm);
  validateMatching(inst, da);
  std::vector<OutcomeDelta> out(inst.numStudents(), OutcomeDelta::Same);
  for (int i = 0; i < inst.numStudents(); ++i) {
    int rt = inst.prefRank(i, tcdm.of(i));
    int rd = inst.prefRank(i, da.of(i));
    if (rt < rd)
      out[i] = OutcomeDelta::Better;
    else if (rt > rd)
      out[i] = OutcomeDelta::Worse;
  }
  return out;
}

}  // namespace tcdm
