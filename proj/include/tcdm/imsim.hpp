#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tcdm/core.hpp"
#include "tcdm/mechanisms.hpp"
#include "tcdm/rng.hpp"

// Staggered-closing clearinghouse simulator. A synthetic cohort with integer
// exam scores (ties allowed, broken by student id) applies to universities
// over a fixed number of hours. Students are divided into score batches with
// hourly staggered deadlines; every hour the clearinghouse recomputes the
// tentative admission and publishes, per university, quotas, cutoffs and the
// full applicant table. Agents follow the straightforward strategy against
// the most recently published cutoffs. Ground-truth identities ride along in
// a separate structure so the record linker can be scored.

namespace tcdm::imsim {

inline constexpr int kNoUniversity = -1;
inline constexpr int kProgramSlots = 6;

// --- Schedule ---

struct BatchBand {
  int scoreLowerBound = 0;  // inclusive, on score including bonus
  int scoreUpperBound = 0;  // inclusive
  int deadlineHour = 0;     // last hour in which the batch may still revise
};

struct BatchSchedule {
  std::vector<BatchBand> batches;  // descending score bands
  int openingHour = 1;
  int mandatoryEntryHour = 1;
  int totalHours = 1;

  void validate() const {
    if (batches.empty()) throw ValidationError("schedule has no batches");
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& band = batches[b];
      if (band.scoreLowerBound > band.scoreUpperBound)
        throw ValidationError("batch band has empty score range");
      if (b > 0) {
        if (band.scoreUpperBound >= batches[b - 1].scoreLowerBound)
          throw ValidationError("batch score bands overlap or are unordered");
        if (band.deadlineHour != batches[b - 1].deadlineHour + 1)
          throw ValidationError(
              "batch deadlines must increase by exactly one hour");
      }
    }
    if (mandatoryEntryHour >= batches.front().deadlineHour)
      throw ValidationError("mandatory entry must precede the first deadline");
    if (openingHour < 1 || mandatoryEntryHour < openingHour)
      throw ValidationError("bad opening/mandatory-entry hours");
    if (totalHours != batches.back().deadlineHour)
      throw ValidationError("totalHours must equal the last batch deadline");
  }

  int batchOf(int scoreWithBonus) const {
    for (std::size_t b = 0; b < batches.size(); ++b)
      if (scoreWithBonus >= batches[b].scoreLowerBound &&
          scoreWithBonus <= batches[b].scoreUpperBound)
        return static_cast<int>(b);
    throw ValidationError("score " + std::to_string(scoreWithBonus) +
                          " falls outside every batch band");
  }

  int deadlineOf(int scoreWithBonus) const {
    return batches[batchOf(scoreWithBonus)].deadlineHour;
  }

  // Contiguous descending bands of `width` points starting at `topLower`,
  // first deadline = mandatoryEntry+1, one extra hour per batch; the last
  // band absorbs everything below.
  static BatchSchedule staggered(int numBatches, int topLower, int width,
                                 int scoreFloor, int firstDeadline,
                                 int openingHour = 1,
                                 int mandatoryEntryHour = 2) {
    BatchSchedule s;
    s.openingHour = openingHour;
    s.mandatoryEntryHour = mandatoryEntryHour;
    int hi = 10000;
    int lo = topLower;
    for (int b = 0; b < numBatches; ++b) {
      if (b == numBatches - 1) lo = scoreFloor;
      s.batches.push_back({lo, hi, firstDeadline + b});
      hi = lo - 1;
      lo -= width;
    }
    s.totalHours = s.batches.back().deadlineHour;
    s.validate();
    return s;
  }

  static BatchSchedule singleBatch(int deadlineHour, int scoreFloor = 0,
                                   int scoreCeil = 10000) {
    if (deadlineHour < 2)
      throw ValidationError(
          "single-batch schedules need the deadline at hour 2 or later");
    BatchSchedule s;
    s.openingHour = 1;
    s.mandatoryEntryHour = 1;
    s.totalHours = deadlineHour;
    s.batches.push_back({scoreFloor, scoreCeil, deadlineHour});
    s.validate();
    return s;
  }
};

// --- Population ---

struct SyntheticStudent {
  int trueId = 0;
  int examScore = 0;
  int bonusPoints = 0;
  int gender = 0;     // 0/1
  int ethnicity = 0;  // categorical code
  std::vector<int> preferences;  // university indices, best first
  bool acceptAnyProgram = true;
  std::uint64_t programSeed = 0;

  int scoreWithBonus() const { return examScore + bonusPoints; }
};

struct University {
  int plannedQuota = 1;
  int finalQuota = 1;
  double commonValue = 0;  // v_u in the correlated-preference draw
};

struct Population {
  std::vector<SyntheticStudent> students;
  std::vector<University> universities;
  int programsPerUniversity = 12;
};

// Program choices are a pure function of (student, university, variant), so
// they stay stable while a student is parked at a university and only move
// when she deliberately revises them.
inline std::array<int, kProgramSlots> programChoices(
    const SyntheticStudent& s, int university, int variant,
    int programsPerUniversity) {
  std::array<int, kProgramSlots> out{};
  RandomStream rng(s.programSeed,
                   static_cast<std::uint64_t>(university) * 7919u +
                       static_cast<std::uint64_t>(variant));
  int count = std::min(kProgramSlots, programsPerUniversity);
  std::vector<int> pool(programsPerUniversity);
  std::iota(pool.begin(), pool.end(), 1);
  for (int k = 0; k < count; ++k) {
    int pick = static_cast<int>(rng.nextBounded(pool.size() - k));
    std::swap(pool[pick], pool[programsPerUniversity - 1 - k]);
    out[k] = pool[programsPerUniversity - 1 - k];
  }
  return out;
}

enum class ScoreDistribution { Normal, Uniform };

struct PopulationConfig {
  int numStudents = 0;
  int numUniversities = 0;

  ScoreDistribution scoreDistribution = ScoreDistribution::Normal;
  int scoreMin = 460, scoreMax = 750;
  double scoreMean = 548, scoreStd = 49;  // Normal only, clamped to the range
  bool distinctScores = false;  // tie-free mode: distinct scores with bonus

  double bonusFraction = 0.24;
  int bonusPoints = 10;
  double femaleShare = 0.49;
  std::vector<double> ethnicityShares = {0.76, 0.21, 0.03};

  double delta = 0.4;  // preference correlation, 0 = i.i.d. uniform
  int quotaMin = 1, quotaMax = 40;
  double quotaExpansion = 1.2;
  int finalQuotaCap = 0;  // 0 = no cap
  int programsPerUniversity = 12;
  double acceptAnyShare = 0.7;

  std::uint64_t seed = 0;

  void validate() const {
    if (numStudents < 1) throw ValidationError("numStudents must be >= 1");
    if (numUniversities < 1)
      throw ValidationError("numUniversities must be >= 1");
    if (scoreMin < 1 || scoreMax < scoreMin)
      throw ValidationError("bad score range");
    if (distinctScores &&
        scoreMax + bonusPoints - scoreMin + 1 < numStudents)
      throw ValidationError("score range too small for distinct scores");
    if (delta < 0 || delta > 1) throw ValidationError("delta not in [0,1]");
    if (quotaMin < 1 || quotaMax < quotaMin)
      throw ValidationError("bad quota range");
    if (quotaExpansion < 1) throw ValidationError("quotaExpansion < 1");
    if (ethnicityShares.empty())
      throw ValidationError("need at least one ethnicity share");
  }
};

inline Population generatePopulation(const PopulationConfig& cfg) {
  cfg.validate();
  Population pop;
  pop.programsPerUniversity = cfg.programsPerUniversity;
  RandomStream uniRng(cfg.seed, 0x101);
  for (int u = 0; u < cfg.numUniversities; ++u) {
    University uni;
    uni.plannedQuota = uniRng.nextInt(cfg.quotaMin, cfg.quotaMax);
    uni.finalQuota = static_cast<int>(
        std::ceil(cfg.quotaExpansion * uni.plannedQuota));
    if (cfg.finalQuotaCap > 0)
      uni.finalQuota = std::min(uni.finalQuota, cfg.finalQuotaCap);
    uni.finalQuota = std::max(uni.finalQuota, uni.plannedQuota);
    uni.commonValue = uniRng.nextDouble();
    pop.universities.push_back(uni);
  }

  RandomStream demoRng(cfg.seed, 0x102);
  std::vector<int> scoresWithBonus(cfg.numStudents);
  std::vector<int> bonus(cfg.numStudents, 0);
  for (int i = 0; i < cfg.numStudents; ++i)
    if (demoRng.nextBernoulli(cfg.bonusFraction)) bonus[i] = cfg.bonusPoints;

  if (cfg.distinctScores) {
    // Sample score-with-bonus without replacement so the tie-break never
    // fires; the TCDM-reduction checks rely on this mode.
    std::vector<int> range;
    for (int s = cfg.scoreMin; s <= cfg.scoreMax + cfg.bonusPoints; ++s)
      range.push_back(s);
    demoRng.shuffle(range);
    for (int i = 0; i < cfg.numStudents; ++i) scoresWithBonus[i] = range[i];
  } else {
    for (int i = 0; i < cfg.numStudents; ++i) {
      int score;
      if (cfg.scoreDistribution == ScoreDistribution::Uniform) {
        score = demoRng.nextInt(cfg.scoreMin, cfg.scoreMax);
      } else {
        double raw = cfg.scoreMean + cfg.scoreStd * demoRng.nextGaussian();
        score = std::clamp(static_cast<int>(std::lround(raw)), cfg.scoreMin,
                           cfg.scoreMax);
      }
      scoresWithBonus[i] = score + bonus[i];
    }
  }

  for (int i = 0; i < cfg.numStudents; ++i) {
    SyntheticStudent s;
    s.trueId = i;
    s.bonusPoints = bonus[i];
    s.examScore = scoresWithBonus[i] - bonus[i];
    s.gender = demoRng.nextBernoulli(cfg.femaleShare) ? 1 : 0;
    double roll = demoRng.nextDouble(), acc = 0;
    s.ethnicity = static_cast<int>(cfg.ethnicityShares.size()) - 1;
    for (std::size_t e = 0; e < cfg.ethnicityShares.size(); ++e) {
      acc += cfg.ethnicityShares[e];
      if (roll < acc) {
        s.ethnicity = static_cast<int>(e);
        break;
      }
    }
    s.acceptAnyProgram = demoRng.nextBernoulli(cfg.acceptAnyShare);
    s.programSeed = splitmix64(cfg.seed ^ splitmix64(0x9000 + i));

    RandomStream prefRng(cfg.seed, 0x20000 + static_cast<std::uint64_t>(i));
    std::vector<double> util(cfg.numUniversities);
    for (int u = 0; u < cfg.numUniversities; ++u)
      util[u] = cfg.delta * pop.universities[u].commonValue +
                (1 - cfg.delta) * prefRng.nextDouble();
    s.preferences.resize(cfg.numUniversities);
    std::iota(s.preferences.begin(), s.preferences.end(), 0);
    std::sort(s.preferences.begin(), s.preferences.end(), [&](int a, int b) {
      return util[a] != util[b] ? util[a] > util[b] : a < b;
    });
    pop.students.push_back(std::move(s));
  }
  return pop;
}

// --- Snapshots ---

struct ApplicantRow {
  int scoreWithBonus = 0;
  int examScore = 0;
  int gender = 0;
  int ethnicity = 0;
  std::array<int, kProgramSlots> programs{};
  bool acceptAny = false;

  bool operator==(const ApplicantRow&) const = default;
};

struct UniversitySnapshot {
  int plannedQuota = 0;
  int finalQuota = 0;
  int cutoffPlanned = 0;  // 0 while seats remain under the planned quota
  int cutoffFinal = 0;    // 0 while seats remain under the final quota
  std::vector<ApplicantRow> rows;  // sorted by score desc (hidden id breaks ties)
};

struct Snapshots {
  int totalHours = 0;
  // hourly[h-1][u] is university u's published table at hour h
  std::vector<std::vector<UniversitySnapshot>> hourly;
};

// Hidden identities, same shape as Snapshots::hourly rows. Written to a
// sidecar file only; the linker never sees it.
struct GroundTruth {
  std::vector<std::vector<std::vector<int>>> rowIds;
};

// --- Outcome metrics (Table-3-style counters plus the hourly rate) ---

struct OutcomeMetrics {
  // [batch][hour-1]: fraction of the batch's visible applicants whose score
  // meets the published cutoff of the university they applied to.
  std::vector<std::vector<double>> tentativeAssignedRateByHourByBatch;
  int changedFinalRoundCount = 0;
  int changedFinalRoundAndRejectedCount = 0;
  int unassignedWithScoreAboveSomePriorCutoffCount = 0;
  long long admittedByRankMeasure = 0;
  long long admittedByCutoffMeasure = 0;
  long long measureDivergence = 0;  // |symmetric difference| of the two sets
  int voidCount = 0;
};

struct BehaviorConfig {
  double rho = 1.0;  // hourly revision-opportunity probability
  double programRevisionProb = 0.0;
  bool consultPlannedCutoff = false;  // agents read the planned-quota cutoff
  double lateEntryFraction = 0.0;     // enter between hour 2 and mandatory entry
  double voidFraction = 0.0;          // never enter; application void
};

struct ClearinghouseResult {
  Snapshots snapshots;
  GroundTruth truth;
  std::vector<int> finalAssignment;  // university index or kNoUniversity
  OutcomeMetrics metrics;
};

namespace detail {

// Tentative holders of one university: highest score-with-bonus first, ties
// by ascending id, up to `quota`.
inline void sortApplicants(std::vector<int>& ids,
                           const std::vector<SyntheticStudent>& students) {
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    int sa = students[a].scoreWithBonus(), sb = students[b].scoreWithBonus();
    return sa != sb ? sa > sb : a < b;
  });
}

inline int cutoffFor(const std::vector<int>& sortedIds, int quota,
                     const std::vector<SyntheticStudent>& students) {
  if (static_cast<int>(sortedIds.size()) < quota) return 0;
  return students[sortedIds[quota - 1]].scoreWithBonus();
}

}  // namespace detail

inline OutcomeMetrics computeMetrics(const Snapshots& snapshots,
                                     const GroundTruth& truth,
                                     const std::vector<int>& finalAssignment,
                                     const Population& pop,
                                     const BatchSchedule& schedule,
                                     int voidCount);

inline ClearinghouseResult runClearinghouse(const Population& pop,
                                            const BatchSchedule& schedule,
                                            const BehaviorConfig& behavior,
                                            std::uint64_t seed) {
  schedule.validate();
  const int n = static_cast<int>(pop.students.size());
  const int numUnis = static_cast<int>(pop.universities.size());
  const int H = schedule.totalHours;
  if (numUnis == 0) throw ValidationError("no universities");

  // Entry hours: most students apply when the system opens; a configured
  // share enters later but before the mandatory hour; a void share never
  // enters and is dropped from the match.
  RandomStream entryRng(seed, 0x7001);
  std::vector<int> entryHour(n, 1);
  int voidCount = 0;
  for (int i = 0; i < n; ++i) {
    double roll = entryRng.nextDouble();
    if (roll < behavior.voidFraction) {
      entryHour[i] = H + 1;  // never enters
      ++voidCount;
    } else if (roll < behavior.voidFraction + behavior.lateEntryFraction &&
               schedule.mandatoryEntryHour >= 2) {
      entryHour[i] = entryRng.nextInt(2, schedule.mandatoryEntryHour);
    }
  }

  RandomStream oppRng(seed, 0x7002);
  std::vector<int> application(n, kNoUniversity);
  std::vector<int> heldAt(n, kNoUniversity);
  std::vector<int> programVariant(n, 0);
  std::vector<int> publishedCutoff(numUnis, 0);  // cutoff agents consult

  ClearinghouseResult result;
  result.snapshots.totalHours = H;
  result.snapshots.hourly.resize(H);
  result.truth.rowIds.resize(H);

  auto straightforward = [&](int i) {
    const auto& s = pop.students[i];
    if (heldAt[i] != kNoUniversity) return heldAt[i];
    for (int u : s.preferences)
      if (s.scoreWithBonus() >= publishedCutoff[u]) return u;
    // Nothing affordable: an applicant stays put; a new entrant still has to
    // enter a choice to stay eligible, so she enters her top preference.
    return application[i] != kNoUniversity ? application[i]
                                           : s.preferences.front();
  };

  for (int h = 1; h <= H; ++h) {
    for (int i = 0; i < n; ++i) {
      if (entryHour[i] > h) continue;  // not entered (or void)
      int deadline = schedule.deadlineOf(pop.students[i].scoreWithBonus());
      if (h > deadline) continue;  // frozen
      bool forced = (h == entryHour[i]) || (h == deadline);
      if (!forced && !oppRng.nextBernoulli(behavior.rho)) continue;
      int target = straightforward(i);
      application[i] = target;
      if (heldAt[i] != kNoUniversity &&
          behavior.programRevisionProb > 0 &&
          oppRng.nextBernoulli(behavior.programRevisionProb))
        ++programVariant[i];
    }

    // Tentative matching and published tables for this hour.
    std::vector<std::vector<int>> applicants(numUnis);
    for (int i = 0; i < n; ++i)
      if (application[i] != kNoUniversity) applicants[application[i]].push_back(i);

    auto& hourSnaps = result.snapshots.hourly[h - 1];
    auto& hourIds = result.truth.rowIds[h - 1];
    hourSnaps.assign(numUnis, {});
    hourIds.assign(numUnis, {});
    std::fill(heldAt.begin(), heldAt.end(), kNoUniversity);
    for (int u = 0; u < numUnis; ++u) {
      auto& ids = applicants[u];
      detail::sortApplicants(ids, pop.students);
      const auto& uni = pop.universities[u];
      UniversitySnapshot snap;
      snap.plannedQuota = uni.plannedQuota;
      snap.finalQuota = uni.finalQuota;
      snap.cutoffPlanned = detail::cutoffFor(ids, uni.plannedQuota, pop.students);
      snap.cutoffFinal = detail::cutoffFor(ids, uni.finalQuota, pop.students);
      for (int k = 0; k < static_cast<int>(ids.size()); ++k) {
        const auto& s = pop.students[ids[k]];
        ApplicantRow row;
        row.scoreWithBonus = s.scoreWithBonus();
        row.examScore = s.examScore;
        row.gender = s.gender;
        row.ethnicity = s.ethnicity;
        row.programs = programChoices(s, u, programVariant[ids[k]],
                                      pop.programsPerUniversity);
        row.acceptAny = s.acceptAnyProgram;
        snap.rows.push_back(row);
        hourIds[u].push_back(s.trueId);
        if (k < uni.finalQuota) heldAt[ids[k]] = u;
      }
      publishedCutoff[u] = behavior.consultPlannedCutoff ? snap.cutoffPlanned
                                                         : snap.cutoffFinal;
      hourSnaps[u] = std::move(snap);
    }
  }

  // Finalize: the last tentative matching under the final quota is the
  // admission by the rank measure.
  result.finalAssignment.assign(n, kNoUniversity);
  for (int i = 0; i < n; ++i) result.finalAssignment[i] = heldAt[i];

  result.metrics = computeMetrics(result.snapshots, result.truth,
                                  result.finalAssignment, pop, schedule,
                                  voidCount);
  return result;
}

inline OutcomeMetrics computeMetrics(const Snapshots& snapshots,
                                     const GroundTruth& truth,
                                     const std::vector<int>& finalAssignment,
                                     const Population& pop,
                                     const BatchSchedule& schedule,
                                     int voidCount) {
  const int H = snapshots.totalHours;
  const int numUnis = static_cast<int>(pop.universities.size());
  const int numBatches = static_cast<int>(schedule.batches.size());
  OutcomeMetrics metrics;
  metrics.voidCount = voidCount;

  // Per-hour application of every visible student, from the snapshots.
  std::vector<std::vector<int>> uniAt(H, std::vector<int>(pop.students.size(),
                                                          kNoUniversity));
  for (int h = 1; h <= H; ++h)
    for (int u = 0; u < numUnis; ++u)
      for (int sid : truth.rowIds[h - 1][u]) uniAt[h - 1][sid] = u;

  // Hourly tentative-assignment rate per batch: score meets the published
  // cutoff of the university applied to.
  metrics.tentativeAssignedRateByHourByBatch.assign(
      numBatches, std::vector<double>(H, 0.0));
  for (int h = 1; h <= H; ++h) {
    std::vector<int> seen(numBatches, 0), ok(numBatches, 0);
    for (std::size_t i = 0; i < pop.students.size(); ++i) {
      int u = uniAt[h - 1][i];
      if (u == kNoUniversity) continue;
      int swb = pop.students[i].scoreWithBonus();
      int b = schedule.batchOf(swb);
      ++seen[b];
      if (swb >= snapshots.hourly[h - 1][u].cutoffFinal) ++ok[b];
    }
    for (int b = 0; b < numBatches; ++b)
      metrics.tentativeAssignedRateByHourByBatch[b][h - 1] =
          seen[b] ? static_cast<double>(ok[b]) / seen[b] : 0.0;
  }

  // Final-round change counters, relative to each student's own deadline.
  for (std::size_t i = 0; i < pop.students.size(); ++i) {
    int d = schedule.deadlineOf(pop.students[i].scoreWithBonus());
    if (d < 2 || d > H) continue;
    int before = uniAt[d - 2][i], at = uniAt[d - 1][i];
    if (before == kNoUniversity || at == kNoUniversity) continue;
    if (before != at) {
      ++metrics.changedFinalRoundCount;
      if (finalAssignment[i] == kNoUniversity)
        ++metrics.changedFinalRoundAndRejectedCount;
    }
  }

  // Justified-envy proxy: unassigned, but some university applied to at an
  // earlier hour has a final cutoff the student's score meets.
  const auto& lastHour = snapshots.hourly[H - 1];
  for (std::size_t i = 0; i < pop.students.size(); ++i) {
    if (finalAssignment[i] != kNoUniversity) continue;
    int swb = pop.students[i].scoreWithBonus();
    bool counted = false;
    for (int h = 1; h < H && !counted; ++h) {
      int u = uniAt[h - 1][i];
      if (u != kNoUniversity && swb >= lastHour[u].cutoffFinal) counted = true;
    }
    if (counted) ++metrics.unassignedWithScoreAboveSomePriorCutoffCount;
  }

  // The two admission measures and their divergence, per university over the
  // final-hour tables.
  for (int u = 0; u < numUnis; ++u) {
    const auto& snap = lastHour[u];
    const auto& ids = truth.rowIds[H - 1][u];
    long long byRank = std::min<long long>(snap.finalQuota, ids.size());
    metrics.admittedByRankMeasure += byRank;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      bool rankAdmit = static_cast<int>(k) < snap.finalQuota;
      // cutoff 0 means seats remained, which admits every applicant
      bool cutoffAdmit = snap.rows[k].scoreWithBonus >= snap.cutoffFinal;
      if (cutoffAdmit) ++metrics.admittedByCutoffMeasure;
      if (rankAdmit != cutoffAdmit) ++metrics.measureDivergence;
    }
  }
  return metrics;
}

// Core-instance view of a tie-free population: scores with bonus (strictly
// distinct), final quotas as capacities, full preference lists. Student k in
// the instance is the k-th highest scorer; the returned map carries instance
// index -> trueId.
inline std::pair<ProblemInstance, std::vector<int>> toProblemInstance(
    const Population& pop) {
  std::vector<int> order(pop.students.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return pop.students[a].scoreWithBonus() > pop.students[b].scoreWithBonus();
  });
  std::vector<Score> scores;
  std::vector<std::vector<int>> prefs;
  for (int id : order) {
    scores.push_back(pop.students[id].scoreWithBonus());
    prefs.push_back(pop.students[id].preferences);
  }
  std::vector<int> caps;
  for (const auto& u : pop.universities) caps.push_back(u.finalQuota);
  return {ProblemInstance(std::move(scores), std::move(caps),
                          std::move(prefs)),
          order};
}

}  // namespace tcdm::imsim
