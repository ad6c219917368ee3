#pragma once

#include <algorithm>
#include <deque>
#include <numeric>
#include <optional>
#include <vector>

#include "tcdm/core.hpp"
#include "tcdm/rng.hpp"

// Matching engines: student-proposing deferred acceptance (DA) and the
// time-constrained dynamic mechanism (TCDM) with T simultaneous revision
// rounds, where every student plays the straightforward strategy (apply to
// the most preferred college whose cutoff your score meets; never leave a
// college that tentatively holds you).

namespace tcdm {

struct RoundRecord {
  std::vector<int> applications;  // college index or kUnassigned, per student
  Matching tentative;
  CutoffVector cutoffs;  // cutoffs of `tentative`, published for next round
};

struct TcdmTrajectory {
  int roundBudget = 0;
  bool converged = false;  // applications stopped changing before the budget
  std::vector<RoundRecord> rounds;
  Matching final;
};

// Student-proposing deferred acceptance over the submitted (truthful)
// preference lists. Students propose down their lists; a college keeps the
// highest-scoring proposals up to capacity. Output is the unique stable
// matching of the instance.
inline Matching runDA(const ProblemInstance& inst) {
  const int n = inst.numStudents();
  const int m = inst.numColleges();
  std::vector<int> nextChoice(n, 0);
  std::vector<std::vector<int>> held(m);  // student indices, unordered
  std::deque<int> pending(n);
  std::iota(pending.begin(), pending.end(), 0);

  while (!pending.empty()) {
    int i = pending.front();
    pending.pop_front();
    const auto& list = inst.acceptable(i);
    if (nextChoice[i] >= static_cast<int>(list.size())) continue;  // gives up
    int c = list[nextChoice[i]++];
    auto& seat = held[c];
    if (static_cast<int>(seat.size()) < inst.capacity(c)) {
      seat.push_back(i);
      continue;
    }
    auto worst = std::min_element(seat.begin(), seat.end(),
                                  [&](int a, int b) {
                                    return inst.score(a) < inst.score(b);
                                  });
    if (inst.score(i) > inst.score(*worst)) {
      pending.push_back(*worst);
      *worst = i;
    } else {
      pending.push_back(i);  // rejected, moves on down her list
    }
  }

  Matching mu;
  mu.assignment.assign(n, kUnassigned);
  for (int c = 0; c < m; ++c)
    for (int i : held[c]) mu.assignment[i] = c;
  return mu;
}

// One straightforward-strategy decision. A student held by a college stays
// there. Otherwise she applies to her most preferred listed college whose
// published cutoff her score meets, or to nothing when no listed college is
// affordable.
inline int straightforwardChoice(const ProblemInstance& inst, int student,
                                 const CutoffVector& cutoffs,
                                 int currentlyHeldAt = kUnassigned) {
  if (currentlyHeldAt != kUnassigned) return currentlyHeldAt;
  for (int c : inst.acceptable(student))
    if (inst.score(student) >= cutoffs.cutoff[c]) return c;
  return kUnassigned;
}

namespace detail {

// Tentative matching of one simultaneous round: each college keeps the
// highest-scoring applicants up to capacity.
inline Matching resolveRound(const ProblemInstance& inst,
                             const std::vector<int>& applications) {
  const int m = inst.numColleges();
  std::vector<std::vector<int>> applicants(m);
  for (int i = 0; i < inst.numStudents(); ++i)
    if (applications[i] != kUnassigned) applicants[applications[i]].push_back(i);
  Matching mu;
  mu.assignment.assign(inst.numStudents(), kUnassigned);
  for (int c = 0; c < m; ++c) {
    auto& a = applicants[c];
    int q = inst.capacity(c);
    if (static_cast<int>(a.size()) > q) {
      // applicants arrive in ascending student index = descending score
      a.resize(q);
    }
    for (int i : a) mu.assignment[i] = c;
  }
  return mu;
}

}  // namespace detail

// Runs TCDM for up to T rounds. Round 1 sees all-zero cutoffs, so the
// straightforward choice degenerates to the top of each list. If no
// application changes between consecutive rounds the process has converged
// and the remaining rounds are dropped from the record.
inline TcdmTrajectory runTCDM(const ProblemInstance& inst, int T) {
  if (T < 1) throw ValidationError("TCDM round budget must be >= 1");
  const int n = inst.numStudents();
  TcdmTrajectory traj;
  traj.roundBudget = T;

  CutoffVector published;
  published.cutoff.assign(inst.numColleges(), 0);
  std::vector<int> heldAt(n, kUnassigned);

  for (int t = 1; t <= T; ++t) {
    RoundRecord round;
    round.applications.resize(n);
    for (int i = 0; i < n; ++i)
      round.applications[i] =
          straightforwardChoice(inst, i, published, heldAt[i]);
    if (!traj.rounds.empty() &&
        round.applications == traj.rounds.back().applications) {
      traj.converged = true;
      break;
    }
    round.tentative = detail::resolveRound(inst, round.applications);
    round.cutoffs = computeCutoffs(inst, round.tentative);
    published = round.cutoffs;
    heldAt = round.tentative.assignment;
    traj.rounds.push_back(std::move(round));
  }

  traj.final = traj.rounds.back().tentative;
  return traj;
}

// Smallest round budget for which the TCDM outcome equals the DA outcome.
// Runs the straightforward dynamics with an unbounded budget; because the
// application process is the DA process, the tentative matching reaches the
// stable matching and then stops changing.
inline int minimalConvergenceT(const ProblemInstance& inst) {
  Matching target = runDA(inst);
  // Upper bound on rounds: each student moves at most once per round after a
  // rejection and can be rejected at most |list| times, so n*m+1 suffices.
  int bound = inst.numStudents() * inst.numColleges() + 1;
  TcdmTrajectory traj = runTCDM(inst, bound);
  for (std::size_t t = 0; t < traj.rounds.size(); ++t)
    if (traj.rounds[t].tentative == target) return static_cast<int>(t) + 1;
  throw std::logic_error("TCDM failed to converge to the DA matching");
}

struct DeviationOptions {
  int exhaustiveMaxColleges = 5;  // enumerate all m! target lists up to here
  int sampleCount = 200;          // random target lists otherwise
  std::uint64_t seed = 1;
};

struct DeviationReport {
  bool profitable = false;
  int straightforwardRank = 0;        // deviator's rank under honest play
  int bestRank = 0;                   // best rank over deviations
  std::vector<int> bestTargetList;    // a target list achieving bestRank
  long long strategiesTried = 0;
};

// Checks whether a single student can gain by playing the straightforward
// strategy against a fixed alternative target list instead of her true
// preferences, everyone else honest. Outcomes are always ranked by her true
// preferences.
inline DeviationReport unilateralDeviationCheck(
    const ProblemInstance& inst, int deviator, int T,
    const DeviationOptions& opts = {}) {
  const int m = inst.numColleges();
  std::vector<std::vector<int>> truePrefs;
  for (int i = 0; i < inst.numStudents(); ++i) {
    truePrefs.emplace_back(inst.acceptable(i).begin(),
                           inst.acceptable(i).end());
  }

  DeviationReport report;
  Matching honest = runTCDM(inst, T).final;
  report.straightforwardRank = inst.prefRank(deviator, honest.of(deviator));
  report.bestRank = report.straightforwardRank;

  std::vector<Score> scores;
  for (int i = 0; i < inst.numStudents(); ++i) scores.push_back(inst.score(i));

  auto tryList = [&](const std::vector<int>& target) {
    auto prefs = truePrefs;
    prefs[deviator] = target;
    ProblemInstance alt(scores, inst.capacities(), prefs);
    Matching mu = runTCDM(alt, T).final;
    int rank = inst.prefRank(deviator, mu.of(deviator));  // true preferences
    ++report.strategiesTried;
    if (rank < report.bestRank) {
      report.bestRank = rank;
      report.bestTargetList = target;
      report.profitable = true;
    }
  };

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  if (m <= opts.exhaustiveMaxColleges) {
    std::sort(perm.begin(), perm.end());
    do {
      tryList(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    RandomStream rng(opts.seed, 0);
    for (int k = 0; k < opts.sampleCount; ++k) {
      rng.shuffle(perm);
      tryList(perm);
    }
  }
  return report;
}

}  // namespace tcdm
