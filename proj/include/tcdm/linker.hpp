#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "tcdm/imsim.hpp"

// Backtracking record linkage over hourly university-level snapshots.
// Starting from the last hour, rows of the earlier hour receive the ids of
// the later hour: frozen batches carry over exactly, then within each
// university rows match on the four characteristics plus program choices
// (Rule 1), then on the characteristics alone (Rule 2), then leftover later
// rows search the other universities, and whatever remains gets a fresh id.
// Ambiguities always resolve by data order, which the simulator keeps stable,
// and are logged rather than treated as errors.

namespace tcdm::linker {

using imsim::ApplicantRow;
using imsim::BatchSchedule;
using imsim::GroundTruth;
using imsim::Snapshots;

struct LinkKey {
  int scoreWithBonus = 0;
  int examScore = 0;
  int gender = 0;
  int ethnicity = 0;

  bool operator==(const LinkKey&) const = default;
  auto operator<=>(const LinkKey&) const = default;
};

inline LinkKey keyOf(const ApplicantRow& row) {
  return {row.scoreWithBonus, row.examScore, row.gender, row.ethnicity};
}

struct LinkKeyHash {
  std::size_t operator()(const LinkKey& k) const {
    std::uint64_t h = splitmix64(static_cast<std::uint64_t>(k.scoreWithBonus));
    h = splitmix64(h ^ static_cast<std::uint64_t>(k.examScore));
    h = splitmix64(h ^ static_cast<std::uint64_t>(k.gender) << 1);
    h = splitmix64(h ^ static_cast<std::uint64_t>(k.ethnicity) << 2);
    return static_cast<std::size_t>(h);
  }
};

enum class LinkRule {
  Seed,            // hour-H rows, where ids are introduced
  FrozenCarry,
  Rule1,           // same university, characteristics and program choices
  Rule2,           // same university, characteristics only
  CrossUniversity,
  Fresh,           // unmatched row at an hour before the last
};

inline const char* linkRuleName(LinkRule r) {
  switch (r) {
    case LinkRule::Seed: return "seed";
    case LinkRule::FrozenCarry: return "frozen_carry";
    case LinkRule::Rule1: return "rule1";
    case LinkRule::Rule2: return "rule2";
    case LinkRule::CrossUniversity: return "cross_university";
    case LinkRule::Fresh: return "fresh";
  }
  return "?";
}

struct ChangeEvent {
  int id = 0;
  int hour = 0;  // hour at which the new university is first seen
  int fromUniversity = 0;
  int toUniversity = 0;

  bool operator==(const ChangeEvent&) const = default;
  auto operator<=>(const ChangeEvent&) const = default;
};

struct LinkageResult {
  int totalHours = 0;
  // [hour-1][university][row]
  std::vector<std::vector<std::vector<int>>> assignedIds;
  std::vector<std::vector<std::vector<LinkRule>>> ruleAttribution;
  int newIdCount = 0;  // fresh ids at hours before the last
  int idCount = 0;
  std::vector<ChangeEvent> inferredChangeEvents;
  std::vector<std::string> warnings;
};

// An id appears at most once per hour, so the row an id was inherited from
// is recoverable from the assignment itself.
inline std::vector<ChangeEvent> deriveChangeEvents(
    const std::vector<std::vector<std::vector<int>>>& assignedIds,
    int idCount) {
  std::vector<std::vector<std::pair<int, int>>> trackById(
      static_cast<std::size_t>(idCount));
  for (std::size_t h = 0; h < assignedIds.size(); ++h)
    for (std::size_t u = 0; u < assignedIds[h].size(); ++u)
      for (int id : assignedIds[h][u])
        trackById[id].emplace_back(static_cast<int>(h) + 1,
                                   static_cast<int>(u));
  std::vector<ChangeEvent> events;
  for (std::size_t id = 0; id < trackById.size(); ++id) {
    auto& track = trackById[id];
    std::sort(track.begin(), track.end());
    for (std::size_t j = 1; j < track.size(); ++j)
      if (track[j].first == track[j - 1].first + 1 &&
          track[j].second != track[j - 1].second)
        events.push_back({static_cast<int>(id), track[j].first,
                          track[j - 1].second, track[j].second});
  }
  return events;
}

namespace detail {

struct RowRef {
  int uni = 0;
  int row = 0;
};

// Queue of row indices per key, preserving data order.
template <typename Key, typename Hash = std::hash<Key>>
using OrderedBuckets = std::unordered_map<Key, std::deque<int>, Hash>;

struct FullRecordKey {
  ApplicantRow row;
  bool operator==(const FullRecordKey&) const = default;
};

struct FullRecordHash {
  std::size_t operator()(const FullRecordKey& k) const {
    LinkKeyHash lk;
    std::uint64_t h = lk(keyOf(k.row));
    for (int p : k.row.programs) h = splitmix64(h ^ static_cast<std::uint64_t>(p));
    h = splitmix64(h ^ (k.row.acceptAny ? 1u : 0u));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

inline LinkageResult linkSnapshots(const Snapshots& snapshots,
                                   const BatchSchedule& schedule) {
  const int H = snapshots.totalHours;
  if (H < 1) throw ValidationError("empty snapshot set");
  const int numUnis =
      H > 0 ? static_cast<int>(snapshots.hourly[0].size()) : 0;

  LinkageResult result;
  result.totalHours = H;
  result.assignedIds.resize(H);
  result.ruleAttribution.resize(H);
  result.donors.resize(H);
  for (int h = 1; h <= H; ++h) {
    result.assignedIds[h - 1].resize(numUnis);
    result.ruleAttribution[h - 1].resize(numUnis);
    result.donors[h - 1].resize(numUnis);
    for (int u = 0; u < numUnis; ++u) {
      std::size_t rows = snapshots.hourly[h - 1][u].rows.size();
      result.assignedIds[h - 1][u].assign(rows, -1);
      result.ruleAttribution[h - 1][u].assign(rows, LinkRule::Fresh);
      result.donors[h - 1][u].assign(rows, {});
    }
  }

  int nextId = 0;
  for (int u = 0; u < numUnis; ++u)
    for (std::size_t k = 0; k < snapshots.hourly[H - 1][u].rows.size(); ++k) {
      result.assignedIds[H - 1][u][k] = nextId++;
      result.ruleAttribution[H - 1][u][k] = LinkRule::Seed;
    }

  // A row is frozen at hour h when its batch deadline has passed; rows whose
  // score fits no batch band are malformed input, warned about once and
  // treated as always active.
  int unbandable = 0;
  auto frozenAt = [&](const ApplicantRow& row, int hour) {
    try {
      return schedule.deadlineOf(row.scoreWithBonus) <= hour;
    } catch (const ValidationError&) {
      ++unbandable;
      return false;
    }
  };

  int ambiguousKeys = 0;

  for (int h = H - 1; h >= 1; --h) {
    const auto& later = snapshots.hourly[h];      // hour h+1
    const auto& earlier = snapshots.hourly[h - 1];  // hour h
    auto& ids = result.assignedIds[h - 1];
    auto& rules = result.ruleAttribution[h - 1];
    auto& donors = result.donors[h - 1];

    std::vector<std::vector<char>> donorUsed(numUnis);
    for (int u = 0; u < numUnis; ++u)
      donorUsed[u].assign(later[u].rows.size(), 0);

    auto adopt = [&](int takerUni, int takerRow, int donorUni, int donorRow,
                     LinkRule rule) {
      ids[takerUni][takerRow] = result.assignedIds[h][donorUni][donorRow];
      rules[takerUni][takerRow] = rule;
      donors[takerUni][takerRow] = {donorUni, donorRow};
      donorUsed[donorUni][donorRow] = 1;
    };

    // (a) Frozen rows cannot have changed between the two hours: carry ids
    // within each university, matching identical records in data order.
    for (int u = 0; u < numUnis; ++u) {
      detail::OrderedBuckets<detail::FullRecordKey, detail::FullRecordHash>
          frozenDonors;
      for (std::size_t k = 0; k < later[u].rows.size(); ++k)
        if (frozenAt(later[u].rows[k], h))
          frozenDonors[{later[u].rows[k]}].push_back(static_cast<int>(k));
      for (std::size_t k = 0; k < earlier[u].rows.size(); ++k) {
        const auto& row = earlier[u].rows[k];
        if (!frozenAt(row, h)) continue;
        auto it = frozenDonors.find({row});
        if (it == frozenDonors.end() || it->second.empty()) {
          result.warnings.push_back(
              "hour " + std::to_string(h) + " university " + std::to_string(u) +
              ": frozen row has no identical counterpart in the next hour");
          continue;  // falls through to the active rules below
        }
        if (it->second.size() > 1) ++ambiguousKeys;
        adopt(u, static_cast<int>(k), u, it->second.front(),
              LinkRule::FrozenCarry);
        it->second.pop_front();
      }
    }

    // (b) Rule 1 within each university: same characteristics and the same
    // program choices.
    for (int u = 0; u < numUnis; ++u) {
      detail::OrderedBuckets<detail::FullRecordKey, detail::FullRecordHash>
          donorsByRecord;
      for (std::size_t k = 0; k < later[u].rows.size(); ++k)
        if (!donorUsed[u][k])
          donorsByRecord[{later[u].rows[k]}].push_back(static_cast<int>(k));
      for (std::size_t k = 0; k < earlier[u].rows.size(); ++k) {
        if (ids[u][k] != -1) continue;
        auto it = donorsByRecord.find({earlier[u].rows[k]});
        if (it == donorsByRecord.end() || it->second.empty()) continue;
        if (it->second.size() > 1) ++ambiguousKeys;
        adopt(u, static_cast<int>(k), u, it->second.front(), LinkRule::Rule1);
        it->second.pop_front();
      }
    }

    // (c) Rule 2 within each university: same characteristics only.
    for (int u = 0; u < numUnis; ++u) {
      detail::OrderedBuckets<LinkKey, LinkKeyHash> donorsByKey;
      for (std::size_t k = 0; k < later[u].rows.size(); ++k)
        if (!donorUsed[u][k])
          donorsByKey[keyOf(later[u].rows[k])].push_back(static_cast<int>(k));
      for (std::size_t k = 0; k < earlier[u].rows.size(); ++k) {
        if (ids[u][k] != -1) continue;
        auto it = donorsByKey.find(keyOf(earlier[u].rows[k]));
        if (it == donorsByKey.end() || it->second.empty()) continue;
        if (it->second.size() > 1) ++ambiguousKeys;
        adopt(u, static_cast<int>(k), u, it->second.front(), LinkRule::Rule2);
        it->second.pop_front();
      }
    }

    // (d) Later rows that appeared in their university only at hour h+1 look
    // for takers with the same characteristics in the other universities;
    // both sides scan in data order.
    {
      detail::OrderedBuckets<LinkKey, LinkKeyHash> takersByKey;
      std::vector<std::vector<detail::RowRef>> takerRefs;  // flat index -> ref
      std::vector<detail::RowRef> flat;
      for (int u = 0; u < numUnis; ++u)
        for (std::size_t k = 0; k < earlier[u].rows.size(); ++k)
          if (ids[u][k] == -1) {
            takersByKey[keyOf(earlier[u].rows[k])].push_back(
                static_cast<int>(flat.size()));
            flat.push_back({u, static_cast<int>(k)});
          }
      std::vector<char> takerUsed(flat.size(), 0);
      for (int du = 0; du < numUnis; ++du) {
        for (std::size_t dk = 0; dk < later[du].rows.size(); ++dk) {
          if (donorUsed[du][dk]) continue;
          auto it = takersByKey.find(keyOf(later[du].rows[dk]));
          if (it == takersByKey.end()) continue;
          auto& queue = it->second;
          while (!queue.empty() && takerUsed[queue.front()])
            queue.pop_front();
          // first unused taker outside the donor's own university; same-
          // university takers stay available for other donors
          for (std::size_t pos = 0; pos < queue.size(); ++pos) {
            int flatIdx = queue[pos];
            if (takerUsed[flatIdx] || flat[flatIdx].uni == du) continue;
            adopt(flat[flatIdx].uni, flat[flatIdx].row, du,
                  static_cast<int>(dk), LinkRule::CrossUniversity);
            takerUsed[flatIdx] = 1;
            break;
          }
        }
      }
    }

    // (e) Fresh ids for whatever is left at the earlier hour.
    for (int u = 0; u < numUnis; ++u)
      for (std::size_t k = 0; k < earlier[u].rows.size(); ++k)
        if (ids[u][k] == -1) {
          ids[u][k] = nextId++;
          rules[u][k] = LinkRule::Fresh;
          ++result.newIdCount;
        }
  }

  if (unbandable > 0)
    result.warnings.push_back(std::to_string(unbandable) +
                              " rows fit no batch band; treated as active");
  if (ambiguousKeys > 0)
    result.warnings.push_back(
        std::to_string(ambiguousKeys) +
        " multi-candidate matches resolved by data order");

  result.idCount = nextId;

  // Inferred change events: an id observed at different universities in
  // consecutive hours.
  std::vector<std::vector<std::pair<int, int>>> trackById(
      static_cast<std::size_t>(nextId));  // id -> (hour, uni)
  for (int h = 1; h <= H; ++h)
    for (int u = 0; u < numUnis; ++u)
      for (int id : result.assignedIds[h - 1][u])
        trackById[id].emplace_back(h, u);
  for (int id = 0; id < nextId; ++id) {
    auto& track = trackById[id];
    std::sort(track.begin(), track.end());
    for (std::size_t j = 1; j < track.size(); ++j)
      if (track[j].first == track[j - 1].first + 1 &&
          track[j].second != track[j - 1].second)
        result.inferredChangeEvents.push_back(
            {id, track[j].first, track[j - 1].second, track[j].second});
  }
  return result;
}

// --- Scoring against simulator ground truth ---

struct LinkageScore {
  double idPrecision = 0;    // aligned row accuracy; see alignment note below
  double idRecall = 0;
  double changeEventPrecision = 0;
  double changeEventRecall = 0;
  double frozenLinkAccuracy = 1.0;
  double frozenUniqueLinkAccuracy = 1.0;  // frozen rows with a unique LinkKey
  long long frozenUniqueLinks = 0;
  std::map<std::string, std::pair<long long, long long>>
      perRuleCorrectTotal;  // rule name -> (correct links, total links)
  std::map<int, long long> duplicatesPerKeyHistogram;  // multiplicity -> keys
  long long inferredChangeCount = 0;
  long long trueChangeCount = 0;
  long long totalRows = 0;
};

namespace detail {

// Exact maximum-agreement alignment between inferred and true ids, computed
// per connected component of the overlap graph. Components are brute-forced
// when small; oversized ones (pathological inputs) fall back to greedy
// weight-descending assignment.
inline std::unordered_map<int, int> alignIds(
    const std::map<std::pair<int, int>, long long>& overlap) {
  std::unordered_map<int, std::vector<std::pair<int, long long>>> byInferred;
  std::unordered_map<int, std::vector<int>> byTrue;
  for (const auto& [pair, w] : overlap) {
    byInferred[pair.first].emplace_back(pair.second, w);
    byTrue[pair.second].push_back(pair.first);
  }

  std::unordered_map<int, int> alignment;
  std::unordered_map<int, char> seenInferred;

  for (const auto& [seedId, _] : byInferred) {
    if (seenInferred.count(seedId)) continue;
    // Collect the component.
    std::vector<int> compInferred;
    std::vector<int> stack{seedId};
    std::unordered_map<int, char> seenTrue;
    seenInferred[seedId] = 1;
    while (!stack.empty()) {
      int inf = stack.back();
      stack.pop_back();
      compInferred.push_back(inf);
      for (const auto& [t, w] : byInferred.at(inf)) {
        if (seenTrue.count(t)) continue;
        seenTrue[t] = 1;
        for (int other : byTrue.at(t))
          if (!seenInferred.count(other)) {
            seenInferred[other] = 1;
            stack.push_back(other);
          }
      }
    }
    std::vector<int> compTrue;
    for (const auto& [t, _2] : seenTrue) compTrue.push_back(t);
    std::sort(compInferred.begin(), compInferred.end());
    std::sort(compTrue.begin(), compTrue.end());

    auto weight = [&](int inf, int t) -> long long {
      auto it = overlap.find({inf, t});
      return it == overlap.end() ? 0 : it->second;
    };

    if (compInferred.size() <= 8 && compTrue.size() <= 12) {
      // Brute-force over injections of the smaller side.
      const bool inferredSmaller = compInferred.size() <= compTrue.size();
      const auto& small = inferredSmaller ? compInferred : compTrue;
      const auto& large = inferredSmaller ? compTrue : compInferred;
      std::vector<char> used(large.size(), 0);
      std::vector<int> best;
      long long bestScore = -1;
      std::vector<int> cur(small.size(), -1);
      auto rec = [&](auto&& self, std::size_t idx, long long acc) -> void {
        if (idx == small.size()) {
          if (acc > bestScore) {
            bestScore = acc;
            best = cur;
          }
          return;
        }
        // Option: leave unmatched.
        self(self, idx + 1, acc);
        for (std::size_t j = 0; j < large.size(); ++j) {
          if (used[j]) continue;
          long long w = inferredSmaller ? weight(small[idx], large[j])
                                        : weight(large[j], small[idx]);
          if (w == 0) continue;
          used[j] = 1;
          cur[idx] = static_cast<int>(j);
          self(self, idx + 1, acc + w);
          cur[idx] = -1;
          used[j] = 0;
        }
      };
      rec(rec, 0, 0);
      for (std::size_t i = 0; i < small.size(); ++i) {
        if (best.empty() || best[i] < 0) continue;
        int inf = inferredSmaller ? small[i] : large[best[i]];
        int tru = inferredSmaller ? large[best[i]] : small[i];
        alignment[inf] = tru;
      }
    } else {
      // Greedy fallback: heaviest overlaps first, deterministic tie-break.
      std::vector<std::tuple<long long, int, int>> edges;
      for (int inf : compInferred)
        for (const auto& [t, w] : byInferred.at(inf))
          edges.emplace_back(w, inf, t);
      std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b))
          return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b))
          return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
      });
      std::unordered_map<int, char> trueTaken;
      for (const auto& [w, inf, t] : edges) {
        if (alignment.count(inf) || trueTaken.count(t)) continue;
        alignment[inf] = t;
        trueTaken[t] = 1;
      }
    }
  }
  return alignment;
}

}  // namespace detail

inline LinkageScore scoreLinkage(const LinkageResult& result,
                                 const GroundTruth& truth,
                                 const Snapshots& snapshots) {
  const int H = result.totalHours;
  if (static_cast<int>(truth.rowIds.size()) != H)
    throw ValidationError("ground truth does not cover every hour");
  LinkageScore score;

  std::map<std::pair<int, int>, long long> overlap;
  for (int h = 1; h <= H; ++h) {
    if (truth.rowIds[h - 1].size() != result.assignedIds[h - 1].size())
      throw ValidationError("ground truth / snapshot shape mismatch");
    for (std::size_t u = 0; u < truth.rowIds[h - 1].size(); ++u) {
      if (truth.rowIds[h - 1][u].size() != result.assignedIds[h - 1][u].size())
        throw ValidationError("ground truth rows mismatch at hour " +
                              std::to_string(h));
      for (std::size_t k = 0; k < truth.rowIds[h - 1][u].size(); ++k) {
        ++overlap[{result.assignedIds[h - 1][u][k],
                   truth.rowIds[h - 1][u][k]}];
        ++score.totalRows;
      }
    }
  }
  auto alignment = detail::alignIds(overlap);

  long long correctRows = 0;
  for (int h = 1; h <= H; ++h)
    for (std::size_t u = 0; u < truth.rowIds[h - 1].size(); ++u)
      for (std::size_t k = 0; k < truth.rowIds[h - 1][u].size(); ++k) {
        auto it = alignment.find(result.assignedIds[h - 1][u][k]);
        if (it != alignment.end() && it->second == truth.rowIds[h - 1][u][k])
          ++correctRows;
      }
  score.idPrecision = score.totalRows
                          ? static_cast<double>(correctRows) / score.totalRows
                          : 1.0;
  score.idRecall = score.idPrecision;  // every row carries exactly one id on
                                       // both sides, so the rates coincide

  // Per-rule link accuracy: a link is correct when the row and its donor row
  // belong to the same true student.
  long long frozenCorrect = 0, frozenTotal = 0;
  long long frozenUniqueCorrect = 0;
  for (int h = 1; h < H; ++h) {
    // LinkKey multiplicities per university at this hour, for the
    // unique-key subset.
    std::vector<std::unordered_map<LinkKey, int, LinkKeyHash>> keyCount(
        snapshots.hourly[h - 1].size());
    for (std::size_t u = 0; u < snapshots.hourly[h - 1].size(); ++u)
      for (const auto& row : snapshots.hourly[h - 1][u].rows)
        ++keyCount[u][keyOf(row)];

    for (std::size_t u = 0; u < truth.rowIds[h - 1].size(); ++u)
      for (std::size_t k = 0; k < truth.rowIds[h - 1][u].size(); ++k) {
        LinkRule rule = result.ruleAttribution[h - 1][u][k];
        auto donor = result.donors[h - 1][u][k];
        auto& tally = score.perRuleCorrectTotal[linkRuleName(rule)];
        bool correct = false;
        if (donor.university >= 0) {
          correct = truth.rowIds[h][donor.university][donor.row] ==
                    truth.rowIds[h - 1][u][k];
        }
        ++tally.second;
        if (correct) ++tally.first;
        if (rule == LinkRule::FrozenCarry) {
          ++frozenTotal;
          if (correct) ++frozenCorrect;
          if (keyCount[u][keyOf(snapshots.hourly[h - 1][u].rows[k])] == 1) {
            ++score.frozenUniqueLinks;
            if (correct) ++frozenUniqueCorrect;
          }
        }
      }
  }
  score.frozenLinkAccuracy =
      frozenTotal ? static_cast<double>(frozenCorrect) / frozenTotal : 1.0;
  score.frozenUniqueLinkAccuracy =
      score.frozenUniqueLinks
          ? static_cast<double>(frozenUniqueCorrect) / score.frozenUniqueLinks
          : 1.0;

  // True change events from the ground truth trajectories.
  std::unordered_map<int, std::vector<std::pair<int, int>>> trueTrack;
  for (int h = 1; h <= H; ++h)
    for (std::size_t u = 0; u < truth.rowIds[h - 1].size(); ++u)
      for (int sid : truth.rowIds[h - 1][u])
        trueTrack[sid].emplace_back(h, static_cast<int>(u));
  std::vector<ChangeEvent> trueEvents;
  for (auto& [sid, track] : trueTrack) {
    std::sort(track.begin(), track.end());
    for (std::size_t j = 1; j < track.size(); ++j)
      if (track[j].first == track[j - 1].first + 1 &&
          track[j].second != track[j - 1].second)
        trueEvents.push_back(
            {sid, track[j].first, track[j - 1].second, track[j].second});
  }
  score.trueChangeCount = static_cast<long long>(trueEvents.size());
  score.inferredChangeCount =
      static_cast<long long>(result.inferredChangeEvents.size());

  std::map<std::tuple<int, int, int, int>, long long> trueEventSet;
  for (const auto& e : trueEvents)
    ++trueEventSet[{e.id, e.hour, e.fromUniversity, e.toUniversity}];
  long long correctEvents = 0;
  for (const auto& e : result.inferredChangeEvents) {
    auto it = alignment.find(e.id);
    if (it == alignment.end()) continue;
    auto key = std::make_tuple(it->second, e.hour, e.fromUniversity,
                               e.toUniversity);
    auto te = trueEventSet.find(key);
    if (te != trueEventSet.end() && te->second > 0) {
      ++correctEvents;
      --te->second;
    }
  }
  score.changeEventPrecision =
      score.inferredChangeCount
          ? static_cast<double>(correctEvents) / score.inferredChangeCount
          : 1.0;
  score.changeEventRecall =
      score.trueChangeCount
          ? static_cast<double>(correctEvents) / score.trueChangeCount
          : 1.0;

  // Collision statistics over the final hour (the full visible population).
  std::unordered_map<LinkKey, long long, LinkKeyHash> keyCounts;
  for (const auto& uni : snapshots.hourly[H - 1])
    for (const auto& row : uni.rows) ++keyCounts[keyOf(row)];
  for (const auto& [key, count] : keyCounts)
    ++score.duplicatesPerKeyHistogram[static_cast<int>(count)];

  return score;
}

}  // namespace tcdm::linker
