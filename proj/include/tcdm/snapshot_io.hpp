#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcdm/imsim.hpp"
#include "tcdm/io.hpp"
#include "tcdm/linker.hpp"

// On-disk layout of a clearinghouse run:
//
//   outdir/
//     schedule.json
//     snapshots/hour_01/u0000.csv ... hour_HH/uNNNN.csv
//     truth_ids.csv            <- ground-truth sidecar, never read by `link`
//     metrics.json
//
// Each snapshot CSV carries a quota/cutoff metadata block followed by the
// applicant rows in published order. All values are integers; no quoting.

namespace tcdm::imsim {

namespace snapshot_detail {

inline std::vector<std::string> splitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline int toInt(const std::string& s, const std::string& what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError(what + ": bad integer \"" + s + "\"");
  return value;
}

inline std::string hourDirName(int hour) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "hour_%02d", hour);
  return buf;
}

inline std::string uniFileName(int uni) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%04d.csv", uni);
  return buf;
}

}  // namespace snapshot_detail

inline nlohmann::json scheduleToJson(const BatchSchedule& schedule) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["opening_hour"] = schedule.openingHour;
  j["mandatory_entry_hour"] = schedule.mandatoryEntryHour;
  j["total_hours"] = schedule.totalHours;
  j["batches"] = nlohmann::json::array();
  for (const auto& b : schedule.batches)
    j["batches"].push_back({{"score_lower", b.scoreLowerBound},
                            {"score_upper", b.scoreUpperBound},
                            {"deadline_hour", b.deadlineHour}});
  return j;
}

inline BatchSchedule scheduleFromJson(const nlohmann::json& j) {
  io_detail::requireFields(j,
                           {"schema_version", "opening_hour",
                            "mandatory_entry_hour", "total_hours", "batches"},
                           "schedule");
  BatchSchedule s;
  try {
    s.openingHour = j.at("opening_hour").get<int>();
    s.mandatoryEntryHour = j.at("mandatory_entry_hour").get<int>();
    s.totalHours = j.at("total_hours").get<int>();
    for (const auto& b : j.at("batches"))
      s.batches.push_back({b.at("score_lower").get<int>(),
                           b.at("score_upper").get<int>(),
                           b.at("deadline_hour").get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("schedule: ") + e.what());
  }
  s.validate();
  return s;
}

inline void writeSnapshotCsv(const std::string& path,
                             const UniversitySnapshot& snap) {
  std::ostringstream out;
  out << "planned_quota,final_quota,cutoff_planned,cutoff_final\n"
      << snap.plannedQuota << ',' << snap.finalQuota << ','
      << snap.cutoffPlanned << ',' << snap.cutoffFinal << '\n'
      << "score_with_bonus,score_without_bonus,gender,ethnicity,prog1,prog2,"
         "prog3,prog4,prog5,prog6,accept_any\n";
  for (const auto& row : snap.rows) {
    out << row.scoreWithBonus << ',' << row.examScore << ',' << row.gender
        << ',' << row.ethnicity;
    for (int p : row.programs) out << ',' << p;
    out << ',' << (row.acceptAny ? 1 : 0) << '\n';
  }
  io_detail::writeFile(path, out.str());
}

inline UniversitySnapshot readSnapshotCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  auto nextLine = [&]() {
    if (!std::getline(in, line))
      throw ValidationError(path + ": truncated snapshot file");
    return line;
  };
  nextLine();  // metadata header
  auto meta = snapshot_detail::splitCsv(nextLine());
  if (meta.size() != 4)
    throw ValidationError(path + ": bad metadata line");
  UniversitySnapshot snap;
  snap.plannedQuota = snapshot_detail::toInt(meta[0], path);
  snap.finalQuota = snapshot_detail::toInt(meta[1], path);
  snap.cutoffPlanned = snapshot_detail::toInt(meta[2], path);
  snap.cutoffFinal = snapshot_detail::toInt(meta[3], path);
  nextLine();  // row header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = snapshot_detail::splitCsv(line);
    if (f.size() != 11) throw ValidationError(path + ": bad applicant row");
    ApplicantRow row;
    row.scoreWithBonus = snapshot_detail::toInt(f[0], path);
    row.examScore = snapshot_detail::toInt(f[1], path);
    row.gender = snapshot_detail::toInt(f[2], path);
    row.ethnicity = snapshot_detail::toInt(f[3], path);
    for (int p = 0; p < kProgramSlots; ++p)
      row.programs[p] = snapshot_detail::toInt(f[4 + p], path);
    row.acceptAny = snapshot_detail::toInt(f[10], path) != 0;
    snap.rows.push_back(row);
  }
  return snap;
}

inline void writeSnapshotDir(const std::string& outdir,
                             const Snapshots& snapshots,
                             const BatchSchedule& schedule) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  io_detail::writeFile(outdir + "/schedule.json",
                       scheduleToJson(schedule).dump(2) + "\n");
  for (int h = 1; h <= snapshots.totalHours; ++h) {
    fs::path hourDir =
        fs::path(outdir) / "snapshots" / snapshot_detail::hourDirName(h);
    fs::create_directories(hourDir);
    const auto& unis = snapshots.hourly[h - 1];
    for (std::size_t u = 0; u < unis.size(); ++u)
      writeSnapshotCsv(
          (hourDir / snapshot_detail::uniFileName(static_cast<int>(u)))
              .string(),
          unis[u]);
  }
}

inline std::pair<Snapshots, BatchSchedule> readSnapshotDir(
    const std::string& dir) {
  namespace fs = std::filesystem;
  BatchSchedule schedule = scheduleFromJson(
      io_detail::parseJson(io_detail::readFile(dir + "/schedule.json"),
                           "schedule"));
  Snapshots snapshots;
  snapshots.totalHours = schedule.totalHours;
  snapshots.hourly.resize(schedule.totalHours);
  for (int h = 1; h <= schedule.totalHours; ++h) {
    fs::path hourDir =
        fs::path(dir) / "snapshots" / snapshot_detail::hourDirName(h);
    if (!fs::is_directory(hourDir))
      throw ValidationError("missing snapshot directory " + hourDir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(hourDir))
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files)
      snapshots.hourly[h - 1].push_back(readSnapshotCsv(f.string()));
  }
  for (int h = 2; h <= schedule.totalHours; ++h)
    if (snapshots.hourly[h - 1].size() != snapshots.hourly[0].size())
      throw ValidationError("university count differs across hours");
  return {std::move(snapshots), schedule};
}

inline void writeTruthSidecar(const std::string& path,
                              const GroundTruth& truth) {
  std::ostringstream out;
  out << "hour,university,row,true_id\n";
  for (std::size_t h = 0; h < truth.rowIds.size(); ++h)
    for (std::size_t u = 0; u < truth.rowIds[h].size(); ++u)
      for (std::size_t k = 0; k < truth.rowIds[h][u].size(); ++k)
        out << (h + 1) << ',' << u << ',' << k << ','
            << truth.rowIds[h][u][k] << '\n';
  io_detail::writeFile(path, out.str());
}

inline GroundTruth readTruthSidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  GroundTruth truth;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = snapshot_detail::splitCsv(line);
    if (f.size() != 4) throw ValidationError(path + ": bad sidecar row");
    int h = snapshot_detail::toInt(f[0], path);
    int u = snapshot_detail::toInt(f[1], path);
    int k = snapshot_detail::toInt(f[2], path);
    int id = snapshot_detail::toInt(f[3], path);
    if (h < 1 || u < 0 || k < 0) throw ValidationError(path + ": bad indices");
    if (static_cast<int>(truth.rowIds.size()) < h) truth.rowIds.resize(h);
    if (static_cast<int>(truth.rowIds[h - 1].size()) <= u)
      truth.rowIds[h - 1].resize(u + 1);
    if (static_cast<int>(truth.rowIds[h - 1][u].size()) <= k)
      truth.rowIds[h - 1][u].resize(k + 1, -1);
    truth.rowIds[h - 1][u][k] = id;
  }
  return truth;
}

inline nlohmann::json metricsToJson(const OutcomeMetrics& m) {
  nlohmann::json j;
  j["changed_final_round"] = m.changedFinalRoundCount;
  j["changed_final_round_and_rejected"] = m.changedFinalRoundAndRejectedCount;
  j["unassigned_with_score_above_some_prior_cutoff"] =
      m.unassignedWithScoreAboveSomePriorCutoffCount;
  j["admitted_by_rank_measure"] = m.admittedByRankMeasure;
  j["admitted_by_cutoff_measure"] = m.admittedByCutoffMeasure;
  j["measure_divergence"] = m.measureDivergence;
  j["void_applications"] = m.voidCount;
  j["tentative_assigned_rate_by_batch_by_hour"] =
      m.tentativeAssignedRateByHourByBatch;
  return j;
}

}  // namespace tcdm::imsim

namespace tcdm::linker {

inline void writeLinkageCsv(const std::string& path,
                            const LinkageResult& result,
                            const imsim::Snapshots& snapshots) {
  std::ostringstream out;
  out << "id,hour,university,row,score_with_bonus,score_without_bonus,gender,"
         "ethnicity,prog1,prog2,prog3,prog4,prog5,prog6,accept_any,rule\n";
  for (int h = 1; h <= result.totalHours; ++h)
    for (std::size_t u = 0; u < result.assignedIds[h - 1].size(); ++u)
      for (std::size_t k = 0; k < result.assignedIds[h - 1][u].size(); ++k) {
        const auto& row = snapshots.hourly[h - 1][u].rows[k];
        out << result.assignedIds[h - 1][u][k] << ',' << h << ',' << u << ','
            << k << ',' << row.scoreWithBonus << ',' << row.examScore << ','
            << row.gender << ',' << row.ethnicity;
        for (int p : row.programs) out << ',' << p;
        out << ',' << (row.acceptAny ? 1 : 0) << ','
            << linkRuleName(result.ruleAttribution[h - 1][u][k]) << '\n';
      }
  io_detail::writeFile(path, out.str());
}

inline nlohmann::json linkageScoreToJson(const LinkageScore& s) {
  nlohmann::json j;
  j["id_precision"] = s.idPrecision;
  j["id_recall"] = s.idRecall;
  j["change_event_precision"] = s.changeEventPrecision;
  j["change_event_recall"] = s.changeEventRecall;
  j["frozen_link_accuracy"] = s.frozenLinkAccuracy;
  j["frozen_unique_link_accuracy"] = s.frozenUniqueLinkAccuracy;
  j["frozen_unique_links"] = s.frozenUniqueLinks;
  j["inferred_change_events"] = s.inferredChangeCount;
  j["true_change_events"] = s.trueChangeCount;
  j["total_rows"] = s.totalRows;
  for (const auto& [rule, ct] : s.perRuleCorrectTotal)
    j["per_rule_links"][rule] = {{"correct", ct.first}, {"total", ct.second}};
  for (const auto& [mult, keys] : s.duplicatesPerKeyHistogram)
    j["duplicates_per_link_key"][std::to_string(mult)] = keys;
  return j;
}

}  // namespace tcdm::linker
