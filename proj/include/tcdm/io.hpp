#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tcdm/core.hpp"
#include "tcdm/mechanisms.hpp"

// File formats. An instance is a JSON document:
//
//   {
//     "students":    [{"id": "i1", "score": 4}, ...],
//     "colleges":    [{"id": "c1", "capacity": 1}, ...],
//     "preferences": {"i1": ["c1", "c2", "∅", "c3"], ...}
//   }
//
// The optional "∅" entry marks the outside option: colleges after it (or
// missing from the list) are worse than staying unassigned and are never
// applied to. Matchings serialize as {"i1": "c1", "i3": null, ...}.

namespace tcdm {

inline constexpr const char* kOutsideOptionToken = "∅";

namespace io_detail {

inline nlohmann::json parseJson(const std::string& text,
                                const std::string& what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

inline void requireFields(const nlohmann::json& j,
                          const std::vector<std::string>& allowed,
                          const std::string& what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ValidationError(what + ": unknown field \"" + it.key() + "\"");
  }
}

inline std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void writeFile(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << data;
}

}  // namespace io_detail

inline ProblemInstance parseInstance(const std::string& text) {
  using nlohmann::json;
  json j = io_detail::parseJson(text, "instance");
  if (!j.is_object()) throw ValidationError("instance: not a JSON object");
  io_detail::requireFields(j, {"students", "colleges", "preferences"},
                           "instance");

  std::vector<StudentSpec> students;
  std::vector<CollegeSpec> colleges;
  std::unordered_map<std::string, std::vector<std::string>> prefs;
  try {
    for (const auto& s : j.at("students"))
      students.push_back({s.at("id").get<std::string>(),
                          s.at("score").get<double>()});
    for (const auto& c : j.at("colleges"))
      colleges.push_back({c.at("id").get<std::string>(),
                          c.at("capacity").get<int>()});
    if (j.contains("preferences")) {
      for (auto it = j.at("preferences").begin();
           it != j.at("preferences").end(); ++it) {
        std::vector<std::string> list;
        bool pastSentinel = false;
        for (const auto& entry : it.value()) {
          std::string token = entry.get<std::string>();
          if (token == kOutsideOptionToken) {
            pastSentinel = true;
            continue;
          }
          if (!pastSentinel) list.push_back(token);
          // colleges after the sentinel are never applied to; dropping them
          // is equivalent to leaving them off the list
        }
        prefs.emplace(it.key(), std::move(list));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("instance: ") + e.what());
  }
  return ProblemInstance::create(std::move(students), std::move(colleges),
                                 prefs);
}

inline ProblemInstance loadInstance(const std::string& path) {
  return parseInstance(io_detail::readFile(path));
}

inline nlohmann::json instanceToJson(const ProblemInstance& inst) {
  nlohmann::json j;
  j["students"] = nlohmann::json::array();
  for (int i = 0; i < inst.numStudents(); ++i)
    j["students"].push_back(
        {{"id", inst.studentId(i)}, {"score", inst.score(i)}});
  j["colleges"] = nlohmann::json::array();
  for (int c = 0; c < inst.numColleges(); ++c)
    j["colleges"].push_back(
        {{"id", inst.collegeId(c)}, {"capacity", inst.capacity(c)}});
  j["preferences"] = nlohmann::json::object();
  for (int i = 0; i < inst.numStudents(); ++i) {
    nlohmann::json list = nlohmann::json::array();
    for (int c : inst.acceptable(i)) list.push_back(inst.collegeId(c));
    if (static_cast<int>(inst.acceptable(i).size()) < inst.numColleges())
      list.push_back(kOutsideOptionToken);
    j["preferences"][inst.studentId(i)] = std::move(list);
  }
  return j;
}

inline nlohmann::json matchingToJson(const ProblemInstance& inst,
                                     const Matching& mu) {
  nlohmann::json j = nlohmann::json::object();
  for (int i = 0; i < inst.numStudents(); ++i) {
    if (mu.of(i) == kUnassigned)
      j[inst.studentId(i)] = nullptr;
    else
      j[inst.studentId(i)] = inst.collegeId(mu.of(i));
  }
  return j;
}

inline Matching matchingFromJson(const ProblemInstance& inst,
                                 const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("matching: not a JSON object");
  Matching mu;
  mu.assignment.assign(inst.numStudents(), kUnassigned);
  for (auto it = j.begin(); it != j.end(); ++it) {
    int i = inst.studentIndex(it.key());
    if (!it.value().is_null())
      mu.assignment[i] = inst.collegeIndex(it.value().get<std::string>());
  }
  validateMatching(inst, mu);
  return mu;
}

inline nlohmann::json applicationsToJson(const ProblemInstance& inst,
                                         const std::vector<int>& apps) {
  nlohmann::json j = nlohmann::json::object();
  for (int i = 0; i < inst.numStudents(); ++i) {
    if (apps[i] == kUnassigned)
      j[inst.studentId(i)] = nullptr;
    else
      j[inst.studentId(i)] = inst.collegeId(apps[i]);
  }
  return j;
}

inline nlohmann::json cutoffsToJson(const ProblemInstance& inst,
                                    const CutoffVector& f) {
  nlohmann::json j = nlohmann::json::object();
  for (int c = 0; c < inst.numColleges(); ++c)
    j[inst.collegeId(c)] = f.cutoff[c];
  return j;
}

inline nlohmann::json trajectoryToJson(const ProblemInstance& inst,
                                       const TcdmTrajectory& traj) {
  nlohmann::json j;
  j["round_budget"] = traj.roundBudget;
  j["converged"] = traj.converged;
  j["rounds"] = nlohmann::json::array();
  for (const auto& r : traj.rounds) {
    j["rounds"].push_back({{"applications", applicationsToJson(inst, r.applications)},
                           {"tentative", matchingToJson(inst, r.tentative)},
                           {"cutoffs", cutoffsToJson(inst, r.cutoffs)}});
  }
  j["final"] = matchingToJson(inst, traj.final);
  return j;
}

}  // namespace tcdm
