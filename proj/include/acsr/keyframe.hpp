#pragma once

// Hand keyframe filter: slow-motion frame detection followed by grouping of
// slow frames under the transitive closure of |j - k| <= theta, with the
// lower-median member of each group taken as its keyframe.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acsr/detail/text.hpp"
#include "acsr/error.hpp"

namespace acsr {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

// Per-frame hand-center coordinates in pixels.
struct Trajectory {
  std::vector<Point> points;
  double frame_rate = 30.0;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.empty()) throw ValidationError("trajectory must contain at least one frame");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y)) {
        throw ValidationError("trajectory frame " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
  }
};

struct FilterConfig {
  double sigma = 6.0;      // slow-motion threshold, pixels per frame
  std::size_t theta = 2;   // frame-index distance threshold

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be a finite value >= 0");
    if (theta < 1) throw ValidationError("theta must be >= 1");
  }
};

// values[j - 1] is the distance moved between frames j - 1 and j.
using DistanceSeries = std::vector<double>;

struct SlowMotionGroup {
  std::vector<std::size_t> members;
  std::size_t keyframe = 0;

  friend bool operator==(const SlowMotionGroup&, const SlowMotionGroup&) = default;
};

struct KeyframeResult {
  std::vector<SlowMotionGroup> groups;

  std::vector<std::size_t> keyframes() const {
    std::vector<std::size_t> out;
    out.reserve(groups.size());
    for (const auto& g : groups) out.push_back(g.keyframe);
    return out;
  }
  std::size_t size() const { return groups.size(); }

  friend bool operator==(const KeyframeResult&, const KeyframeResult&) = default;
};

inline DistanceSeries movement_distances(const Trajectory& traj) {
  DistanceSeries d;
  if (traj.points.size() < 2) return d;
  d.reserve(traj.points.size() - 1);
  for (std::size_t j = 1; j < traj.points.size(); ++j) {
    d.push_back(std::hypot(traj.points[j].x - traj.points[j - 1].x, traj.points[j].y - traj.points[j - 1].y));
  }
  return d;
}

// Frame j (1 <= j <= T-1) is slow when D_j <= sigma. Frame 0 has no
// predecessor and is never slow.
inline std::vector<std::size_t> slow_frames(const DistanceSeries& d, const FilterConfig& cfg) {
  std::vector<std::size_t> slow;
  for (std::size_t j = 1; j <= d.size(); ++j) {
    if (d[j - 1] <= cfg.sigma) slow.push_back(j);
  }
  return slow;
}

// Input must be ascending. Since S is sorted, the transitive closure of the
// local-connection relation splits S exactly where consecutive members are
// more than theta apart.
inline std::vector<std::vector<std::size_t>> group_slow_frames(const std::vector<std::size_t>& slow,
                                                               const FilterConfig& cfg) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> current;
  for (std::size_t j : slow) {
    if (!current.empty() && j - current.back() > cfg.theta) {
      groups.push_back(std::move(current));
      current.clear();
    }
    current.push_back(j);
  }
  if (!current.empty()) groups.push_back(std::move(current));
  return groups;
}

// Keyframe is the lower median, members[(n - 1) / 2].
inline KeyframeResult select_keyframes(std::vector<std::vector<std::size_t>> groups) {
  KeyframeResult result;
  result.groups.reserve(groups.size());
  for (auto& members : groups) {
    if (members.empty()) throw ValidationError("slow-motion group must not be empty");
    const std::size_t key = members[(members.size() - 1) / 2];
    result.groups.push_back({std::move(members), key});
  }
  return result;
}

inline KeyframeResult filter_keyframes(const Trajectory& traj, const FilterConfig& cfg) {
  traj.validate();
  cfg.validate();
  return select_keyframes(group_slow_frames(slow_frames(movement_distances(traj), cfg), cfg));
}

// --- file formats ----------------------------------------------------------

// CSV with header "frame,x,y" and contiguous frame indices 0..T-1.
inline Trajectory read_trajectory_csv(std::istream& in, std::string_view source = "trajectory") {
  Trajectory traj;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(std::string(source) + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "frame,x,y") throw ParseError(std::string(source) + ": expected header 'frame,x,y'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    const std::string where = std::string(source) + " line " + std::to_string(line_no);
    if (fields.size() != 3) throw ParseError(where + ": expected 3 fields");
    const auto frame = detail::parse_integer(fields[0], where);
    if (frame != static_cast<long long>(traj.points.size())) {
      throw ParseError(where + ": frame index " + std::to_string(frame) + " breaks the contiguous sequence");
    }
    traj.points.push_back({detail::parse_double(fields[1], where), detail::parse_double(fields[2], where)});
  }
  traj.validate();
  return traj;
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file " + path.string());
  return read_trajectory_csv(in, path.string());
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "frame,x,y\n";
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    out << i << ',' << detail::format_double(traj.points[i].x) << ',' << detail::format_double(traj.points[i].y)
        << '\n';
  }
}

inline void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  write_trajectory_csv(out, traj);
}

// {"keyframes": [int], "groups": [[int]]}
inline nlohmann::ordered_json to_json(const KeyframeResult& result) {
  nlohmann::ordered_json doc;
  doc["keyframes"] = result.keyframes();
  auto groups = nlohmann::ordered_json::array();
  for (const auto& g : result.groups) groups.push_back(g.members);
  doc["groups"] = std::move(groups);
  return doc;
}

inline KeyframeResult keyframes_from_json(const nlohmann::json& doc) {
  try {
    const auto keys = doc.at("keyframes").get<std::vector<std::size_t>>();
    const auto groups = doc.at("groups").get<std::vector<std::vector<std::size_t>>>();
    if (keys.size() != groups.size()) throw ValidationError("keyframe file: keyframes and groups differ in length");
    KeyframeResult result;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const auto& members = groups[i];
      if (members.empty()) throw ValidationError("keyframe file: group " + std::to_string(i) + " is empty");
      for (std::size_t k = 1; k < members.size(); ++k) {
        if (members[k] <= members[k - 1]) throw ValidationError("keyframe file: group members must be increasing");
      }
      if (i > 0 && members.front() <= result.groups.back().members.back()) {
        throw ValidationError("keyframe file: groups must be disjoint and ordered");
      }
      if (!std::binary_search(members.begin(), members.end(), keys[i])) {
        throw ValidationError("keyframe file: keyframe " + std::to_string(keys[i]) + " is not a member of its group");
      }
      result.groups.push_back({members, keys[i]});
    }
    return result;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("keyframe file: ") + e.what());
  }
}

}  // namespace acsr
